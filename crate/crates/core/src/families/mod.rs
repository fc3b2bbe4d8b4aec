//! Shipped exponential families.

mod gaussian;
mod poisson;
mod rayleigh;

pub use gaussian::{gaussian_kl, pack_symmetric, unpack_symmetric, Gaussian, GaussianSource};
pub use poisson::{i_divergence, Poisson, PoissonSource};
pub use rayleigh::{itakura_saito, Rayleigh, RayleighSource};

use rand::RngCore;

use crate::error::{Error, Result};
use crate::exp_family::ExpFamily;

pub fn rayleigh_descriptor() -> Rayleigh {
    Rayleigh
}

pub fn poisson_descriptor() -> Poisson {
    Poisson
}

/// Runtime choice among the shipped families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gaussian(Gaussian),
    Rayleigh(Rayleigh),
    Poisson(Poisson),
}

impl Family {
    /// Looks a family up by name; `dim` is only used by the Gaussian.
    pub fn from_name(name: &str, dim: usize) -> Result<Self> {
        match name {
            "gaussian" => {
                if dim == 0 {
                    return Err(Error::InvalidArgument("gaussian dimension must be ≥ 1".into()));
                }
                Ok(Family::Gaussian(Gaussian::new(dim)))
            }
            "rayleigh" => Ok(Family::Rayleigh(Rayleigh)),
            "poisson" => Ok(Family::Poisson(Poisson)),
            other => Err(Error::InvalidArgument(format!("unknown family {other:?}"))),
        }
    }

    fn inner(&self) -> &dyn ExpFamily {
        match self {
            Family::Gaussian(g) => g,
            Family::Rayleigh(r) => r,
            Family::Poisson(p) => p,
        }
    }
}

impl ExpFamily for Family {
    fn name(&self) -> &str {
        self.inner().name()
    }
    fn support_dim(&self) -> usize {
        self.inner().support_dim()
    }
    fn order(&self) -> usize {
        self.inner().order()
    }
    fn check_support(&self, x: &[f64]) -> Result<(), String> {
        self.inner().check_support(x)
    }
    fn check_natural(&self, theta: &[f64]) -> Result<(), String> {
        self.inner().check_natural(theta)
    }
    fn check_moment(&self, eta: &[f64]) -> Result<(), String> {
        self.inner().check_moment(eta)
    }
    fn sufficient_stat(&self, x: &[f64]) -> Vec<f64> {
        self.inner().sufficient_stat(x)
    }
    fn carrier(&self, x: &[f64]) -> f64 {
        self.inner().carrier(x)
    }
    fn log_normalizer_at(&self, theta: &[f64]) -> f64 {
        self.inner().log_normalizer_at(theta)
    }
    fn gradient_at(&self, theta: &[f64]) -> Vec<f64> {
        self.inner().gradient_at(theta)
    }
    fn gradient_inverse_at(&self, eta: &[f64]) -> Vec<f64> {
        self.inner().gradient_inverse_at(eta)
    }
    fn conjugate_at(&self, eta: &[f64]) -> f64 {
        self.inner().conjugate_at(eta)
    }
    fn natural_start(&self) -> Vec<f64> {
        self.inner().natural_start()
    }
    fn log_normalizer_second_derivative(&self, theta: f64) -> Option<f64> {
        self.inner().log_normalizer_second_derivative(theta)
    }
    fn conjugate_second_derivative(&self, eta: f64) -> Option<f64> {
        self.inner().conjugate_second_derivative(eta)
    }
    fn regularize_moment(&self, eta: &mut [f64], ridge: f64) -> bool {
        self.inner().regularize_moment(eta, ridge)
    }
    fn promote_statistic(&self, y: &[f64], global: &[f64]) -> Vec<f64> {
        self.inner().promote_statistic(y, global)
    }
    fn draw(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        self.inner().draw(theta, rng)
    }
}
