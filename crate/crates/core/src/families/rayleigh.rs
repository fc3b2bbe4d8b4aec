//! Rayleigh family: t(x) = x², θ = -1/(2σ²), η = 2σ², k(x) = log x.
//!
//! The dual divergence B_{F*} is the Itakura-Saito divergence.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::exp_family::{ExpFamily, Moment, Natural};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Rayleigh;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayleighSource {
    pub sigma: f64,
}

impl RayleighSource {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(Self { sigma })
        } else {
            Err(Error::domain("rayleigh", "source", "σ must be positive"))
        }
    }
}

impl Rayleigh {
    pub fn to_natural(&self, src: RayleighSource) -> Natural {
        Natural::new(vec![-1.0 / (2.0 * src.sigma * src.sigma)])
    }

    pub fn to_moment(&self, src: RayleighSource) -> Moment {
        Moment::new(vec![2.0 * src.sigma * src.sigma])
    }

    pub fn from_natural(&self, theta: &Natural) -> Result<RayleighSource> {
        crate::exp_family::validate_natural(self, theta)?;
        RayleighSource::new((-0.5 / theta.as_slice()[0]).sqrt())
    }

    pub fn from_moment(&self, eta: &Moment) -> Result<RayleighSource> {
        crate::exp_family::validate_moment(self, eta)?;
        RayleighSource::new((0.5 * eta.as_slice()[0]).sqrt())
    }
}

/// IS(a : b) = a/b + log(b/a) - 1.
pub fn itakura_saito(a: f64, b: f64) -> f64 {
    a / b + (b / a).ln() - 1.0
}

impl ExpFamily for Rayleigh {
    fn name(&self) -> &str {
        "rayleigh"
    }

    fn support_dim(&self) -> usize {
        1
    }

    fn order(&self) -> usize {
        1
    }

    fn check_support(&self, x: &[f64]) -> Result<(), String> {
        if x[0].is_finite() && x[0] > 0.0 {
            Ok(())
        } else {
            Err(format!("x must be positive, got {}", x[0]))
        }
    }

    fn check_natural(&self, theta: &[f64]) -> Result<(), String> {
        if theta[0].is_finite() && theta[0] < 0.0 {
            Ok(())
        } else {
            Err(format!("θ must be negative, got {}", theta[0]))
        }
    }

    fn check_moment(&self, eta: &[f64]) -> Result<(), String> {
        if eta[0].is_finite() && eta[0] > 0.0 {
            Ok(())
        } else {
            Err(format!("η must be positive, got {}", eta[0]))
        }
    }

    fn sufficient_stat(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0] * x[0]]
    }

    fn carrier(&self, x: &[f64]) -> f64 {
        x[0].ln()
    }

    fn log_normalizer_at(&self, theta: &[f64]) -> f64 {
        -(-2.0 * theta[0]).ln()
    }

    fn gradient_at(&self, theta: &[f64]) -> Vec<f64> {
        vec![-1.0 / theta[0]]
    }

    fn gradient_inverse_at(&self, eta: &[f64]) -> Vec<f64> {
        vec![-1.0 / eta[0]]
    }

    fn conjugate_at(&self, eta: &[f64]) -> f64 {
        -1.0 + (2.0 / eta[0]).ln()
    }

    fn natural_start(&self) -> Vec<f64> {
        vec![-0.5]
    }

    fn log_normalizer_second_derivative(&self, theta: f64) -> Option<f64> {
        Some(1.0 / (theta * theta))
    }

    fn conjugate_second_derivative(&self, eta: f64) -> Option<f64> {
        Some(1.0 / (eta * eta))
    }

    fn regularize_moment(&self, eta: &mut [f64], ridge: f64) -> bool {
        eta[0] = eta[0].max(ridge);
        true
    }

    /// Inverse-CDF draw x = σ √(-2 log u).
    fn draw(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let sigma = (-0.5 / theta[0]).sqrt();
        let u: f64 = 1.0 - rng.random::<f64>();
        vec![sigma * (-2.0 * u.ln()).sqrt()]
    }
}
