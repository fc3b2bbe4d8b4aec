//! Poisson family: t(x) = x, θ = log λ, F(θ) = e^θ, F*(η) = η log η - η,
//! k(x) = -log x!. The dual divergence is the generalized I-divergence.

use rand::RngCore;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::exp_family::{ExpFamily, Moment, Natural};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Poisson;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonSource {
    pub rate: f64,
}

impl PoissonSource {
    pub fn new(rate: f64) -> Result<Self> {
        if rate.is_finite() && rate > 0.0 {
            Ok(Self { rate })
        } else {
            Err(Error::domain("poisson", "source", "rate must be positive"))
        }
    }
}

impl Poisson {
    pub fn to_natural(&self, src: PoissonSource) -> Natural {
        Natural::new(vec![src.rate.ln()])
    }

    pub fn to_moment(&self, src: PoissonSource) -> Moment {
        Moment::new(vec![src.rate])
    }

    pub fn from_natural(&self, theta: &Natural) -> Result<PoissonSource> {
        crate::exp_family::validate_natural(self, theta)?;
        PoissonSource::new(theta.as_slice()[0].exp())
    }
}

/// I(a : b) = a log(a/b) - a + b, with 0 log 0 = 0.
pub fn i_divergence(a: f64, b: f64) -> f64 {
    let lead = if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    lead - a + b
}

impl ExpFamily for Poisson {
    fn name(&self) -> &str {
        "poisson"
    }

    fn support_dim(&self) -> usize {
        1
    }

    fn order(&self) -> usize {
        1
    }

    fn check_support(&self, x: &[f64]) -> Result<(), String> {
        let v = x[0];
        if v.is_finite() && v >= 0.0 && v.fract() == 0.0 {
            Ok(())
        } else {
            Err(format!("x must be a non-negative integer, got {v}"))
        }
    }

    fn check_natural(&self, theta: &[f64]) -> Result<(), String> {
        if theta[0].is_finite() {
            Ok(())
        } else {
            Err("θ must be finite".into())
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
        vec![x[0]]
    }

    fn carrier(&self, x: &[f64]) -> f64 {
        -libm::lgamma(x[0] + 1.0)
    }

    fn log_normalizer_at(&self, theta: &[f64]) -> f64 {
        theta[0].exp()
    }

    fn gradient_at(&self, theta: &[f64]) -> Vec<f64> {
        vec![theta[0].exp()]
    }

    fn gradient_inverse_at(&self, eta: &[f64]) -> Vec<f64> {
        vec![eta[0].ln()]
    }

    /// Extended continuously to η = 0.
    fn conjugate_at(&self, eta: &[f64]) -> f64 {
        let e = eta[0];
        if e == 0.0 {
            0.0
        } else {
            e * e.ln() - e
        }
    }

    fn log_normalizer_second_derivative(&self, theta: f64) -> Option<f64> {
        Some(theta.exp())
    }

    fn conjugate_second_derivative(&self, eta: f64) -> Option<f64> {
        Some(1.0 / eta)
    }

    fn regularize_moment(&self, eta: &mut [f64], ridge: f64) -> bool {
        eta[0] = eta[0].max(ridge);
        true
    }

    fn draw(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let rate = theta[0].exp();
        let dist = rand_distr::Poisson::new(rate).expect("validated rate");
        vec![dist.sample(rng)]
    }
}
