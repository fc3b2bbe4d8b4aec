//! Generic exponential-family interface and Legendre duality.
//!
//! A family is described by its log-normalizer `F` on the natural space,
//! the gradient map `∇F` onto the moment space, its inverse `∇F* = (∇F)⁻¹`,
//! the convex conjugate `F*`, the sufficient statistic `t(x)` and the
//! carrier term `k(x)`. Densities read
//!
//! ```text
//! log p(x; θ) = <t(x), θ> - F(θ) + k(x)
//!             = -B_{F*}(t(x) : η) + F*(t(x)) + k(x),   η = ∇F(θ)
//! ```
//!
//! Parameters are carried in [`Natural`] or [`Moment`] wrappers so the two
//! coordinate systems cannot be mixed up at call sites.

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Absolute and relative tolerances shared by identity checks and
/// iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Absolute tolerance for algebraic identities.
    pub identity: f64,
    /// Relative tolerance for iterative convergence.
    pub convergence: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-9,
            convergence: 1e-6,
        }
    }
}

macro_rules! coords {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(coords: Vec<f64>) -> Self {
                Self(coords)
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }

        impl AsRef<[f64]> for $name {
            fn as_ref(&self) -> &[f64] {
                &self.0
            }
        }
    };
}

coords!(
    /// A point θ of the natural parameter space Θ.
    Natural
);
coords!(
    /// A point η = ∇F(θ) of the moment (expectation) parameter space M.
    Moment
);

/// An exponential family in canonical form.
///
/// The `*_at` evaluators assume their argument has already been validated
/// with [`check_natural`](Self::check_natural) or
/// [`check_moment`](Self::check_moment); the checked entry points are the
/// free functions of this module.
pub trait ExpFamily: Send + Sync {
    /// Stable identifier, used in model files.
    fn name(&self) -> &str;

    /// Dimension `d` of an observation.
    fn support_dim(&self) -> usize;

    /// Order `D` of the family, i.e. the length of θ, η and t(x).
    fn order(&self) -> usize;

    fn check_support(&self, x: &[f64]) -> Result<(), String>;
    fn check_natural(&self, theta: &[f64]) -> Result<(), String>;
    fn check_moment(&self, eta: &[f64]) -> Result<(), String>;

    fn sufficient_stat(&self, x: &[f64]) -> Vec<f64>;
    fn carrier(&self, x: &[f64]) -> f64;

    /// F(θ).
    fn log_normalizer_at(&self, theta: &[f64]) -> f64;

    /// ∇F(θ).
    fn gradient_at(&self, theta: &[f64]) -> Vec<f64>;

    /// (∇F)⁻¹(η) = ∇F*(η).
    ///
    /// Families without a closed form may rely on the default, a damped
    /// Newton solve of ∇F(θ) = η started at [`natural_start`](Self::natural_start).
    fn gradient_inverse_at(&self, eta: &[f64]) -> Vec<f64> {
        newton_gradient_inverse(self, eta, &Tolerances::default())
            .unwrap_or_else(|_| vec![f64::NAN; eta.len()])
    }

    /// F*(η). Families may extend F* continuously to the boundary of M
    /// (returning `+∞` where it diverges); the default goes through the
    /// Legendre identity F*(η) = <θ, η> - F(θ).
    fn conjugate_at(&self, eta: &[f64]) -> f64 {
        let theta = self.gradient_inverse_at(eta);
        dot(&theta, eta) - self.log_normalizer_at(&theta)
    }

    /// Starting point for numeric gradient inversion.
    fn natural_start(&self) -> Vec<f64> {
        vec![0.0; self.order()]
    }

    /// F″(θ) for order-one families.
    fn log_normalizer_second_derivative(&self, _theta: f64) -> Option<f64> {
        None
    }

    /// F*″(η) for order-one families.
    fn conjugate_second_derivative(&self, _eta: f64) -> Option<f64> {
        None
    }

    /// Pulls an out-of-domain moment estimate back inside M.
    ///
    /// `ridge` is a relative strength. Returns false when the family has no
    /// regularization for this point.
    fn regularize_moment(&self, _eta: &mut [f64], _ridge: f64) -> bool {
        false
    }

    /// Maps a raw statistic `y = t(x)` to an in-domain moment point using
    /// the global moment estimate for the coordinates a single observation
    /// cannot determine. The default is the identity (order-`d` families).
    fn promote_statistic(&self, y: &[f64], _global: &[f64]) -> Vec<f64> {
        y.to_vec()
    }

    /// Draws one observation.
    fn draw(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64>;
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Observations `x_1 … x_n`, each of length `d`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    points: Vec<Vec<f64>>,
    stats: Option<Vec<Vec<f64>>>,
}

impl SampleSet {
    pub fn new(points: Vec<Vec<f64>>) -> Self {
        Self {
            points,
            stats: None,
        }
    }

    /// Validates every point against `fam` and caches the statistics.
    pub fn for_family<F: ExpFamily + ?Sized>(points: Vec<Vec<f64>>, fam: &F) -> Result<Self> {
        let mut set = Self::new(points);
        set.validate(fam)?;
        set.stats = Some(set.points.iter().map(|x| fam.sufficient_stat(x)).collect());
        Ok(set)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate<F: ExpFamily + ?Sized>(&self, fam: &F) -> Result<()> {
        for (i, x) in self.points.iter().enumerate() {
            if x.len() != fam.support_dim() {
                return Err(Error::Dimension {
                    expected: fam.support_dim(),
                    got: x.len(),
                });
            }
            fam.check_support(x).map_err(|constraint| Error::Support {
                family: fam.name().to_string(),
                index: i,
                constraint,
            })?;
        }
        Ok(())
    }

    /// Sufficient statistics `y_i = t(x_i)`, from the cache when present.
    pub fn statistics<F: ExpFamily + ?Sized>(&self, fam: &F) -> Vec<Vec<f64>> {
        match &self.stats {
            Some(s) => s.clone(),
            None => self.points.iter().map(|x| fam.sufficient_stat(x)).collect(),
        }
    }
}

fn check_len<F: ExpFamily + ?Sized>(fam: &F, len: usize) -> Result<()> {
    if len != fam.order() {
        return Err(Error::Dimension {
            expected: fam.order(),
            got: len,
        });
    }
    Ok(())
}

pub fn validate_natural<F: ExpFamily + ?Sized>(fam: &F, theta: &Natural) -> Result<()> {
    check_len(fam, theta.len())?;
    fam.check_natural(theta.as_slice())
        .map_err(|c| Error::domain(fam.name(), "natural", c))
}

pub fn validate_moment<F: ExpFamily + ?Sized>(fam: &F, eta: &Moment) -> Result<()> {
    check_len(fam, eta.len())?;
    fam.check_moment(eta.as_slice())
        .map_err(|c| Error::domain(fam.name(), "moment", c))
}

fn validate_point<F: ExpFamily + ?Sized>(fam: &F, x: &[f64]) -> Result<()> {
    if x.len() != fam.support_dim() {
        return Err(Error::Dimension {
            expected: fam.support_dim(),
            got: x.len(),
        });
    }
    fam.check_support(x).map_err(|constraint| Error::Support {
        family: fam.name().to_string(),
        index: 0,
        constraint,
    })
}

/// F(θ).
pub fn log_normalizer<F: ExpFamily + ?Sized>(fam: &F, theta: &Natural) -> Result<f64> {
    validate_natural(fam, theta)?;
    Ok(fam.log_normalizer_at(theta.as_slice()))
}

/// η = ∇F(θ).
pub fn grad_log_normalizer<F: ExpFamily + ?Sized>(fam: &F, theta: &Natural) -> Result<Moment> {
    validate_natural(fam, theta)?;
    Ok(Moment(fam.gradient_at(theta.as_slice())))
}

/// θ = (∇F)⁻¹(η) = ∇F*(η).
pub fn natural_from_moment<F: ExpFamily + ?Sized>(fam: &F, eta: &Moment) -> Result<Natural> {
    validate_moment(fam, eta)?;
    let theta = fam.gradient_inverse_at(eta.as_slice());
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence(NEWTON_MAX_ITERS));
    }
    Ok(Natural(theta))
}

/// F*(η).
pub fn conjugate<F: ExpFamily + ?Sized>(fam: &F, eta: &Moment) -> Result<f64> {
    validate_moment(fam, eta)?;
    Ok(fam.conjugate_at(eta.as_slice()))
}

/// Canonical-form log-density <t(x), θ> - F(θ) + k(x).
pub fn log_density<F: ExpFamily + ?Sized>(fam: &F, x: &[f64], theta: &Natural) -> Result<f64> {
    validate_point(fam, x)?;
    validate_natural(fam, theta)?;
    let th = theta.as_slice();
    Ok(dot(&fam.sufficient_stat(x), th) - fam.log_normalizer_at(th) + fam.carrier(x))
}

/// Bregman-form log-density -B_{F*}(t(x) : η) + F*(t(x)) + k(x).
///
/// When F*(t(x)) diverges (the statistic sits on the boundary of M, as for
/// a single Gaussian observation) the two infinite terms are cancelled
/// symbolically, leaving F*(η) + <t(x) - η, ∇F*(η)> + k(x).
pub fn log_density_bregman<F: ExpFamily + ?Sized>(
    fam: &F,
    x: &[f64],
    theta: &Natural,
) -> Result<f64> {
    validate_point(fam, x)?;
    validate_natural(fam, theta)?;
    let eta = fam.gradient_at(theta.as_slice());
    let y = fam.sufficient_stat(x);
    let conj_eta = fam.conjugate_at(&eta);
    let grad_conj = fam.gradient_inverse_at(&eta);
    let lin: f64 = y
        .iter()
        .zip(&eta)
        .zip(&grad_conj)
        .map(|((yi, ei), gi)| (yi - ei) * gi)
        .sum();
    let conj_y = fam.conjugate_at(&y);
    if conj_y.is_finite() {
        let div = conj_y - conj_eta - lin;
        Ok(-div + conj_y + fam.carrier(x))
    } else {
        Ok(conj_eta + lin + fam.carrier(x))
    }
}

/// Average log-likelihood of `data` under a single component.
pub fn average_log_likelihood<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    theta: &Natural,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    data.validate(fam)?;
    validate_natural(fam, theta)?;
    let th = theta.as_slice();
    let f = fam.log_normalizer_at(th);
    let total: f64 = data
        .points()
        .iter()
        .map(|x| dot(&fam.sufficient_stat(x), th) - f + fam.carrier(x))
        .sum();
    Ok(total / data.len() as f64)
}

/// Options for maximum-likelihood estimation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MleOptions {
    /// Relative ridge applied when the mean statistic falls outside M.
    /// `None` turns degeneracy into an error.
    pub ridge: Option<f64>,
}

/// Default relative ridge strength (ε = 1e-6 · trace / d for Gaussians).
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Arithmetic mean of statistic vectors.
pub fn mean_statistic(stats: &[Vec<f64>]) -> Vec<f64> {
    let n = stats.len() as f64;
    let mut acc = vec![0.0; stats.first().map_or(0, Vec::len)];
    for y in stats {
        for (a, v) in acc.iter_mut().zip(y) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Brings a moment estimate into M, regularizing it if allowed.
pub(crate) fn admit_moment<F: ExpFamily + ?Sized>(
    fam: &F,
    mut eta: Vec<f64>,
    ridge: Option<f64>,
    context: &str,
) -> Result<Vec<f64>> {
    match fam.check_moment(&eta) {
        Ok(()) => Ok(eta),
        Err(why) => {
            if let Some(r) = ridge {
                if fam.regularize_moment(&mut eta, r) && fam.check_moment(&eta).is_ok() {
                    return Ok(eta);
                }
            }
            Err(Error::degenerate(
                context,
                format!("{why}; statistic mean = {eta:?}"),
            ))
        }
    }
}

/// Single-component maximum likelihood: η̂ is the mean statistic and
/// θ̂ = ∇F*(η̂).
pub fn mle<F: ExpFamily + ?Sized>(fam: &F, data: &SampleSet) -> Result<(Moment, Natural)> {
    mle_with(fam, data, MleOptions::default())
}

pub fn mle_with<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    opts: MleOptions,
) -> Result<(Moment, Natural)> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("MLE needs at least one observation".into()));
    }
    data.validate(fam)?;
    let eta = mean_statistic(&data.statistics(fam));
    let eta = Moment(admit_moment(fam, eta, opts.ridge, "maximum likelihood estimate")?);
    let theta = natural_from_moment(fam, &eta)?;
    Ok((eta, theta))
}

/// Draws `count` observations from one component, using a private
/// generator seeded with `seed`.
pub fn sample<F: ExpFamily + ?Sized>(
    fam: &F,
    theta: &Natural,
    count: usize,
    seed: u64,
) -> Result<SampleSet> {
    validate_natural(fam, theta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..count)
        .map(|_| fam.draw(theta.as_slice(), &mut rng))
        .collect();
    Ok(SampleSet::new(points))
}

const NEWTON_MAX_ITERS: usize = 200;

/// Solves ∇F(θ) = η by damped Newton iterations with a central-difference
/// Jacobian. Used by families that lack a closed-form inverse gradient.
pub fn newton_gradient_inverse<F: ExpFamily + ?Sized>(
    fam: &F,
    eta: &[f64],
    tol: &Tolerances,
) -> Result<Vec<f64>> {
    let dim = eta.len();
    let mut theta = fam.natural_start();
    let residual = |th: &[f64]| -> Vec<f64> {
        fam.gradient_at(th)
            .iter()
            .zip(eta)
            .map(|(g, e)| g - e)
            .collect()
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = 1.0 + norm(eta);
    let mut r = residual(&theta);
    for _ in 0..NEWTON_MAX_ITERS {
        if norm(&r) <= tol.identity * 1e-2 * scale {
            return Ok(theta);
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let h = 1e-6 * (1.0 + theta[j].abs());
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[j] += h;
            dn[j] -= h;
            let gu = fam.gradient_at(&up);
            let gd = fam.gradient_at(&dn);
            for i in 0..dim {
                jac[(i, j)] = (gu[i] - gd[i]) / (2.0 * h);
            }
        }
        let step = jac
            .lu()
            .solve(&DVector::from_column_slice(&r))
            .ok_or(Error::NoConvergence(NEWTON_MAX_ITERS))?;
        let current = norm(&r);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            if fam.check_natural(&cand).is_ok() {
                let rc = residual(&cand);
                if norm(&rc) < current || t < 1e-12 {
                    theta = cand;
                    r = rc;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(Error::NoConvergence(NEWTON_MAX_ITERS));
            }
        }
    }
    if norm(&r) <= tol.convergence * scale {
        Ok(theta)
    } else {
        Err(Error::NoConvergence(NEWTON_MAX_ITERS))
    }
}
