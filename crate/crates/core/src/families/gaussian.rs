//! Multivariate normal family.
//!
//! Natural coordinates are θ = (Σ⁻¹μ, Σ⁻¹), moment coordinates are
//! η = (μ, -½(μμᵀ + Σ)) and the sufficient statistic is t(x) = (x, -½xxᵀ).
//! Matrix blocks are packed as the upper triangle in row-major order with
//! off-diagonal entries scaled by √2, so the plain dot product of two packed
//! vectors equals the trace inner product tr(AᵀB) of the matrices.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::exp_family::{ExpFamily, Moment, Natural};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gaussian {
    dim: usize,
}

/// Mean and covariance of a multivariate normal.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSource {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianSource {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                got: cov.nrows(),
            });
        }
        let src = Self { mean, cov };
        src.validate()?;
        Ok(src)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn validate(&self) -> Result<()> {
        let c = &self.cov;
        for i in 0..c.nrows() {
            for j in 0..i {
                if (c[(i, j)] - c[(j, i)]).abs() > 1e-12 * (1.0 + c[(i, j)].abs()) {
                    return Err(Error::domain("gaussian", "source", "covariance not symmetric"));
                }
            }
        }
        if Cholesky::new(c.clone()).is_none() {
            return Err(Error::domain(
                "gaussian",
                "source",
                "covariance not positive definite",
            ));
        }
        Ok(())
    }
}

pub(crate) fn packed_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Packs a symmetric matrix (upper triangle, √2-scaled off-diagonals).
pub fn pack_symmetric(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(packed_len(d));
    for i in 0..d {
        for j in i..d {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out.push(if i == j { v } else { v * SQRT_2 });
        }
    }
    out
}

pub fn unpack_symmetric(v: &[f64], d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    let mut idx = 0;
    for i in 0..d {
        for j in i..d {
            let val = if i == j { v[idx] } else { v[idx] / SQRT_2 };
            m[(i, j)] = val;
            m[(j, i)] = val;
            idx += 1;
        }
    }
    m
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

impl Gaussian {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "Gaussian dimension must be at least 1");
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        p.split_at(self.dim)
    }

    /// Covariance implied by a moment point: Σ = -2η_M - η_v η_vᵀ.
    fn moment_cov(&self, eta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let (ev, em) = self.split(eta);
        let mu = DVector::from_column_slice(ev);
        let cov = unpack_symmetric(em, self.dim) * -2.0 - &mu * mu.transpose();
        (mu, cov)
    }

    pub fn to_natural(&self, src: &GaussianSource) -> Result<Natural> {
        self.check_source(src)?;
        let prec = Cholesky::new(src.cov.clone())
            .ok_or_else(|| Error::domain("gaussian", "source", "covariance singular"))?
            .inverse();
        let tv = &prec * &src.mean;
        let mut out: Vec<f64> = tv.iter().copied().collect();
        out.extend(pack_symmetric(&prec));
        Ok(Natural::new(out))
    }

    pub fn to_moment(&self, src: &GaussianSource) -> Result<Moment> {
        self.check_source(src)?;
        let em = (&src.mean * src.mean.transpose() + &src.cov) * -0.5;
        let mut out: Vec<f64> = src.mean.iter().copied().collect();
        out.extend(pack_symmetric(&em));
        Ok(Moment::new(out))
    }

    pub fn from_natural(&self, theta: &Natural) -> Result<GaussianSource> {
        crate::exp_family::validate_natural(self, theta)?;
        let (tv, tm) = self.split(theta.as_slice());
        let cov = Cholesky::new(unpack_symmetric(tm, self.dim))
            .expect("validated")
            .inverse();
        let mean = &cov * DVector::from_column_slice(tv);
        Ok(GaussianSource { mean, cov })
    }

    pub fn from_moment(&self, eta: &Moment) -> Result<GaussianSource> {
        crate::exp_family::validate_moment(self, eta)?;
        let (mean, cov) = self.moment_cov(eta.as_slice());
        Ok(GaussianSource { mean, cov })
    }

    fn check_source(&self, src: &GaussianSource) -> Result<()> {
        if src.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: src.dim(),
            });
        }
        src.validate()
    }
}

/// KL(N(μ₁, Σ₁) : N(μ₂, Σ₂)) as half a Burg matrix divergence plus half a
/// squared Mahalanobis distance:
///
/// ```text
/// B(Σ₁ : Σ₂) = tr(Σ₁Σ₂⁻¹) - log|Σ₁Σ₂⁻¹| - d
/// M(μ₁, μ₂)  = (μ₁ - μ₂)ᵀ Σ₂⁻¹ (μ₁ - μ₂)
/// ```
pub fn gaussian_kl(p: &GaussianSource, q: &GaussianSource) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    p.validate()?;
    q.validate()?;
    let d = p.dim() as f64;
    let c1 = Cholesky::new(p.cov.clone()).expect("validated");
    let c2 = Cholesky::new(q.cov.clone())
        .ok_or_else(|| Error::domain("gaussian", "source", "covariance singular"))?;
    let trace = c2.solve(&p.cov).trace();
    let burg = trace - (log_det(&c1) - log_det(&c2)) - d;
    let diff = &p.mean - &q.mean;
    let maha = diff.dot(&c2.solve(&diff));
    Ok(0.5 * burg + 0.5 * maha)
}

impl ExpFamily for Gaussian {
    fn name(&self) -> &str {
        "gaussian"
    }

    fn support_dim(&self) -> usize {
        self.dim
    }

    fn order(&self) -> usize {
        self.dim + packed_len(self.dim)
    }

    fn check_support(&self, x: &[f64]) -> Result<(), String> {
        if x.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err("coordinates must be finite".into())
        }
    }

    fn check_natural(&self, theta: &[f64]) -> Result<(), String> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err("coordinates must be finite".into());
        }
        let (_, tm) = self.split(theta);
        match Cholesky::new(unpack_symmetric(tm, self.dim)) {
            Some(_) => Ok(()),
            None => Err("precision matrix θ_M must be positive definite".into()),
        }
    }

    fn check_moment(&self, eta: &[f64]) -> Result<(), String> {
        if eta.iter().any(|v| !v.is_finite()) {
            return Err("coordinates must be finite".into());
        }
        let (_, cov) = self.moment_cov(eta);
        match Cholesky::new(cov) {
            Some(_) => Ok(()),
            None => Err("covariance -2η_M - η_vη_vᵀ must be positive definite".into()),
        }
    }

    fn sufficient_stat(&self, x: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(x);
        let mut out = x.to_vec();
        out.extend(pack_symmetric(&(&v * v.transpose() * -0.5)));
        out
    }

    fn carrier(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn log_normalizer_at(&self, theta: &[f64]) -> f64 {
        let (tv, tm) = self.split(theta);
        let Some(chol) = Cholesky::new(unpack_symmetric(tm, self.dim)) else {
            return f64::INFINITY;
        };
        let tv = DVector::from_column_slice(tv);
        let mu = chol.solve(&tv);
        0.5 * tv.dot(&mu) - 0.5 * log_det(&chol) + 0.5 * self.dim as f64 * (2.0 * PI).ln()
    }

    fn gradient_at(&self, theta: &[f64]) -> Vec<f64> {
        let (tv, tm) = self.split(theta);
        let Some(chol) = Cholesky::new(unpack_symmetric(tm, self.dim)) else {
            return vec![f64::NAN; theta.len()];
        };
        let cov = chol.inverse();
        let mu = &cov * DVector::from_column_slice(tv);
        let em = (&mu * mu.transpose() + cov) * -0.5;
        let mut out: Vec<f64> = mu.iter().copied().collect();
        out.extend(pack_symmetric(&em));
        out
    }

    fn gradient_inverse_at(&self, eta: &[f64]) -> Vec<f64> {
        let (mu, cov) = self.moment_cov(eta);
        let Some(chol) = Cholesky::new(cov) else {
            return vec![f64::NAN; eta.len()];
        };
        let prec = chol.inverse();
        let tv = &prec * mu;
        let mut out: Vec<f64> = tv.iter().copied().collect();
        out.extend(pack_symmetric(&prec));
        out
    }

    /// F*(η) = -½ log|Σ| - (d/2) log(2πe); +∞ when Σ is singular.
    fn conjugate_at(&self, eta: &[f64]) -> f64 {
        let (_, cov) = self.moment_cov(eta);
        match Cholesky::new(cov) {
            Some(chol) => {
                -0.5 * log_det(&chol) - 0.5 * self.dim as f64 * ((2.0 * PI).ln() + 1.0)
            }
            None => f64::INFINITY,
        }
    }

    fn natural_start(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        out.extend(pack_symmetric(&DMatrix::identity(self.dim, self.dim)));
        out
    }

    /// Adds ε·I to the implied covariance, ε = ridge · max(trace/d, 1).
    fn regularize_moment(&self, eta: &mut [f64], ridge: f64) -> bool {
        let (mu, cov) = self.moment_cov(eta);
        let cov = (&cov + cov.transpose()) * 0.5;
        let scale = (cov.trace() / self.dim as f64).max(1.0);
        let eps = ridge * scale;
        // Negative eigen-directions from rounding are lifted too.
        let min_eig = cov.clone().symmetric_eigenvalues().min();
        let shift = eps + if min_eig < 0.0 { -min_eig } else { 0.0 };
        let cov = cov + DMatrix::identity(self.dim, self.dim) * shift;
        let em = (&mu * mu.transpose() + cov) * -0.5;
        eta[self.dim..].copy_from_slice(&pack_symmetric(&em));
        true
    }

    /// (x, -½(Σ̂ + xxᵀ)) with Σ̂ the covariance implied by `global`.
    fn promote_statistic(&self, y: &[f64], global: &[f64]) -> Vec<f64> {
        let (_, cov) = self.moment_cov(global);
        let x = DVector::from_column_slice(&y[..self.dim]);
        let em = (&x * x.transpose() + cov) * -0.5;
        let mut out = y[..self.dim].to_vec();
        out.extend(pack_symmetric(&em));
        out
    }

    /// Box-Muller normal variates mapped through the Cholesky factor of Σ.
    fn draw(&self, theta: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let eta = self.gradient_at(theta);
        let (mu, cov) = self.moment_cov(&eta);
        let chol = Cholesky::new(cov).expect("validated natural parameter");
        let mut z = DVector::zeros(self.dim);
        let mut i = 0;
        while i < self.dim {
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random::<f64>();
            let r = (-2.0 * u1.ln()).sqrt();
            z[i] = r * (2.0 * PI * u2).cos();
            if i + 1 < self.dim {
                z[i + 1] = r * (2.0 * PI * u2).sin();
            }
            i += 2;
        }
        let x = mu + chol.l() * z;
        x.iter().copied().collect()
    }
}
