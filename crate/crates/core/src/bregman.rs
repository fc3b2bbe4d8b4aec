//! Bregman divergences, additively weighted divergences, Jensen diversity
//! and the k-means loss.

use crate::error::{Error, Result};
use crate::exp_family::{dot, ExpFamily, Moment, Natural};

/// A strictly convex, differentiable generator F.
pub trait Generator: Sync {
    fn value(&self, p: &[f64]) -> f64;
    fn gradient(&self, p: &[f64]) -> Vec<f64>;

    /// Interior of the domain; gradients are only evaluated there.
    fn in_domain(&self, p: &[f64]) -> bool;

    /// F″ for one-dimensional generators.
    fn second_derivative_1d(&self, _p: f64) -> Option<f64> {
        None
    }

    /// Pulls a boundary point into the interior. Returns false when the
    /// generator does not support it.
    fn regularize(&self, _p: &mut [f64]) -> bool {
        false
    }
}

/// F(x) = <x, x>, inducing the squared Euclidean distance.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredEuclidean;

impl Generator for SquaredEuclidean {
    fn value(&self, p: &[f64]) -> f64 {
        dot(p, p)
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        p.iter().map(|v| 2.0 * v).collect()
    }

    fn in_domain(&self, p: &[f64]) -> bool {
        p.iter().all(|v| v.is_finite())
    }

    fn second_derivative_1d(&self, _p: f64) -> Option<f64> {
        Some(2.0)
    }
}

/// The log-normalizer F of a family, acting on natural coordinates.
#[derive(Debug, Clone, Copy)]
pub struct LogNormalizer<'a, F: ?Sized>(pub &'a F);

impl<F: ExpFamily + ?Sized> Generator for LogNormalizer<'_, F> {
    fn value(&self, p: &[f64]) -> f64 {
        self.0.log_normalizer_at(p)
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        self.0.gradient_at(p)
    }

    fn in_domain(&self, p: &[f64]) -> bool {
        self.0.check_natural(p).is_ok()
    }

    fn second_derivative_1d(&self, p: f64) -> Option<f64> {
        self.0.log_normalizer_second_derivative(p)
    }
}

/// The convex conjugate F* of a family, acting on moment coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Conjugate<'a, F: ?Sized> {
    pub family: &'a F,
    /// Relative ridge used by [`Generator::regularize`]; `None` disables it.
    pub ridge: Option<f64>,
}

impl<'a, F: ExpFamily + ?Sized> Conjugate<'a, F> {
    pub fn new(family: &'a F) -> Self {
        Self { family, ridge: None }
    }

    pub fn with_ridge(family: &'a F, ridge: Option<f64>) -> Self {
        Self { family, ridge }
    }
}

impl<F: ExpFamily + ?Sized> Generator for Conjugate<'_, F> {
    fn value(&self, p: &[f64]) -> f64 {
        self.family.conjugate_at(p)
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        self.family.gradient_inverse_at(p)
    }

    fn in_domain(&self, p: &[f64]) -> bool {
        self.family.check_moment(p).is_ok()
    }

    fn second_derivative_1d(&self, p: f64) -> Option<f64> {
        self.family.conjugate_second_derivative(p)
    }

    fn regularize(&self, p: &mut [f64]) -> bool {
        match self.ridge {
            Some(r) => self.family.regularize_moment(p, r) && self.in_domain(p),
            None => false,
        }
    }
}

/// B_F(p : q) = F(p) - F(q) - <p - q, ∇F(q)>.
///
/// `q` must lie in the interior of the domain; `p` may sit on the boundary
/// as long as F(p) is finite.
pub fn bregman<G: Generator + ?Sized>(g: &G, p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension {
            expected: q.len(),
            got: p.len(),
        });
    }
    if !g.in_domain(q) {
        return Err(Error::InvalidArgument(format!(
            "right argument {q:?} outside generator domain"
        )));
    }
    let fp = g.value(p);
    if !fp.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "generator diverges at left argument {p:?}"
        )));
    }
    if p == q {
        return Ok(0.0);
    }
    let grad = g.gradient(q);
    let lin: f64 = p.iter().zip(q).zip(&grad).map(|((a, b), d)| (a - b) * d).sum();
    Ok((fp - g.value(q) - lin).max(0.0))
}

/// B_F(θ₁ : θ₂) on natural parameters.
pub fn bregman_natural<F: ExpFamily + ?Sized>(fam: &F, p: &Natural, q: &Natural) -> Result<f64> {
    crate::exp_family::validate_natural(fam, p)?;
    crate::exp_family::validate_natural(fam, q)?;
    bregman(&LogNormalizer(fam), p.as_slice(), q.as_slice())
}

/// B_{F*}(η₁ : η₂) on moment parameters.
pub fn bregman_moment<F: ExpFamily + ?Sized>(fam: &F, p: &Moment, q: &Moment) -> Result<f64> {
    crate::exp_family::validate_moment(fam, q)?;
    bregman(&Conjugate::new(fam), p.as_slice(), q.as_slice())
}

/// KL(p₁ : p₂) = B_F(θ₂ : θ₁).
pub fn kl_divergence<F: ExpFamily + ?Sized>(fam: &F, p1: &Natural, p2: &Natural) -> Result<f64> {
    bregman_natural(fam, p2, p1)
}

/// Centers with additive masses m_j = -log w_j. A center is active exactly
/// when its mass is finite; zero-weight centers carry `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCenterSet {
    centers: Vec<Vec<f64>>,
    masses: Vec<f64>,
}

impl WeightedCenterSet {
    pub fn new(centers: Vec<Vec<f64>>, masses: Vec<f64>) -> Result<Self> {
        if centers.len() != masses.len() {
            return Err(Error::Dimension {
                expected: centers.len(),
                got: masses.len(),
            });
        }
        if let Some(m) = masses.iter().find(|m| m.is_nan() || **m == f64::NEG_INFINITY) {
            return Err(Error::InvalidArgument(format!("invalid mass {m}")));
        }
        Ok(Self { centers, masses })
    }

    /// Masses from mixture weights, m_j = -log w_j.
    pub fn with_weights(centers: Vec<Vec<f64>>, weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidArgument("weights must lie in [0, 1]".into()));
        }
        let masses = weights.iter().map(|w| -w.ln()).collect();
        Self::new(centers, masses)
    }

    /// Uniform weights 1/k.
    pub fn uniform(centers: Vec<Vec<f64>>) -> Self {
        let k = centers.len();
        let m = (k as f64).ln();
        Self {
            centers,
            masses: vec![m; k],
        }
    }

    /// All masses zero: plain Bregman k-means.
    pub fn massless(centers: Vec<Vec<f64>>) -> Self {
        let k = centers.len();
        Self {
            centers,
            masses: vec![0.0; k],
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn center(&self, j: usize) -> &[f64] {
        &self.centers[j]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, j: usize) -> f64 {
        self.masses[j]
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.masses[j].is_finite()
    }

    pub fn active_count(&self) -> usize {
        self.masses.iter().filter(|m| m.is_finite()).count()
    }

    /// Weights w_j = exp(-m_j).
    pub fn weights(&self) -> Vec<f64> {
        self.masses.iter().map(|m| (-m).exp()).collect()
    }

    pub fn set_center(&mut self, j: usize, c: Vec<f64>) {
        self.centers[j] = c;
    }

    pub fn set_mass(&mut self, j: usize, m: f64) {
        self.masses[j] = m;
    }

    pub fn deactivate(&mut self, j: usize) {
        self.masses[j] = f64::INFINITY;
    }

    pub fn set_weights(&mut self, weights: &[f64]) {
        for (m, w) in self.masses.iter_mut().zip(weights) {
            *m = -w.ln();
        }
    }
}

/// B_F(y : c_j) + m_j.
pub fn weighted_bregman<G: Generator + ?Sized>(
    g: &G,
    cs: &WeightedCenterSet,
    j: usize,
    y: &[f64],
) -> Result<f64> {
    if j >= cs.len() {
        return Err(Error::InvalidArgument(format!("center index {j} out of range")));
    }
    if !cs.is_active(j) {
        return Err(Error::InactiveCenter(j));
    }
    Ok(bregman(g, y, cs.center(j))? + cs.mass(j))
}

fn check_simplex(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: weights.len(),
        });
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "weights must be non-negative and sum to 1 (sum = {sum})"
        )));
    }
    Ok(())
}

/// Weighted arithmetic mean Σ w_i p_i: the right-sided Bregman centroid of
/// any generator.
pub fn right_centroid(points: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("centroid of an empty set".into()));
    }
    check_simplex(weights, points.len())?;
    let mut c = vec![0.0; points[0].len()];
    for (p, w) in points.iter().zip(weights) {
        for (ci, pi) in c.iter_mut().zip(p) {
            *ci += w * pi;
        }
    }
    Ok(c)
}

/// Jensen diversity Σ w_i F(p_i) - F(Σ w_i p_i) ≥ 0.
pub fn jensen_diversity<G: Generator + ?Sized>(
    g: &G,
    points: &[Vec<f64>],
    weights: &[f64],
) -> Result<f64> {
    let mean = right_centroid(points, weights)?;
    let avg: f64 = points.iter().zip(weights).map(|(p, w)| w * g.value(p)).sum();
    Ok(avg - g.value(&mean))
}

/// Bregman information: Jensen diversity under uniform weights.
pub fn bregman_information<G: Generator + ?Sized>(g: &G, points: &[Vec<f64>]) -> Result<f64> {
    let n = points.len();
    jensen_diversity(g, points, &vec![1.0 / n as f64; n])
}

/// Per-center linear forms for fast assignment.
///
/// For an interior center c with mass m,
/// `B_F(y : c) + m = F(y) + κ - <y, ∇F(c)>` where `κ = <c, ∇F(c)> - F(c) + m`.
/// The `F(y)` term does not depend on the center, so argmin and loss
/// differences can be computed without it; this also covers statistics
/// where F(y) diverges.
#[derive(Debug, Clone)]
pub struct CenterScorer {
    grads: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

impl CenterScorer {
    pub fn new<G: Generator + ?Sized>(g: &G, cs: &WeightedCenterSet) -> Result<Self> {
        let mut grads = Vec::with_capacity(cs.len());
        let mut offsets = Vec::with_capacity(cs.len());
        for j in 0..cs.len() {
            if !cs.is_active(j) {
                grads.push(Vec::new());
                offsets.push(f64::INFINITY);
                continue;
            }
            let c = cs.center(j);
            if !g.in_domain(c) {
                return Err(Error::degenerate(
                    format!("cluster {j}"),
                    format!("center {c:?} outside generator domain"),
                ));
            }
            let grad = g.gradient(c);
            offsets.push(dot(c, &grad) - g.value(c) + cs.mass(j));
            grads.push(grad);
        }
        if offsets.iter().all(|o| o.is_infinite()) {
            return Err(Error::NoActiveCenters);
        }
        Ok(Self { grads, offsets })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// `B_F(y : c_j) + m_j - F(y)`; `+∞` for inactive centers.
    pub fn score(&self, y: &[f64], j: usize) -> f64 {
        let off = self.offsets[j];
        if off.is_infinite() {
            return f64::INFINITY;
        }
        off - dot(y, &self.grads[j])
    }

    /// Lowest-scoring active center, ties to the lowest index.
    pub fn best(&self, y: &[f64]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for j in 0..self.offsets.len() {
            let s = self.score(y, j);
            if s < best.1 {
                best = (j, s);
            }
        }
        best
    }
}

/// (1/n) Σ_i min_j (B_F(y_i : c_j) + m_j).
pub fn kmeans_loss<G: Generator + ?Sized>(
    g: &G,
    ys: &[Vec<f64>],
    cs: &WeightedCenterSet,
) -> Result<f64> {
    if ys.is_empty() {
        return Err(Error::InvalidArgument("k-means loss of an empty set".into()));
    }
    if cs.active_count() == 0 {
        return Err(Error::NoActiveCenters);
    }
    let mut total = 0.0;
    for y in ys {
        let mut best = f64::INFINITY;
        for j in 0..cs.len() {
            if cs.is_active(j) {
                best = best.min(weighted_bregman(g, cs, j, y)?);
            }
        }
        total += best;
    }
    Ok(total / ys.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{itakura_saito, Rayleigh};

    struct Square;
    impl Generator for Square {
        fn value(&self, p: &[f64]) -> f64 {
            p[0] * p[0]
        }
        fn gradient(&self, p: &[f64]) -> Vec<f64> {
            vec![2.0 * p[0]]
        }
        fn in_domain(&self, _p: &[f64]) -> bool {
            true
        }
    }

    #[test]
    fn divergence_examples() {
        let g = SquaredEuclidean;
        assert_eq!(bregman(&g, &[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(bregman(&g, &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);
        let r = Rayleigh;
        let is = bregman(&Conjugate::new(&r), &[2.0], &[1.0]).unwrap();
        assert!((is - itakura_saito(2.0, 1.0)).abs() < 1e-15);
        assert!((is - 0.30685).abs() < 1e-5);
    }

    #[test]
    fn weighted_examples() {
        let g = SquaredEuclidean;
        let cs = WeightedCenterSet::massless(vec![vec![0.0]]);
        assert_eq!(weighted_bregman(&g, &cs, 0, &[1.0]).unwrap(), 1.0);
        let cs = WeightedCenterSet::with_weights(vec![vec![0.0]], &[0.5]).unwrap();
        let v = weighted_bregman(&g, &cs, 0, &[1.0]).unwrap();
        assert!((v - (1.0 + 2f64.ln())).abs() < 1e-15);
        let cs = WeightedCenterSet::with_weights(vec![vec![3.0]], &[1.0]).unwrap();
        assert_eq!(weighted_bregman(&g, &cs, 0, &[3.0]).unwrap(), 0.0);
    }

    #[test]
    fn inactive_center_is_an_error() {
        let cs = WeightedCenterSet::with_weights(vec![vec![0.0], vec![1.0]], &[1.0, 0.0]).unwrap();
        assert!(!cs.is_active(1));
        assert_eq!(
            weighted_bregman(&SquaredEuclidean, &cs, 1, &[0.0]),
            Err(Error::InactiveCenter(1))
        );
    }

    #[test]
    fn jensen_examples() {
        let pts = vec![vec![0.0], vec![2.0]];
        assert_eq!(jensen_diversity(&Square, &pts, &[0.5, 0.5]).unwrap(), 1.0);
        let same = vec![vec![1.5], vec![1.5], vec![1.5]];
        assert_eq!(bregman_information(&Square, &same).unwrap(), 0.0);
        assert!(jensen_diversity(&Square, &pts, &[0.7, 0.7]).is_err());
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(right_centroid(&[vec![4.0, 1.0]], &[1.0]).unwrap(), vec![4.0, 1.0]);
        assert_eq!(
            right_centroid(&[vec![0.0], vec![2.0]], &[0.5, 0.5]).unwrap(),
            vec![1.0]
        );
        assert!(right_centroid(&[], &[]).is_err());
    }

    #[test]
    fn loss_with_centers_on_data_is_log_k() {
        let ys = vec![vec![0.0], vec![5.0], vec![9.0]];
        let cs = WeightedCenterSet::uniform(ys.clone());
        let l = kmeans_loss(&SquaredEuclidean, &ys, &cs).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn scorer_matches_divergence() {
        let r = Rayleigh;
        let g = Conjugate::new(&r);
        let cs = WeightedCenterSet::with_weights(vec![vec![1.0], vec![3.0]], &[0.25, 0.75]).unwrap();
        let sc = CenterScorer::new(&g, &cs).unwrap();
        for y in [0.3, 1.0, 2.5, 7.0] {
            for j in 0..2 {
                let direct = weighted_bregman(&g, &cs, j, &[y]).unwrap();
                let via = sc.score(&[y], j) + g.value(&[y]);
                assert!((direct - via).abs() < 1e-12);
            }
        }
    }
}
