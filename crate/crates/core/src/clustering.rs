//! Additively weighted Bregman k-means on sufficient statistics.
//!
//! Two heuristics are provided: batched Lloyd iterations (assign every point,
//! then recenter every cluster) and Hartigan single-point moves. Both keep
//! the per-cluster masses fixed and never increase the loss
//!
//! ```text
//! (1/n) Σ_i min_j (B_F(y_i : c_j) + m_j).
//! ```
//!
//! Losses are tracked without the point-only term (1/n) Σ F(y_i), which is
//! constant during a run and may diverge (Gaussian statistics of a single
//! observation sit on the boundary of the moment space).

use rayon::prelude::*;

use crate::bregman::{CenterScorer, Generator, WeightedCenterSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Heuristic {
    #[default]
    Lloyd,
    Hartigan,
    LloydThenHartigan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyClusterPolicy {
    /// Deactivate the cluster (mass +∞); the model may end with fewer than k
    /// components.
    #[default]
    Drop,
    /// Move the center onto the point with the largest divergence to its
    /// own center.
    ReseedFarthest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_iters: usize,
    /// Relative loss change below which a run is considered converged.
    pub loss_tol: f64,
    pub heuristic: Heuristic,
    pub empty_cluster_policy: EmptyClusterPolicy,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            loss_tol: 1e-10,
            heuristic: Heuristic::Lloyd,
            empty_cluster_policy: EmptyClusterPolicy::Drop,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.loss_tol > 0.0) {
            return Err(Error::InvalidArgument("loss_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Hard labels z_i and cluster sizes |C_j|.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl Assignment {
    pub fn from_labels(labels: Vec<usize>, k: usize) -> Result<Self> {
        let mut sizes = vec![0; k];
        for &z in &labels {
            if z >= k {
                return Err(Error::InvalidArgument(format!("label {z} out of range for k = {k}")));
            }
            sizes[z] += 1;
        }
        Ok(Self { labels, sizes })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Proportions α_j = |C_j| / n.
    pub fn proportions(&self) -> Vec<f64> {
        let n = self.labels.len() as f64;
        self.sizes.iter().map(|&s| s as f64 / n).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Assignment or centers unchanged, or relative loss change below tolerance.
    Converged,
    MaxIterations,
}

/// Result of a k-means run.
#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub centers: WeightedCenterSet,
    pub assignment: Assignment,
    /// Per-iteration loss without the point-only term (1/n) Σ F(y_i).
    pub reduced_trace: Vec<f64>,
    /// (1/n) Σ F(y_i); `+∞` when F diverges on the statistics.
    pub data_term: f64,
    pub iterations: usize,
    pub termination: Termination,
}

impl ClusterOutcome {
    /// Full k-means loss per iteration.
    pub fn loss_trace(&self) -> Vec<f64> {
        self.reduced_trace.iter().map(|l| l + self.data_term).collect()
    }

    pub fn final_loss(&self) -> f64 {
        self.reduced_trace.last().copied().unwrap_or(f64::NAN) + self.data_term
    }
}

/// (1/n) Σ F(y_i).
pub fn data_term<G: Generator + ?Sized>(g: &G, ys: &[Vec<f64>]) -> f64 {
    let total: f64 = ys.iter().map(|y| g.value(y)).sum();
    total / ys.len() as f64
}

fn assign_with(scorer: &CenterScorer, ys: &[Vec<f64>]) -> Assignment {
    let labels: Vec<usize> = ys.par_iter().map(|y| scorer.best(y).0).collect();
    let k = scorer.len();
    let mut sizes = vec![0; k];
    for &z in &labels {
        sizes[z] += 1;
    }
    Assignment { labels, sizes }
}

/// z_i = argmin_j B_F(y_i : c_j) + m_j, ties to the lowest index.
pub fn assign<G: Generator + ?Sized>(
    g: &G,
    ys: &[Vec<f64>],
    cs: &WeightedCenterSet,
) -> Result<Assignment> {
    let scorer = CenterScorer::new(g, cs)?;
    Ok(assign_with(&scorer, ys))
}

/// Mean reduced score of the labeled points.
fn reduced_loss(scorer: &CenterScorer, ys: &[Vec<f64>], a: &Assignment) -> f64 {
    let total: f64 = ys
        .iter()
        .zip(a.labels())
        .map(|(y, &z)| scorer.score(y, z))
        .sum();
    total / ys.len() as f64
}

fn admit_center<G: Generator + ?Sized>(g: &G, mut c: Vec<f64>, j: usize) -> Result<Vec<f64>> {
    if g.in_domain(&c) {
        return Ok(c);
    }
    if g.regularize(&mut c) {
        return Ok(c);
    }
    Err(Error::degenerate(
        format!("cluster {j}"),
        format!("center {c:?} outside the generator domain"),
    ))
}

fn cluster_means(ys: &[Vec<f64>], a: &Assignment) -> Vec<Option<Vec<f64>>> {
    let dim = ys.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; a.k()];
    for (y, &z) in ys.iter().zip(a.labels()) {
        for (s, v) in sums[z].iter_mut().zip(y) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(a.sizes())
        .map(|(mut s, &n)| {
            if n == 0 {
                None
            } else {
                s.iter_mut().for_each(|v| *v /= n as f64);
                Some(s)
            }
        })
        .collect()
}

/// Moves every non-empty cluster center to the mean statistic of its
/// points. Empty clusters follow `policy`; masses are kept.
pub fn update_centers<G: Generator + ?Sized>(
    g: &G,
    ys: &[Vec<f64>],
    a: &Assignment,
    cs: &WeightedCenterSet,
    policy: EmptyClusterPolicy,
) -> Result<WeightedCenterSet> {
    if a.len() != ys.len() || a.k() != cs.len() {
        return Err(Error::InvalidArgument("assignment inconsistent with data or centers".into()));
    }
    let mut out = cs.clone();
    let means = cluster_means(ys, a);
    let mut empties = Vec::new();
    for (j, mean) in means.into_iter().enumerate() {
        match mean {
            Some(m) => out.set_center(j, admit_center(g, m, j)?),
            None if cs.is_active(j) => empties.push(j),
            None => {}
        }
    }
    if empties.is_empty() {
        return Ok(out);
    }
    match policy {
        EmptyClusterPolicy::Drop => {
            for j in empties {
                out.deactivate(j);
            }
        }
        EmptyClusterPolicy::ReseedFarthest => {
            let scorer = CenterScorer::new(g, &out)?;
            let mut far: Vec<(f64, usize)> = ys
                .iter()
                .zip(a.labels())
                .enumerate()
                .map(|(i, (y, &z))| {
                    let fy = g.value(y);
                    let base = scorer.score(y, z) - out.mass(z);
                    (if fy.is_finite() { base + fy } else { base }, i)
                })
                .collect();
            // Largest divergence first, lowest index among equals.
            far.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for (j, (_, i)) in empties.into_iter().zip(far) {
                out.set_center(j, admit_center(g, ys[i].clone(), j)?);
            }
        }
    }
    Ok(out)
}

fn converged(prev: f64, cur: f64, tol: f64) -> bool {
    (prev - cur).abs() <= tol * cur.abs().max(f64::MIN_POSITIVE)
}

/// Called after every Lloyd iteration or Hartigan sweep with the current
/// centers, labels and reduced loss.
pub type Observer<'a> = dyn FnMut(&WeightedCenterSet, &[usize], f64) + 'a;

/// Batched Lloyd iterations from the centers `cs0`.
pub fn lloyd<G: Generator + ?Sized>(
    g: &G,
    ys: &[Vec<f64>],
    cs0: &WeightedCenterSet,
    cfg: &KMeansConfig,
) -> Result<ClusterOutcome> {
    lloyd_observed(g, ys, cs0, cfg, &mut |_, _, _| {})
}

pub fn lloyd_observed<G: Generator + ?Sized>(
    g: &G,
    ys: &[Vec<f64>],
    cs0: &WeightedCenterSet,
    cfg: &KMeansConfig,
    observer: &mut Observer<'_>,
) -> Result<ClusterOutcome> {
    cfg.validate()?;
    if ys.is_empty() {
        return Err(Error::InvalidArgument("no points to cluster".into()));
    }
    let dterm = data_term(g, ys);
    let offset = if dterm.is_finite() { dterm } else { 0.0 };
    let mut cs = cs0.clone();
    let mut scorer = CenterScorer::new(g, &cs)?;
    let mut prev_labels: Option<Vec<usize>> = None;
    let mut trace: Vec<f64> = Vec::new();
    let mut termination = Termination::MaxIterations;
    let mut assignment = None;
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        iterations += 1;
        let a = assign_with(&scorer, ys);
        let next = update_centers(g, ys, &a, &cs, cfg.empty_cluster_policy)?;
        let next_scorer = CenterScorer::new(g, &next)?;
        let loss = reduced_loss(&next_scorer, ys, &a);
        let stable = next == cs || prev_labels.as_deref() == Some(a.labels());
        let small = trace
            .last()
            .is_some_and(|&p| converged(p + offset, loss + offset, cfg.loss_tol));
        trace.push(loss);
        observer(&next, a.labels(), loss);
        prev_labels = Some(a.labels().to_vec());
        cs = next;
        scorer = next_scorer;
        assignment = Some(a);
        if stable || small {
            termination = Termination::Converged;
            break;
        }
    }

    Ok(ClusterOutcome {
        centers: cs,
        assignment: assignment.expect("at least one iteration"),
        reduced_trace: trace,
        data_term: dterm,
        iterations,
        termination,
    })
}

struct HartiganState<'a, G: ?Sized> {
    g: &'a G,
    sums: Vec<Vec<f64>>,
    counts: Vec<usize>,
    masses: Vec<f64>,
}

impl<G: Generator + ?Sized> HartiganState<'_, G> {
    /// Reduced cluster cost |C| (m - F(c̄)); `None` when the mean leaves the domain.
    fn cost(&self, sum: &[f64], count: usize, mass: f64) -> Option<f64> {
        if count == 0 {
            return Some(0.0);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        if !self.g.in_domain(&mean) {
            return None;
        }
        Some(count as f64 * (mass - self.g.value(&mean)))
    }

    fn centers(&self, base: &WeightedCenterSet) -> WeightedCenterSet {
        let mut cs = base.clone();
        for j in 0..self.sums.len() {
            if self.counts[j] > 0 {
                cs.set_center(j, self.sums[j].iter().map(|s| s / self.counts[j] as f64).collect());
            }
        }
        cs
    }

    fn total(&self, n: usize) -> f64 {
        let t: f64 = (0..self.sums.len())
            .filter(|&j| self.counts[j] > 0)
            .map(|j| self.cost(&self.sums[j], self.counts[j], self.masses[j]).unwrap_or(f64::INFINITY))
            .sum();
        t / n as f64
    }
}

/// Hartigan single-point moves: points are scanned in input order and each
/// is moved to the first cluster (lowest index) whose move strictly lowers
/// the loss. A sweep with no move ends the run.
pub fn hartigan<G: Generator + ?Sized>(
    g: &G,
    ys: &[Vec<f64>],
    cs0: &WeightedCenterSet,
    cfg: &KMeansConfig,
) -> Result<ClusterOutcome> {
    hartigan_observed(g, ys, cs0, cfg, &mut |_, _, _| {})
}

pub fn hartigan_observed<G: Generator + ?Sized>(
    g: &G,
    ys: &[Vec<f64>],
    cs0: &WeightedCenterSet,
    cfg: &KMeansConfig,
    observer: &mut Observer<'_>,
) -> Result<ClusterOutcome> {
    cfg.validate()?;
    if ys.is_empty() {
        return Err(Error::InvalidArgument("no points to cluster".into()));
    }
    let n = ys.len();
    let k = cs0.len();
    let dim = ys[0].len();
    let dterm = data_term(g, ys);

    let a0 = assign(g, ys, cs0)?;
    let mut cs = update_centers(g, ys, &a0, cs0, cfg.empty_cluster_policy)?;
    let mut labels = a0.labels().to_vec();

    let mut st = HartiganState {
        g,
        sums: vec![vec![0.0; dim]; k],
        counts: vec![0; k],
        masses: cs.masses().to_vec(),
    };
    for (y, &z) in ys.iter().zip(&labels) {
        st.counts[z] += 1;
        for (s, v) in st.sums[z].iter_mut().zip(y) {
            *s += v;
        }
    }
    let mut trace = vec![st.total(n)];
    observer(&st.centers(&cs), &labels, trace[0]);
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    let mut scratch_a = vec![0.0; dim];
    let mut scratch_b = vec![0.0; dim];

    for _ in 0..cfg.max_iters {
        iterations += 1;
        let mut moved = false;
        for (i, y) in ys.iter().enumerate() {
            let a = labels[i];
            if st.counts[a] == 1 && cfg.empty_cluster_policy == EmptyClusterPolicy::ReseedFarthest {
                continue;
            }
            let Some(cost_a) = st.cost(&st.sums[a], st.counts[a], st.masses[a]) else {
                continue;
            };
            for (s, (sa, v)) in scratch_a.iter_mut().zip(st.sums[a].iter().zip(y)) {
                *s = sa - v;
            }
            let Some(cost_a_out) = st.cost(&scratch_a, st.counts[a] - 1, st.masses[a]) else {
                continue;
            };
            for b in 0..k {
                if b == a || !st.masses[b].is_finite() || st.counts[b] == 0 && !cs.is_active(b) {
                    continue;
                }
                let Some(cost_b) = st.cost(&st.sums[b], st.counts[b], st.masses[b]) else {
                    continue;
                };
                for (s, (sb, v)) in scratch_b.iter_mut().zip(st.sums[b].iter().zip(y)) {
                    *s = sb + v;
                }
                let Some(cost_b_in) = st.cost(&scratch_b, st.counts[b] + 1, st.masses[b]) else {
                    continue;
                };
                let delta = cost_a_out + cost_b_in - cost_a - cost_b;
                let slack = 1e-12 * (1.0 + cost_a.abs() + cost_b.abs());
                if delta < -slack {
                    st.sums[a].copy_from_slice(&scratch_a);
                    st.counts[a] -= 1;
                    st.sums[b].copy_from_slice(&scratch_b);
                    st.counts[b] += 1;
                    labels[i] = b;
                    if st.counts[a] == 0 {
                        st.masses[a] = f64::INFINITY;
                        cs.deactivate(a);
                    }
                    moved = true;
                    break;
                }
            }
        }
        let loss = st.total(n);
        trace.push(loss);
        observer(&st.centers(&cs), &labels, loss);
        if !moved {
            termination = Termination::Converged;
            break;
        }
    }

    let cs = st.centers(&cs);
    let assignment = Assignment::from_labels(labels, k)?;
    Ok(ClusterOutcome {
        centers: cs,
        assignment,
        reduced_trace: trace,
        data_term: dterm,
        iterations,
        termination,
    })
}

/// Runs the heuristic selected in `cfg`.
pub fn kmeans<G: Generator + ?Sized>(
    g: &G,
    ys: &[Vec<f64>],
    cs0: &WeightedCenterSet,
    cfg: &KMeansConfig,
) -> Result<ClusterOutcome> {
    kmeans_observed(g, ys, cs0, cfg, &mut |_, _, _| {})
}

pub fn kmeans_observed<G: Generator + ?Sized>(
    g: &G,
    ys: &[Vec<f64>],
    cs0: &WeightedCenterSet,
    cfg: &KMeansConfig,
    observer: &mut Observer<'_>,
) -> Result<ClusterOutcome> {
    match cfg.heuristic {
        Heuristic::Lloyd => lloyd_observed(g, ys, cs0, cfg, observer),
        Heuristic::Hartigan => hartigan_observed(g, ys, cs0, cfg, observer),
        Heuristic::LloydThenHartigan => {
            let first = lloyd_observed(g, ys, cs0, cfg, observer)?;
            let mut second = hartigan_observed(g, ys, &first.centers, cfg, observer)?;
            let mut trace = first.reduced_trace;
            trace.extend(second.reduced_trace);
            second.reduced_trace = trace;
            second.iterations += first.iterations;
            Ok(second)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bregman::{kmeans_loss, weighted_bregman, SquaredEuclidean};

    fn pts(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|x| vec![*x]).collect()
    }

    #[test]
    fn point_on_center_takes_that_label() {
        let cs = WeightedCenterSet::uniform(pts(&[0.0, 5.0, 9.0]));
        let a = assign(&SquaredEuclidean, &pts(&[9.0]), &cs).unwrap();
        assert_eq!(a.labels(), &[2]);
    }

    #[test]
    fn exact_tie_goes_to_lowest_index() {
        let cs = WeightedCenterSet::uniform(pts(&[-1.0, 1.0]));
        let a = assign(&SquaredEuclidean, &pts(&[0.0]), &cs).unwrap();
        assert_eq!(a.labels(), &[0]);
    }

    #[test]
    fn unequal_weights_shift_the_boundary() {
        let g = SquaredEuclidean;
        let cs = WeightedCenterSet::with_weights(pts(&[0.0, 1.0]), &[0.9, 0.1]).unwrap();
        // 100-point grid, offset so no point lands on the boundary exactly.
        let grid: Vec<Vec<f64>> = (0..100).map(|i| vec![-0.5 + (i as f64 + 0.5) / 50.0]).collect();
        let a = assign(&g, &grid, &cs).unwrap();
        for (y, &z) in grid.iter().zip(a.labels()) {
            let d0 = weighted_bregman(&g, &cs, 0, y).unwrap();
            let d1 = weighted_bregman(&g, &cs, 1, y).unwrap();
            assert_eq!(z, if d1 < d0 { 1 } else { 0 });
        }
        // Equal weights would split at 0.5; the heavy center claims more.
        let boundary = 0.5 + (0.9f64 / 0.1).ln() / 2.0;
        for (y, &z) in grid.iter().zip(a.labels()) {
            assert_eq!(z == 0, y[0] < boundary);
        }
        assert!(grid.iter().zip(a.labels()).any(|(y, &z)| y[0] > 0.5 && z == 0));
    }

    #[test]
    fn update_examples() {
        let g = SquaredEuclidean;
        let ys = pts(&[1.0, 3.0, 7.0]);
        let cs = WeightedCenterSet::massless(pts(&[0.0, 10.0, 50.0]));
        let a = Assignment::from_labels(vec![0, 0, 1], 3).unwrap();
        let out = update_centers(&g, &ys, &a, &cs, EmptyClusterPolicy::Drop).unwrap();
        assert_eq!(out.center(0), &[2.0]);
        assert_eq!(out.center(1), &[7.0]);
        assert!(!out.is_active(2));
        assert_eq!(out.mass(2), f64::INFINITY);

        let ys = pts(&[1.0, 3.0, 8.0]);
        let a = Assignment::from_labels(vec![0, 0, 0], 3).unwrap();
        let out = update_centers(&g, &ys, &a, &cs, EmptyClusterPolicy::ReseedFarthest).unwrap();
        // Divergences to the updated center 4: 9, 1, 16.
        assert_eq!(out.center(0), &[4.0]);
        assert_eq!(out.center(1), &[8.0]);
        assert_eq!(out.center(2), &[1.0]);
    }

    #[test]
    fn already_clustered_converges_in_one_iteration() {
        let g = SquaredEuclidean;
        let ys = pts(&[1.0, 1.0, 8.0, 8.0]);
        let cs = WeightedCenterSet::uniform(pts(&[1.0, 8.0]));
        let out = lloyd(&g, &ys, &cs, &KMeansConfig::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.termination, Termination::Converged);
        assert!((out.final_loss() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn hartigan_escapes_lloyd_fixed_point() {
        let g = SquaredEuclidean;
        let ys = pts(&[1.0, 3.0, 6.0, 7.0, 11.0]);
        let cs = WeightedCenterSet::massless(pts(&[4.25, 11.0]));
        let cfg = KMeansConfig::default();
        let l = lloyd(&g, &ys, &cs, &cfg).unwrap();
        assert_eq!(l.assignment.labels(), &[0, 0, 0, 0, 1]);
        assert!((l.final_loss() - 22.75 / 5.0).abs() < 1e-12);
        let h = hartigan(&g, &ys, &l.centers, &cfg).unwrap();
        assert!(h.final_loss() < l.final_loss() - 1e-9);
        let direct = kmeans_loss(&g, &ys, &h.centers).unwrap();
        assert!((direct - h.final_loss()).abs() < 1e-12);
    }

    #[test]
    fn hartigan_keeps_stable_state() {
        let g = SquaredEuclidean;
        let ys = pts(&[0.0, 1.0, 10.0, 11.0]);
        let cs = WeightedCenterSet::massless(pts(&[0.5, 10.5]));
        let h = hartigan(&g, &ys, &cs, &KMeansConfig::default()).unwrap();
        assert_eq!(h.centers, cs);
        assert_eq!(h.assignment.labels(), &[0, 0, 1, 1]);
        assert_eq!(h.iterations, 1);
    }

    #[test]
    fn hartigan_singleton_follows_policy() {
        let g = SquaredEuclidean;
        let ys = pts(&[0.0, 0.2, 0.4]);
        // Starts as {0, 0.2} | {0.4}; merging costs 0.06 in SSE but saves
        // the 0.1 mass of the singleton.
        let cs = WeightedCenterSet::new(pts(&[0.0, 0.4]), vec![0.0, 0.1]).unwrap();
        assert_eq!(assign(&g, &ys, &cs).unwrap().sizes(), &[2, 1]);

        let mut cfg = KMeansConfig::default();
        let dropped = hartigan(&g, &ys, &cs, &cfg).unwrap();
        assert_eq!(dropped.assignment.sizes(), &[3, 0]);
        assert!(!dropped.centers.is_active(1));

        cfg.empty_cluster_policy = EmptyClusterPolicy::ReseedFarthest;
        let kept = hartigan(&g, &ys, &cs, &cfg).unwrap();
        assert_eq!(kept.assignment.sizes(), &[2, 1]);
        assert!(kept.centers.is_active(1));
    }
}
