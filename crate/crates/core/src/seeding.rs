//! Initialization strategies for the mixture learners.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bregman::{bregman, Conjugate, Generator, SquaredEuclidean, WeightedCenterSet};
use crate::error::{Error, Result};
use crate::exp_family::{admit_moment, mean_statistic, ExpFamily, SampleSet};
use crate::learners::MixtureModel;

#[derive(Debug, Clone, PartialEq)]
pub enum SeedMethod {
    /// k-MLE++: Bregman k-means++ on (promoted) statistics, uniform weights.
    KMeansPP,
    /// Location statistics of k sampled points, remaining coordinates from
    /// the global MLE.
    GlobalMleRestricted,
    /// MLE of k groups (order statistics in 1D).
    GroupSplit,
    /// A fixed starting model.
    Explicit(MixtureModel),
    /// MLE of a uniformly random partition.
    ForgyRandom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSpec {
    pub method: SeedMethod,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for SeedSpec {
    fn default() -> Self {
        Self {
            method: SeedMethod::KMeansPP,
            seed: 0,
            restarts: 1,
        }
    }
}

impl SeedSpec {
    pub fn new(method: SeedMethod, seed: u64) -> Self {
        Self {
            method,
            seed,
            restarts: 1,
        }
    }
}

/// p_i = d_i / Σ d.
pub fn selection_probabilities(divergences: &[f64]) -> Vec<f64> {
    let total: f64 = divergences.iter().sum();
    divergences.iter().map(|d| d / total).collect()
}

/// Draws an index with probability proportional to `weights`; `None` when
/// all weights vanish.
pub fn draw_proportional<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, w) in weights.iter().enumerate() {
        if *w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(i);
        if u < acc {
            return Some(i);
        }
    }
    last
}

fn distinct_count(points: &[&Vec<f64>]) -> usize {
    let mut sorted: Vec<&Vec<f64>> = points.to_vec();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    sorted.dedup();
    sorted.len()
}

const DUPLICATE_RETRIES: usize = 64;

/// Indices of k distinct seeds chosen by Bregman k-means++: the first
/// uniformly, each next one with probability proportional to its minimum
/// divergence B_G(y_i : c) to the seeds chosen so far. Points outside the
/// generator domain are never candidates.
pub fn kmeanspp_indices<G: Generator + ?Sized, R: Rng + ?Sized>(
    g: &G,
    ys: &[Vec<f64>],
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > ys.len() {
        return Err(Error::InvalidArgument("k exceeds sample size".into()));
    }
    let candidates: Vec<usize> = (0..ys.len())
        .filter(|&i| g.in_domain(&ys[i]) && g.value(&ys[i]).is_finite())
        .collect();
    let found = distinct_count(&candidates.iter().map(|&i| &ys[i]).collect::<Vec<_>>());
    if found < k {
        return Err(Error::NotEnoughDistinct { needed: k, found });
    }

    let first = candidates[rng.random_range(0..candidates.len())];
    let mut chosen = vec![first];
    let mut mins: Vec<f64> = vec![f64::INFINITY; candidates.len()];
    while chosen.len() < k {
        let c = &ys[*chosen.last().expect("non-empty")];
        let fresh: Vec<f64> = candidates
            .par_iter()
            .map(|&i| bregman(g, &ys[i], c))
            .collect::<Result<_>>()?;
        for (m, d) in mins.iter_mut().zip(fresh) {
            *m = m.min(d);
        }
        let is_new = |i: usize| chosen.iter().all(|&s| ys[s] != ys[i]);
        let mut pick = None;
        for _ in 0..DUPLICATE_RETRIES {
            match draw_proportional(&mins, rng) {
                Some(p) if is_new(candidates[p]) => {
                    pick = Some(candidates[p]);
                    break;
                }
                Some(_) => continue,
                None => break,
            }
        }
        let pick = match pick {
            Some(p) => p,
            None => {
                // Divergences rounded to zero: fall back to a uniform draw
                // among the points not chosen yet.
                let rest: Vec<usize> = candidates.iter().copied().filter(|&i| is_new(i)).collect();
                rest[rng.random_range(0..rest.len())]
            }
        };
        chosen.push(pick);
    }
    Ok(chosen)
}

/// Bregman k-means++ seeding with uniform masses log k.
pub fn kmeanspp_seed<G: Generator + ?Sized>(
    g: &G,
    ys: &[Vec<f64>],
    k: usize,
    seed: u64,
) -> Result<WeightedCenterSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = kmeanspp_indices(g, ys, k, &mut rng)?;
    Ok(WeightedCenterSet::uniform(idx.iter().map(|&i| ys[i].clone()).collect()))
}

fn global_moment<F: ExpFamily + ?Sized>(fam: &F, ys: &[Vec<f64>], ridge: Option<f64>) -> Result<Vec<f64>> {
    admit_moment(fam, mean_statistic(ys), ridge, "global maximum likelihood estimate")
}

fn promoted<F: ExpFamily + ?Sized>(fam: &F, data: &SampleSet, ridge: Option<f64>) -> Result<Vec<Vec<f64>>> {
    let ys = data.statistics(fam);
    let global = global_moment(fam, &ys, ridge)?;
    Ok(ys.iter().map(|y| fam.promote_statistic(y, &global)).collect())
}

fn precheck<F: ExpFamily + ?Sized>(fam: &F, data: &SampleSet, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > data.len() {
        return Err(Error::InvalidArgument("k exceeds sample size".into()));
    }
    data.validate(fam)
}

fn uniform_model<F: ExpFamily + ?Sized>(fam: &F, centers: Vec<Vec<f64>>) -> Result<MixtureModel> {
    let k = centers.len();
    MixtureModel::from_moments(fam, vec![1.0 / k as f64; k], &centers)
}

/// k-MLE++: k-means++ with generator F* on the statistics promoted into
/// the interior of M, then uniform weights.
pub fn kmle_pp<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    k: usize,
    seed: u64,
    ridge: Option<f64>,
) -> Result<MixtureModel> {
    precheck(fam, data, k)?;
    let ps = promoted(fam, data, ridge)?;
    let g = Conjugate::new(fam);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = kmeanspp_indices(&g, &ps, k, &mut rng)?;
    uniform_model(fam, idx.into_iter().map(|i| ps[i].clone()).collect())
}

/// Every component takes its location statistic from a distinct sampled
/// point and the rest of its moment parameter from the global MLE. For
/// Gaussians all components share the covariance Σ̂.
pub fn global_mle_restricted_init<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    k: usize,
    seed: u64,
    ridge: Option<f64>,
) -> Result<MixtureModel> {
    precheck(fam, data, k)?;
    let ps = promoted(fam, data, ridge)?;
    let mut order: Vec<usize> = (0..ps.len()).filter(|&i| fam.check_moment(&ps[i]).is_ok()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    for i in order {
        if !centers.contains(&ps[i]) {
            centers.push(ps[i].clone());
            if centers.len() == k {
                break;
            }
        }
    }
    if centers.len() < k {
        return Err(Error::NotEnoughDistinct {
            needed: k,
            found: centers.len(),
        });
    }
    uniform_model(fam, centers)
}

fn groups_model<F: ExpFamily + ?Sized>(
    fam: &F,
    ys: &[Vec<f64>],
    groups: &[Vec<usize>],
    ridge: Option<f64>,
) -> Result<MixtureModel> {
    let n = ys.len() as f64;
    let mut weights = Vec::with_capacity(groups.len());
    let mut centers = Vec::with_capacity(groups.len());
    for (g, members) in groups.iter().enumerate() {
        let stats: Vec<Vec<f64>> = members.iter().map(|&i| ys[i].clone()).collect();
        let eta = admit_moment(fam, mean_statistic(&stats), ridge, &format!("group {g}"))?;
        centers.push(eta);
        weights.push(members.len() as f64 / n);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    MixtureModel::from_moments(fam, weights, &centers)
}

/// Splits the sample into k groups and takes the MLE of each one. In 1D the
/// groups are runs of order statistics with boundaries ⌊g·n/k⌋; otherwise
/// points go to the nearest of k squared-Euclidean k-means++ seeds.
/// Weights are the group proportions.
pub fn group_split_init<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    k: usize,
    seed: u64,
    ridge: Option<f64>,
) -> Result<MixtureModel> {
    precheck(fam, data, k)?;
    let ys = data.statistics(fam);
    let n = ys.len();
    let groups: Vec<Vec<usize>> = if fam.support_dim() == 1 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| data.points()[a][0].total_cmp(&data.points()[b][0]));
        (0..k)
            .map(|g| order[g * n / k..(g + 1) * n / k].to_vec())
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seeds = kmeanspp_indices(&SquaredEuclidean, &ys, k, &mut rng)?;
        let mut groups = vec![Vec::new(); k];
        for (i, y) in ys.iter().enumerate() {
            let mut best = (0, f64::INFINITY);
            for (j, &s) in seeds.iter().enumerate() {
                let d: f64 = y.iter().zip(&ys[s]).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.1 {
                    best = (j, d);
                }
            }
            groups[best.0].push(i);
        }
        groups
    };
    groups_model(fam, &ys, &groups, ridge)
}

/// MLE of a random partition: k shuffled points open one group each and the
/// remaining points join uniformly random groups.
pub fn forgy_random_init<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    k: usize,
    seed: u64,
    ridge: Option<f64>,
) -> Result<MixtureModel> {
    precheck(fam, data, k)?;
    let ys = data.statistics(fam);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..ys.len()).collect();
    order.shuffle(&mut rng);
    let mut groups = vec![Vec::new(); k];
    for (pos, &i) in order.iter().enumerate() {
        let g = if pos < k { pos } else { rng.random_range(0..k) };
        groups[g].push(i);
    }
    groups.iter_mut().for_each(|g| g.sort_unstable());
    groups_model(fam, &ys, &groups, ridge)
}

/// Builds the starting model described by `spec`.
pub fn initialize<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    k: usize,
    spec: &SeedSpec,
    ridge: Option<f64>,
) -> Result<MixtureModel> {
    match &spec.method {
        SeedMethod::KMeansPP => kmle_pp(fam, data, k, spec.seed, ridge),
        SeedMethod::GlobalMleRestricted => global_mle_restricted_init(fam, data, k, spec.seed, ridge),
        SeedMethod::GroupSplit => group_split_init(fam, data, k, spec.seed, ridge),
        SeedMethod::ForgyRandom => forgy_random_init(fam, data, k, spec.seed, ridge),
        SeedMethod::Explicit(model) => {
            if model.k() != k {
                return Err(Error::InvalidArgument(format!(
                    "explicit initialization has {} components, expected {k}",
                    model.k()
                )));
            }
            model.validate(fam)?;
            Ok(model.clone())
        }
    }
}

/// μ-similarity constant of a 1D generator on the hull of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct MuBound {
    pub mu: f64,
    pub hull: Vec<(f64, f64)>,
}

impl MuBound {
    /// Expected k-means++ approximation factor 8/μ² (2 + ln k).
    pub fn seeding_factor(&self, k: usize) -> f64 {
        8.0 / (self.mu * self.mu) * (2.0 + (k as f64).ln())
    }
}

const MU_GRID: usize = 1024;

/// μ = min F″ / max F″ over the hull [a, b] of `ys`, from a uniform grid
/// that includes both endpoints.
pub fn mu_similarity_1d<G: Generator + ?Sized>(ys: &[Vec<f64>], g: &G) -> Result<MuBound> {
    if ys.is_empty() {
        return Err(Error::InvalidArgument("empty point set".into()));
    }
    if ys.iter().any(|y| y.len() != 1) {
        return Err(Error::Unsupported(
            "μ-similarity is only available for one-dimensional generators".into(),
        ));
    }
    let a = ys.iter().map(|y| y[0]).fold(f64::INFINITY, f64::min);
    let b = ys.iter().map(|y| y[0]).fold(f64::NEG_INFINITY, f64::max);
    if !(a < b) {
        return Err(Error::degenerate("hull", format!("collapsed to the point {a}")));
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for s in 0..=MU_GRID {
        let y = if s == MU_GRID { b } else { a + (b - a) * s as f64 / MU_GRID as f64 };
        let h = g.second_derivative_1d(y).ok_or_else(|| {
            Error::Unsupported("generator has no second derivative".into())
        })?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::degenerate("hull", format!("F″({y}) = {h} is not positive")));
        }
        lo = lo.min(h);
        hi = hi.max(h);
    }
    Ok(MuBound {
        mu: lo / hi,
        hull: vec![(a, b)],
    })
}
