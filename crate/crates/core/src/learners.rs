//! Mixture learners: k-MLE, hard EM and soft (Bregman) EM.
//!
//! All three keep component parameters in moment coordinates while fitting
//! and convert to natural coordinates once, on output.
//!
//! k-MLE alternates an additively weighted Bregman k-means on the
//! statistics y_i = t(x_i) (masses m_j = -log w_j held fixed) with the
//! weight update w_j ← |C_j| / n. Each step can only raise the average
//! complete log-likelihood, since
//!
//! ```text
//! l̄' = -(1/n) Σ_i (B_{F*}(y_i : η_{z_i}) - log w_{z_i}) + (1/n) Σ_i (F*(y_i) + k(x_i)).
//! ```
//!
//! Hard EM performs the same three steps but updates the weights after every
//! assignment. Soft EM replaces the hard labels by responsibilities.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bregman::{CenterScorer, Conjugate, WeightedCenterSet};
use crate::clustering::{self, Assignment, KMeansConfig};
use crate::error::{Error, Result};
use crate::exp_family::{admit_moment, dot, validate_natural, ExpFamily, Moment, Natural, SampleSet};
use crate::seeding::{self, SeedSpec};

/// Finite mixture Σ_j w_j p_F(x; θ_j). Dropped components carry weight 0
/// and no parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    family: String,
    weights: Vec<f64>,
    components: Vec<Option<Natural>>,
}

impl MixtureModel {
    pub fn new(family: impl Into<String>, weights: Vec<f64>, components: Vec<Option<Natural>>) -> Result<Self> {
        if weights.len() != components.len() || weights.is_empty() {
            return Err(Error::InvalidArgument(
                "weights and components must have the same non-zero length".into(),
            ));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidArgument("weights must lie in [0, 1]".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights sum to {sum}, not 1")));
        }
        for (w, c) in weights.iter().zip(&components) {
            if (*w > 0.0) != c.is_some() {
                return Err(Error::InvalidArgument(
                    "a component has a parameter exactly when its weight is positive".into(),
                ));
            }
        }
        Ok(Self {
            family: family.into(),
            weights,
            components,
        })
    }

    /// Builds a model from moment parameters, converting active components to
    /// natural coordinates.
    pub fn from_moments<F: ExpFamily + ?Sized>(
        fam: &F,
        weights: Vec<f64>,
        moments: &[Vec<f64>],
    ) -> Result<Self> {
        let components = weights
            .iter()
            .zip(moments)
            .map(|(w, eta)| {
                if *w > 0.0 {
                    crate::exp_family::natural_from_moment(fam, &Moment::new(eta.clone())).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(fam.name(), weights, components)
    }

    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Option<Natural>] {
        &self.components
    }

    pub fn active_count(&self) -> usize {
        self.components.iter().filter(|c| c.is_some()).count()
    }

    pub fn validate<F: ExpFamily + ?Sized>(&self, fam: &F) -> Result<()> {
        if fam.name() != self.family {
            return Err(Error::InvalidArgument(format!(
                "model family {:?} does not match {:?}",
                self.family,
                fam.name()
            )));
        }
        for c in self.components.iter().flatten() {
            validate_natural(fam, c)?;
        }
        Ok(())
    }

    /// Moment parameters of every component (zeros for dropped ones).
    pub fn moments<F: ExpFamily + ?Sized>(&self, fam: &F) -> Vec<Vec<f64>> {
        self.components
            .iter()
            .map(|c| match c {
                Some(theta) => fam.gradient_at(theta.as_slice()),
                None => vec![0.0; fam.order()],
            })
            .collect()
    }

    fn center_set<F: ExpFamily + ?Sized>(&self, fam: &F) -> Result<WeightedCenterSet> {
        WeightedCenterSet::with_weights(self.moments(fam), &self.weights)
    }
}

/// w_j = |C_j| / n.
pub fn update_weights(a: &Assignment) -> Vec<f64> {
    a.proportions()
}

/// Shannon cross-entropy H×(p : q) = -Σ p_i log q_i (0 log 0 = 0).
pub fn cross_entropy(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(pi, qi)| if *pi == 0.0 { 0.0 } else { -pi * qi.ln() })
        .sum()
}

/// Per-component pieces of log(w_j p(x; θ_j)) = <t(x), θ_j> + c_j + k(x).
struct ComponentTable {
    thetas: Vec<Option<Vec<f64>>>,
    consts: Vec<f64>,
}

impl ComponentTable {
    fn from_model<F: ExpFamily + ?Sized>(fam: &F, model: &MixtureModel) -> Self {
        let thetas: Vec<Option<Vec<f64>>> = model
            .components
            .iter()
            .map(|c| c.as_ref().map(|t| t.as_slice().to_vec()))
            .collect();
        Self::build(fam, thetas, &model.weights)
    }

    fn from_centers<F: ExpFamily + ?Sized>(fam: &F, cs: &WeightedCenterSet) -> Self {
        let weights = cs.weights();
        let thetas = (0..cs.len())
            .map(|j| cs.is_active(j).then(|| fam.gradient_inverse_at(cs.center(j))))
            .collect();
        Self::build(fam, thetas, &weights)
    }

    fn build<F: ExpFamily + ?Sized>(fam: &F, thetas: Vec<Option<Vec<f64>>>, weights: &[f64]) -> Self {
        let consts = thetas
            .iter()
            .zip(weights)
            .map(|(t, w)| match t {
                Some(t) if *w > 0.0 => w.ln() - fam.log_normalizer_at(t),
                _ => f64::NEG_INFINITY,
            })
            .collect();
        Self { thetas, consts }
    }

    /// log(w_j p(x; θ_j)) without the carrier term.
    fn joint(&self, y: &[f64], j: usize) -> f64 {
        match &self.thetas[j] {
            Some(t) if self.consts[j].is_finite() => dot(y, t) + self.consts[j],
            _ => f64::NEG_INFINITY,
        }
    }

    fn log_mix(&self, y: &[f64]) -> f64 {
        let vals: Vec<f64> = (0..self.thetas.len()).map(|j| self.joint(y, j)).collect();
        log_sum_exp(&vals)
    }
}

pub(crate) fn log_sum_exp(vals: &[f64]) -> f64 {
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn check_data<F: ExpFamily + ?Sized>(fam: &F, data: &SampleSet, model: &MixtureModel) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    data.validate(fam)?;
    model.validate(fam)
}

/// l̄' = (1/n) Σ_i log(w_{z_i} p(x_i; θ_{z_i})). A label pointing at a dropped
/// component yields `-∞`.
pub fn complete_loglik<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    labels: &[usize],
    model: &MixtureModel,
) -> Result<f64> {
    check_data(fam, data, model)?;
    if labels.len() != data.len() {
        return Err(Error::Dimension {
            expected: data.len(),
            got: labels.len(),
        });
    }
    if let Some(z) = labels.iter().find(|&&z| z >= model.k()) {
        return Err(Error::InvalidArgument(format!("label {z} out of range")));
    }
    let table = ComponentTable::from_model(fam, model);
    let total: f64 = data
        .points()
        .iter()
        .zip(labels)
        .map(|(x, &z)| table.joint(&fam.sufficient_stat(x), z) + fam.carrier(x))
        .sum();
    Ok(total / data.len() as f64)
}

/// l̄ = (1/n) Σ_i log Σ_j w_j p(x_i; θ_j).
pub fn incomplete_loglik<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    model: &MixtureModel,
) -> Result<f64> {
    check_data(fam, data, model)?;
    let table = ComponentTable::from_model(fam, model);
    let total: f64 = data
        .points()
        .iter()
        .map(|x| table.log_mix(&fam.sufficient_stat(x)) + fam.carrier(x))
        .sum();
    Ok(total / data.len() as f64)
}

/// z_i = argmax_j w_j p(x_i; θ_j), ties to the lowest index.
pub fn hard_labels<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    model: &MixtureModel,
) -> Result<Vec<usize>> {
    check_data(fam, data, model)?;
    let cs = model.center_set(fam)?;
    let g = Conjugate::new(fam);
    let ys = data.statistics(fam);
    Ok(clustering::assign(&g, &ys, &cs)?.labels().to_vec())
}

/// k-means loss (1/n) Σ_i min_j (B_{F*}(y_i : η_j) - log w_j) of a model.
///
/// When F* diverges on single statistics (Gaussians) the loss is reported
/// without the point-only term (1/n) Σ F*(y_i).
pub fn model_kmeans_loss<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    model: &MixtureModel,
) -> Result<f64> {
    check_data(fam, data, model)?;
    let cs = model.center_set(fam)?;
    let g = Conjugate::new(fam);
    let ys = data.statistics(fam);
    let scorer = CenterScorer::new(&g, &cs)?;
    let dterm = clustering::data_term(&g, &ys);
    let reduced: f64 = ys.iter().map(|y| scorer.best(y).1).sum::<f64>() / ys.len() as f64;
    Ok(if dterm.is_finite() { reduced + dterm } else { reduced })
}

/// Draws the component label from the weights, then the observation.
pub fn sample_mixture<F: ExpFamily + ?Sized>(
    fam: &F,
    model: &MixtureModel,
    count: usize,
    seed: u64,
) -> Result<(SampleSet, Vec<usize>)> {
    model.validate(fam)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cumulative = Vec::with_capacity(model.k());
    let mut acc = 0.0;
    for w in &model.weights {
        acc += w;
        cumulative.push(acc);
    }
    let last_active = model.weights.iter().rposition(|w| *w > 0.0).expect("validated");
    let mut points = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let u: f64 = rng.random::<f64>() * acc;
        let j = cumulative
            .iter()
            .zip(&model.weights)
            .position(|(c, w)| *w > 0.0 && u < *c)
            .unwrap_or(last_active);
        let theta = model.components[j].as_ref().expect("positive weight");
        points.push(fam.draw(theta.as_slice(), &mut rng));
        labels.push(j);
    }
    Ok((SampleSet::new(points), labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    KMle,
    HardEm,
    SoftEm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    /// Inner clustering loop (k-MLE) and assignment details.
    pub clustering: KMeansConfig,
    /// Outer iterations for k-MLE, iterations for hard and soft EM.
    pub max_iters: usize,
    /// Relative change of the tracked log-likelihood that ends a run.
    pub tol: f64,
    /// Relative ridge for degenerate moment estimates; `None` raises.
    pub ridge: Option<f64>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            clustering: KMeansConfig::default(),
            max_iters: 100,
            tol: 1e-8,
            ridge: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Inner,
    Outer,
    EStep,
    MStep,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Inner => "inner",
            Phase::Outer => "outer",
            Phase::EStep => "estep",
            Phase::MStep => "mstep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub phase: Phase,
    pub complete_ll: f64,
    pub incomplete_ll: f64,
    /// See [`model_kmeans_loss`] for the Gaussian convention.
    pub kmeans_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max_iterations",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub trace: Vec<TraceRow>,
    pub outer_iterations: usize,
    pub termination: Termination,
    pub seed: u64,
    pub elapsed: Duration,
    /// l̄' of the returned model under its final hard assignment.
    pub complete_ll: f64,
    /// l̄ of the returned model.
    pub incomplete_ll: f64,
}

impl FitReport {
    pub fn complete_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.complete_ll).collect()
    }

    pub fn incomplete_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.incomplete_ll).collect()
    }
}

/// Shared state for the hard-assignment learners.
struct HardContext<'a, F: ?Sized> {
    fam: &'a F,
    ys: Vec<Vec<f64>>,
    mean_carrier: f64,
    data_term: f64,
    gen: Conjugate<'a, F>,
    rows: Vec<TraceRow>,
}

impl<'a, F: ExpFamily + ?Sized> HardContext<'a, F> {
    fn new(fam: &'a F, data: &SampleSet, ridge: Option<f64>) -> Self {
        let ys = data.statistics(fam);
        let n = data.len() as f64;
        let mean_carrier = data.points().iter().map(|x| fam.carrier(x)).sum::<f64>() / n;
        let gen = Conjugate::with_ridge(fam, ridge);
        let data_term = clustering::data_term(&gen, &ys);
        Self {
            fam,
            ys,
            mean_carrier,
            data_term,
            gen,
            rows: Vec::new(),
        }
    }

    /// Records the state (centers, labels) with the reduced loss already known.
    fn record(&mut self, phase: Phase, cs: &WeightedCenterSet, reduced: f64) {
        let table = ComponentTable::from_centers(self.fam, cs);
        let n = self.ys.len() as f64;
        // Collect first so the summation order does not depend on scheduling.
        let per_point: Vec<f64> = self.ys.par_iter().map(|y| table.log_mix(y)).collect();
        let incomplete = per_point.iter().sum::<f64>() / n + self.mean_carrier;
        let kmeans_loss = if self.data_term.is_finite() {
            reduced + self.data_term
        } else {
            reduced
        };
        self.rows.push(TraceRow {
            iteration: self.rows.len() + 1,
            phase,
            complete_ll: self.mean_carrier - reduced,
            incomplete_ll: incomplete,
            kmeans_loss,
        });
    }

    fn reduced_loss(&self, cs: &WeightedCenterSet, labels: &[usize]) -> Result<f64> {
        let scorer = CenterScorer::new(&self.gen, cs)?;
        let total: f64 = self.ys.iter().zip(labels).map(|(y, &z)| scorer.score(y, z)).sum();
        Ok(total / self.ys.len() as f64)
    }
}

fn relative_change(prev: f64, cur: f64) -> f64 {
    (cur - prev).abs() / cur.abs().max(f64::MIN_POSITIVE)
}

fn precheck<F: ExpFamily + ?Sized>(fam: &F, data: &SampleSet, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > data.len() {
        return Err(Error::InvalidArgument("k exceeds sample size".into()));
    }
    data.validate(fam)?;
    if k > 1 && data.points().windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::degenerate("data", "all observations are identical"));
    }
    Ok(())
}

fn finish<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    cs: &WeightedCenterSet,
    weights: Vec<f64>,
    rows: Vec<TraceRow>,
    outer_iterations: usize,
    termination: Termination,
    seed: u64,
    started: Instant,
) -> Result<(MixtureModel, FitReport)> {
    let model = MixtureModel::from_moments(fam, normalize(weights), cs.centers())?;
    let labels = hard_labels(fam, data, &model)?;
    let complete_ll = complete_loglik(fam, data, &labels, &model)?;
    let incomplete_ll = incomplete_loglik(fam, data, &model)?;
    Ok((
        model,
        FitReport {
            trace: rows,
            outer_iterations,
            termination,
            seed,
            elapsed: started.elapsed(),
            complete_ll,
            incomplete_ll,
        },
    ))
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// k-MLE from the initial model `init`.
pub fn kmle_fit<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    init: &MixtureModel,
    cfg: &LearnerConfig,
) -> Result<(MixtureModel, FitReport)> {
    kmle_fit_seeded(fam, data, init, cfg, 0)
}

fn kmle_fit_seeded<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    init: &MixtureModel,
    cfg: &LearnerConfig,
    seed: u64,
) -> Result<(MixtureModel, FitReport)> {
    let started = Instant::now();
    precheck(fam, data, init.k())?;
    init.validate(fam)?;
    let mut ctx = HardContext::new(fam, data, cfg.ridge);
    let mut cs = init.center_set(fam)?;
    let mut prev: Option<f64> = None;
    let mut termination = Termination::MaxIterations;
    let mut outer = 0;
    let mut weights = init.weights.clone();

    for _ in 0..cfg.max_iters {
        outer += 1;
        let mut pending: Vec<(WeightedCenterSet, f64)> = Vec::new();
        let out = clustering::kmeans_observed(
            &ctx.gen,
            &ctx.ys,
            &cs,
            &cfg.clustering,
            &mut |c, _, loss| pending.push((c.clone(), loss)),
        )?;
        for (c, loss) in pending {
            ctx.record(Phase::Inner, &c, loss);
        }
        cs = out.centers;
        weights = update_weights(&out.assignment);
        cs.set_weights(&weights);
        let reduced = ctx.reduced_loss(&cs, out.assignment.labels())?;
        ctx.record(Phase::Outer, &cs, reduced);
        let cur = ctx.mean_carrier - reduced;
        if let Some(p) = prev {
            if relative_change(p, cur) < cfg.tol {
                termination = Termination::Converged;
                break;
            }
        }
        prev = Some(cur);
    }
    finish(fam, data, &cs, weights, ctx.rows, outer, termination, seed, started)
}

/// Hard EM: assignment, moment update and weight update in every iteration.
pub fn hard_em_fit<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    init: &MixtureModel,
    cfg: &LearnerConfig,
) -> Result<(MixtureModel, FitReport)> {
    hard_em_fit_seeded(fam, data, init, cfg, 0)
}

fn hard_em_fit_seeded<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    init: &MixtureModel,
    cfg: &LearnerConfig,
    seed: u64,
) -> Result<(MixtureModel, FitReport)> {
    let started = Instant::now();
    precheck(fam, data, init.k())?;
    init.validate(fam)?;
    let mut ctx = HardContext::new(fam, data, cfg.ridge);
    let mut cs = init.center_set(fam)?;
    let mut prev: Option<(f64, Vec<usize>)> = None;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    let mut weights = init.weights.clone();

    for _ in 0..cfg.max_iters {
        iterations += 1;
        let a = clustering::assign(&ctx.gen, &ctx.ys, &cs)?;
        cs = clustering::update_centers(
            &ctx.gen,
            &ctx.ys,
            &a,
            &cs,
            cfg.clustering.empty_cluster_policy,
        )?;
        weights = update_weights(&a);
        cs.set_weights(&weights);
        let reduced = ctx.reduced_loss(&cs, a.labels())?;
        ctx.record(Phase::Outer, &cs, reduced);
        let cur = ctx.mean_carrier - reduced;
        if let Some((p, labels)) = &prev {
            if labels.as_slice() == a.labels() || relative_change(*p, cur) < cfg.tol {
                termination = Termination::Converged;
                break;
            }
        }
        prev = Some((cur, a.labels().to_vec()));
    }
    finish(fam, data, &cs, weights, ctx.rows, iterations, termination, seed, started)
}

/// Soft EM with responsibilities r_ij ∝ w_j p(x_i; θ_j) and moment-space
/// barycenters in the M-step.
pub fn soft_em_fit<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    init: &MixtureModel,
    cfg: &LearnerConfig,
) -> Result<(MixtureModel, FitReport)> {
    soft_em_fit_seeded(fam, data, init, cfg, 0)
}

/// Log-domain responsibilities; returns (rows of r_i·, mean log mixture).
fn e_step<F: ExpFamily + ?Sized>(
    fam: &F,
    ys: &[Vec<f64>],
    cs: &WeightedCenterSet,
) -> (Vec<Vec<f64>>, f64, Vec<usize>) {
    let table = ComponentTable::from_centers(fam, cs);
    let k = cs.len();
    let per_point: Vec<(Vec<f64>, f64, usize)> = ys
        .par_iter()
        .map(|y| {
            let joint: Vec<f64> = (0..k).map(|j| table.joint(y, j)).collect();
            let lse = log_sum_exp(&joint);
            let mut best = 0;
            for j in 1..k {
                if joint[j] > joint[best] {
                    best = j;
                }
            }
            (joint.iter().map(|v| (v - lse).exp()).collect(), lse, best)
        })
        .collect();
    let n = ys.len() as f64;
    let mean = per_point.iter().map(|p| p.1).sum::<f64>() / n;
    let labels = per_point.iter().map(|p| p.2).collect();
    (per_point.into_iter().map(|p| p.0).collect(), mean, labels)
}

fn soft_em_fit_seeded<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    init: &MixtureModel,
    cfg: &LearnerConfig,
    seed: u64,
) -> Result<(MixtureModel, FitReport)> {
    let started = Instant::now();
    precheck(fam, data, init.k())?;
    init.validate(fam)?;
    let ctx = HardContext::new(fam, data, cfg.ridge);
    let ys = &ctx.ys;
    let n = ys.len() as f64;
    let k = init.k();
    let dim = fam.order();
    let mut cs = init.center_set(fam)?;
    let mut rows = Vec::new();
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    let push_row = |rows: &mut Vec<TraceRow>, phase, cs: &WeightedCenterSet, ll: f64, labels: &[usize]| -> Result<()> {
        let reduced = ctx.reduced_loss(cs, labels)?;
        let kmeans_loss = if ctx.data_term.is_finite() {
            reduced + ctx.data_term
        } else {
            reduced
        };
        rows.push(TraceRow {
            iteration: rows.len() + 1,
            phase,
            complete_ll: ctx.mean_carrier - reduced,
            incomplete_ll: ll + ctx.mean_carrier,
            kmeans_loss,
        });
        Ok(())
    };

    let (mut resp, mut ll, labels) = e_step(fam, ys, &cs);
    push_row(&mut rows, Phase::EStep, &cs, ll, &labels)?;

    for _ in 0..cfg.max_iters {
        iterations += 1;
        let mut mass = vec![0.0; k];
        let mut sums = vec![vec![0.0; dim]; k];
        for (y, r) in ys.iter().zip(&resp) {
            for j in 0..k {
                if r[j] == 0.0 {
                    continue;
                }
                mass[j] += r[j];
                for (s, v) in sums[j].iter_mut().zip(y) {
                    *s += r[j] * v;
                }
            }
        }
        let mut next = cs.clone();
        for j in 0..k {
            if mass[j] <= 0.0 || !cs.is_active(j) {
                next.deactivate(j);
                continue;
            }
            let eta: Vec<f64> = sums[j].iter().map(|s| s / mass[j]).collect();
            let eta = admit_moment(fam, eta, cfg.ridge, &format!("component {j}"))?;
            next.set_center(j, eta);
            next.set_mass(j, -(mass[j] / n).ln());
        }
        cs = next;
        let (r, new_ll, labels) = e_step(fam, ys, &cs);
        push_row(&mut rows, Phase::MStep, &cs, new_ll, &labels)?;
        let change = relative_change(ll + ctx.mean_carrier, new_ll + ctx.mean_carrier);
        resp = r;
        ll = new_ll;
        if change < cfg.tol {
            termination = Termination::Converged;
            break;
        }
    }
    let weights = cs.weights();
    finish(fam, data, &cs, weights, rows, iterations, termination, seed, started)
}

/// Runs `algo` from the initialization described by `init`, keeping the best
/// of `init.restarts` runs (seeds `init.seed`, `init.seed + 1`, ...). Hard
/// learners are ranked by final complete log-likelihood, soft EM by the
/// incomplete one.
pub fn fit<F: ExpFamily + ?Sized>(
    fam: &F,
    data: &SampleSet,
    k: usize,
    algo: Algorithm,
    init: &SeedSpec,
    cfg: &LearnerConfig,
) -> Result<(MixtureModel, FitReport)> {
    precheck(fam, data, k)?;
    let restarts = init.restarts.max(1);
    let mut best: Option<(MixtureModel, FitReport)> = None;
    for r in 0..restarts {
        let seed = init.seed.wrapping_add(r as u64);
        let spec = SeedSpec { seed, ..init.clone() };
        let start = seeding::initialize(fam, data, k, &spec, cfg.ridge)?;
        let result = match algo {
            Algorithm::KMle => kmle_fit_seeded(fam, data, &start, cfg, seed)?,
            Algorithm::HardEm => hard_em_fit_seeded(fam, data, &start, cfg, seed)?,
            Algorithm::SoftEm => soft_em_fit_seeded(fam, data, &start, cfg, seed)?,
        };
        let score = |rep: &FitReport| match algo {
            Algorithm::SoftEm => rep.incomplete_ll,
            _ => rep.complete_ll,
        };
        let better = match &best {
            None => true,
            Some((_, b)) => score(&result.1) > score(b),
        };
        if better {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}
