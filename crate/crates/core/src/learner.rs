//! OPERA, its reduced form for induced kernels, and the projected baseline.
//!
//! With `f_1 = f_2 = 0`, step `t >= 2` consumes `z_t` and sets
//!
//! ```text
//! f_{t+1} = f_t - gamma_t/(t-1) * sum_{j<t} (f_t(x_t, x_j) - y_t + y_j) K_{(x_t, x_j)}
//! ```
//!
//! For `K` induced by `G` the same sequence is `f_t = Im(g_t)` with the
//! univariate update
//!
//! ```text
//! g_{t+1} = g_t - gamma_t/(t-1) * sum_{j<t} d_j (G_{x_t} - G_{x_j}),
//! d_j = g_t(x_t) - g_t(x_j) - y_t + y_j.
//! ```
//!
//! Both engines keep a registry of distinct sample points. The reduced engine
//! keeps the values of `g_t` at every registered point, so a step costs
//! `O(t + D^2)` for `D` distinct points.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hypothesis::{coord_key, lift, Expansion, LiftedHypothesis, PairwiseFunction};
use crate::kernel::{Pair, PairwiseKernel, UnivariateKernel};
use crate::measure::{Estimate, Measure, Sample};

/// Polynomially decaying step sizes `gamma_t = t^{-theta} / mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    theta: f64,
    mu: f64,
}

impl Schedule {
    pub fn new(theta: f64, mu: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::config(format!("theta must lie in (0, 1), got {theta}")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::config(format!("mu must be positive, got {mu}")));
        }
        Ok(Schedule { theta, mu })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn step_size(&self, t: usize) -> f64 {
        (t as f64).powf(-self.theta) / self.mu
    }
}

/// Step sizes used by a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Schedule(Schedule),
    Constant(f64),
}

impl StepRule {
    pub fn gamma(&self, t: usize) -> f64 {
        match self {
            StepRule::Schedule(s) => s.step_size(t),
            StepRule::Constant(eta) => *eta,
        }
    }
}

/// `2M sqrt(sum_{j=2}^{t-1} gamma_j)`, the norm bound for `f_t`.
pub fn lemma1_bound(label_bound: f64, steps: &StepRule, t: usize) -> f64 {
    let sum: f64 = (2..t).map(|j| steps.gamma(j)).sum();
    2.0 * label_bound * sum.sqrt()
}

/// How the hypothesis is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// Pairwise expansion; `t - 1` new terms per step.
    Direct,
    /// Univariate expansion for induced kernels; one center per sample.
    Reduced,
}

#[derive(Debug, Clone, Default)]
struct PointRegistry {
    points: Vec<Vec<f64>>,
    index: HashMap<Vec<u64>, usize>,
}

impl PointRegistry {
    fn get(&self, x: &[f64]) -> Option<usize> {
        self.index.get(&coord_key(x)).copied()
    }

    fn insert(&mut self, x: &[f64]) -> (usize, bool) {
        let key = coord_key(x);
        if let Some(&i) = self.index.get(&key) {
            return (i, false);
        }
        let i = self.points.len();
        self.points.push(x.to_vec());
        self.index.insert(key, i);
        (i, true)
    }
}

#[derive(Debug, Clone)]
struct DirectState {
    f: Expansion<PairwiseKernel>,
    registry: PointRegistry,
    sq_norm: f64,
}

#[derive(Debug, Clone)]
struct ReducedState {
    base: UnivariateKernel,
    /// One center per consumed sample.
    g: Expansion<UnivariateKernel>,
    registry: PointRegistry,
    /// Coefficient of `G_{P_d}` after merging coincident samples.
    coef: Vec<f64>,
    /// `g(P_d)` for every registered point.
    values: Vec<f64>,
    /// Packed lower triangle of the Gram matrix of registered points.
    gram: Vec<f64>,
}

impl ReducedState {
    fn gram_at(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i >= j { (i, j) } else { (j, i) };
        self.gram[a * (a + 1) / 2 + b]
    }

    fn register(&mut self, x: &[f64]) -> usize {
        let (i, fresh) = self.registry.insert(x);
        if fresh {
            let mut value = 0.0;
            for d in 0..i {
                let k = self.base.eval_slices(&self.registry.points[d], x);
                self.gram.push(k);
                value += self.coef[d] * k;
            }
            self.gram.push(self.base.eval_slices(x, x));
            self.coef.push(0.0);
            self.values.push(value);
        }
        i
    }

    fn g_value(&self, x: &[f64]) -> f64 {
        match self.registry.get(x) {
            Some(i) => self.values[i],
            None => self
                .registry
                .points
                .iter()
                .zip(&self.coef)
                .filter(|(_, c)| **c != 0.0)
                .map(|(p, c)| c * self.base.eval_slices(p, x))
                .sum(),
        }
    }

    fn sq_norm(&self) -> f64 {
        self.coef
            .iter()
            .zip(&self.values)
            .map(|(c, v)| c * v)
            .sum::<f64>()
            .max(0.0)
    }
}

#[derive(Debug, Clone)]
enum Hypothesis {
    Direct(DirectState),
    Reduced(ReducedState),
}

/// A recorded hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Pairwise(Expansion<PairwiseKernel>),
    Lifted(LiftedHypothesis),
}

impl Snapshot {
    pub fn n_terms(&self) -> usize {
        match self {
            Snapshot::Pairwise(f) => f.len(),
            Snapshot::Lifted(g) => g.base.len(),
        }
    }
}

impl PairwiseFunction for Snapshot {
    fn value(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Snapshot::Pairwise(f) => f.value(a, b),
            Snapshot::Lifted(g) => g.value(a, b),
        }
    }
}

/// State of an OPERA run: the step counter, the current hypothesis `f_t`
/// and the samples seen so far.
#[derive(Debug, Clone)]
pub struct OperaState {
    kernel: PairwiseKernel,
    t: usize,
    history: Vec<Sample>,
    /// Registry index of each history sample.
    history_idx: Vec<usize>,
    hyp: Hypothesis,
    merge_centers: bool,
    avg_sum: Vec<f64>,
    avg_count: usize,
}

impl OperaState {
    /// A fresh state at `t = 1`. The reduced engine requires an induced kernel.
    pub fn new(kernel: PairwiseKernel, engine: Engine) -> Result<Self> {
        let hyp = match engine {
            Engine::Direct => Hypothesis::Direct(DirectState {
                f: Expansion::zero(kernel.clone()),
                registry: PointRegistry::default(),
                sq_norm: 0.0,
            }),
            Engine::Reduced => {
                let base = kernel.base().cloned().ok_or_else(|| {
                    Error::config(format!(
                        "reduced engine needs an induced kernel, got `{}`",
                        crate::kernel::Kernel::spec(&kernel)
                    ))
                })?;
                Hypothesis::Reduced(ReducedState {
                    g: Expansion::zero(base.clone()),
                    base,
                    registry: PointRegistry::default(),
                    coef: Vec::new(),
                    values: Vec::new(),
                    gram: Vec::new(),
                })
            }
        };
        Ok(OperaState {
            kernel,
            t: 1,
            history: Vec::new(),
            history_idx: Vec::new(),
            hyp,
            merge_centers: false,
            avg_sum: Vec::new(),
            avg_count: 0,
        })
    }

    /// Collapse coincident centers: equal pairs in direct mode, equal points in
    /// reduced mode.
    pub fn with_merged_centers(mut self, merge: bool) -> Self {
        self.merge_centers = merge;
        self
    }

    /// Pre-registers points (e.g. a discrete support) so the reduced engine
    /// caches `g` at them from the start.
    pub fn with_known_points(mut self, points: &[Vec<f64>]) -> Self {
        match &mut self.hyp {
            Hypothesis::Direct(d) => {
                for p in points {
                    d.registry.insert(p);
                }
            }
            Hypothesis::Reduced(r) => {
                for p in points {
                    r.register(p);
                }
            }
        }
        self
    }

    pub fn engine(&self) -> Engine {
        match self.hyp {
            Hypothesis::Direct(_) => Engine::Direct,
            Hypothesis::Reduced(_) => Engine::Reduced,
        }
    }

    pub fn kernel(&self) -> &PairwiseKernel {
        &self.kernel
    }

    /// Index of the current hypothesis `f_t`.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn history(&self) -> &[Sample] {
        &self.history
    }

    /// Records `z_1`. The hypothesis stays zero and `t` becomes 2.
    pub fn push_first(&mut self, z: Sample) -> Result<()> {
        if self.t != 1 {
            return Err(Error::State(format!("first sample pushed at t = {}", self.t)));
        }
        self.check_sample(&z)?;
        let idx = self.register(&z.x);
        if let Hypothesis::Reduced(r) = &mut self.hyp {
            if self.merge_centers {
                r.g = merged_expansion(&r.base, &r.registry.points, &r.coef, &vec![0.0; r.coef.len()])?;
            } else {
                r.g.add_scaled_terms(vec![z.x.clone()], vec![0.0], false)?;
            }
            r.g.set_cached_sq_norm(0.0);
        }
        self.history.push(z);
        self.history_idx.push(idx);
        self.t = 2;
        Ok(())
    }

    fn check_sample(&self, z: &Sample) -> Result<()> {
        let d = crate::kernel::Kernel::domain_dim(&self.kernel);
        if z.x.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: z.x.len(),
            });
        }
        Ok(())
    }

    fn register(&mut self, x: &[f64]) -> usize {
        match &mut self.hyp {
            Hypothesis::Direct(d) => d.registry.insert(x).0,
            Hypothesis::Reduced(r) => r.register(x),
        }
    }

    /// One OPERA step with step size `gamma`, consuming `z_t`.
    pub fn step(&mut self, z: Sample, gamma: f64) -> Result<()> {
        if self.t < 2 {
            return Err(Error::State("step called before the first sample (t < 2)".into()));
        }
        self.check_sample(&z)?;
        let idx_t = self.register(&z.x);
        let n = self.t - 1;
        let scale = gamma / n as f64;
        match &mut self.hyp {
            Hypothesis::Direct(d) => {
                let np = d.registry.points.len();
                let mut fval = vec![f64::NAN; np];
                for &e in &self.history_idx {
                    if fval[e].is_nan() {
                        fval[e] = d.f.value(&z.x, &d.registry.points[e]);
                    }
                }
                let mut centers = Vec::with_capacity(n);
                let mut coeffs = Vec::with_capacity(n);
                let mut agg = vec![0.0; np];
                let mut inner = 0.0;
                for (zj, &e) in self.history.iter().zip(&self.history_idx) {
                    let c = -scale * (fval[e] - z.y + zj.y);
                    centers.push(Pair::new(z.x.clone(), zj.x.clone()));
                    coeffs.push(c);
                    agg[e] += c;
                    inner += c * fval[e];
                }
                let touched: Vec<usize> = (0..np).filter(|&e| agg[e] != 0.0).collect();
                let mut delta_sq = 0.0;
                for (a, &e) in touched.iter().enumerate() {
                    let pe = &d.registry.points[e];
                    delta_sq += agg[e] * agg[e] * self.kernel.eval_slices(&z.x, pe, &z.x, pe);
                    for &e2 in &touched[..a] {
                        let pe2 = &d.registry.points[e2];
                        delta_sq += 2.0 * agg[e] * agg[e2] * self.kernel.eval_slices(&z.x, pe, &z.x, pe2);
                    }
                }
                d.sq_norm = (d.sq_norm + 2.0 * inner + delta_sq).max(0.0);
                d.f.add_scaled_terms(centers, coeffs, self.merge_centers)?;
                d.f.set_cached_sq_norm(d.sq_norm);
            }
            Hypothesis::Reduced(r) => {
                let vt = r.values[idx_t];
                let mut dc = vec![0.0; r.coef.len()];
                let mut total = 0.0;
                for (j, (zj, &e)) in self.history.iter().zip(&self.history_idx).enumerate() {
                    let dj = vt - r.values[e] - z.y + zj.y;
                    total += dj;
                    let c = scale * dj;
                    dc[e] += c;
                    if self.merge_centers {
                        continue;
                    }
                    r.g.add_to_coefficient(j, c);
                }
                let ct = -scale * total;
                dc[idx_t] += ct;
                if self.merge_centers {
                    r.g = merged_expansion(&r.base, &r.registry.points, &r.coef, &dc)?;
                } else {
                    r.g.add_scaled_terms(vec![z.x.clone()], vec![ct], false)?;
                }
                let touched: Vec<usize> = (0..dc.len()).filter(|&d| dc[d] != 0.0).collect();
                for e in 0..r.values.len() {
                    let dv: f64 = touched.iter().map(|&d| dc[d] * r.gram_at(d, e)).sum();
                    r.values[e] += dv;
                }
                for &d in &touched {
                    r.coef[d] += dc[d];
                }
                let sq = r.sq_norm();
                r.g.set_cached_sq_norm(sq);
            }
        }
        self.history.push(z);
        self.history_idx.push(idx_t);
        self.t += 1;
        Ok(())
    }

    /// `f_t(a, b)`.
    pub fn evaluate(&self, a: &[f64], b: &[f64]) -> f64 {
        match &self.hyp {
            Hypothesis::Direct(d) => d.f.value(a, b),
            Hypothesis::Reduced(r) => r.g_value(a) - r.g_value(b),
        }
    }

    /// `g_t(x)` in reduced mode.
    pub fn g_value(&self, x: &[f64]) -> Option<f64> {
        match &self.hyp {
            Hypothesis::Direct(_) => None,
            Hypothesis::Reduced(r) => Some(r.g_value(x)),
        }
    }

    /// `||f_t||_K` (equal to `||g_t||_G` in reduced mode).
    pub fn norm_k(&self) -> f64 {
        match &self.hyp {
            Hypothesis::Direct(d) => d.sq_norm.sqrt(),
            Hypothesis::Reduced(r) => r.sq_norm().sqrt(),
        }
    }

    /// Number of expansion terms of the current hypothesis.
    pub fn n_terms(&self) -> usize {
        match &self.hyp {
            Hypothesis::Direct(d) => d.f.len(),
            Hypothesis::Reduced(r) => r.g.len(),
        }
    }

    /// The reduced engine's cached values `(point, g_t(point))`.
    pub fn value_cache(&self) -> Vec<(Vec<f64>, f64)> {
        match &self.hyp {
            Hypothesis::Direct(_) => Vec::new(),
            Hypothesis::Reduced(r) => r.registry.points.iter().cloned().zip(r.values.clone()).collect(),
        }
    }

    /// The univariate expansion `g_t` (reduced mode).
    pub fn univariate(&self) -> Option<&Expansion<UnivariateKernel>> {
        match &self.hyp {
            Hypothesis::Direct(_) => None,
            Hypothesis::Reduced(r) => Some(&r.g),
        }
    }

    /// The pairwise expansion `f_t` (direct mode).
    pub fn pairwise(&self) -> Option<&Expansion<PairwiseKernel>> {
        match &self.hyp {
            Hypothesis::Direct(d) => Some(&d.f),
            Hypothesis::Reduced(_) => None,
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        match &self.hyp {
            Hypothesis::Direct(d) => Snapshot::Pairwise(d.f.clone()),
            Hypothesis::Reduced(r) => Snapshot::Lifted(lift(r.g.clone())),
        }
    }

    /// Multiplies the hypothesis by `c`.
    pub fn scale(&mut self, c: f64) {
        match &mut self.hyp {
            Hypothesis::Direct(d) => {
                d.f.scale(c);
                d.sq_norm *= c * c;
            }
            Hypothesis::Reduced(r) => {
                r.g.scale(c);
                for v in r.coef.iter_mut().chain(r.values.iter_mut()) {
                    *v *= c;
                }
            }
        }
    }

    /// Projects onto the ball of radius `radius`; returns the factor applied.
    pub fn project(&mut self, radius: f64) -> f64 {
        let norm = self.norm_k();
        if norm <= radius {
            return 1.0;
        }
        let factor = radius / norm;
        self.scale(factor);
        if let Hypothesis::Direct(d) = &mut self.hyp {
            d.sq_norm = radius * radius;
            d.f.set_cached_sq_norm(d.sq_norm);
        }
        factor
    }

    fn coefficient_view(&self) -> &[f64] {
        match &self.hyp {
            Hypothesis::Direct(d) => d.f.coefficients(),
            Hypothesis::Reduced(r) => r.g.coefficients(),
        }
    }

    /// Adds the current coefficients to the running sum behind the averaged
    /// iterate.
    pub fn accumulate_average(&mut self) {
        let n = self.coefficient_view().len();
        if self.avg_sum.len() < n {
            self.avg_sum.resize(n, 0.0);
        }
        let coeffs: Vec<f64> = self.coefficient_view().to_vec();
        for (s, c) in self.avg_sum.iter_mut().zip(coeffs) {
            *s += c;
        }
        self.avg_count += 1;
    }

    /// Mean of the accumulated hypotheses, over the current centers.
    pub fn average_snapshot(&self) -> Option<Snapshot> {
        if self.avg_count == 0 {
            return None;
        }
        let n = self.n_terms();
        let mut coeffs = self.avg_sum.clone();
        coeffs.resize(n, 0.0);
        for c in &mut coeffs {
            *c /= self.avg_count as f64;
        }
        match &self.hyp {
            Hypothesis::Direct(d) => Expansion::from_terms(self.kernel.clone(), d.f.centers().to_vec(), coeffs)
                .ok()
                .map(Snapshot::Pairwise),
            Hypothesis::Reduced(r) => Expansion::from_terms(r.base.clone(), r.g.centers().to_vec(), coeffs)
                .ok()
                .map(|g| Snapshot::Lifted(lift(g))),
        }
    }
}

impl PairwiseFunction for OperaState {
    fn value(&self, a: &[f64], b: &[f64]) -> f64 {
        self.evaluate(a, b)
    }
}

fn merged_expansion(
    base: &UnivariateKernel,
    points: &[Vec<f64>],
    coef: &[f64],
    dc: &[f64],
) -> Result<Expansion<UnivariateKernel>> {
    let mut centers = Vec::new();
    let mut coeffs = Vec::new();
    for (p, (c, d)) in points.iter().zip(coef.iter().zip(dc)) {
        centers.push(p.clone());
        coeffs.push(c + d);
    }
    Expansion::from_terms(base.clone(), centers, coeffs)
}

/// Projected online gradient descent: an OPERA step followed by projection
/// onto the ball of radius `R`.
#[derive(Debug, Clone)]
pub struct PogdState {
    inner: OperaState,
    radius: f64,
}

impl PogdState {
    pub fn new(inner: OperaState, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::config(format!(
                "projection radius must be positive, got {radius}"
            )));
        }
        Ok(PogdState { inner, radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn state(&self) -> &OperaState {
        &self.inner
    }

    pub fn state_mut(&mut self) -> &mut OperaState {
        &mut self.inner
    }

    pub fn push_first(&mut self, z: Sample) -> Result<()> {
        self.inner.push_first(z)
    }

    pub fn step(&mut self, z: Sample, eta: f64) -> Result<()> {
        self.inner.step(z, eta)?;
        self.inner.project(self.radius);
        Ok(())
    }
}

/// POGD step size choices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaRule {
    /// `R / ((2M + kappa R) sqrt(T))`.
    Lipschitz,
    /// `R^2 / T`.
    RadiusSquared,
    Value(f64),
    /// The OPERA schedule `gamma_t`.
    Schedule(Schedule),
}

impl EtaRule {
    pub fn step_rule(&self, radius: f64, label_bound: f64, kappa: f64, horizon: usize) -> StepRule {
        let tf = horizon as f64;
        match *self {
            EtaRule::Lipschitz => StepRule::Constant(radius / ((2.0 * label_bound + kappa * radius) * tf.sqrt())),
            EtaRule::RadiusSquared => StepRule::Constant(radius * radius / tf),
            EtaRule::Value(v) => StepRule::Constant(v),
            EtaRule::Schedule(s) => StepRule::Schedule(s),
        }
    }
}

/// Which algorithm a run executes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    Opera,
    Pogd { radius: f64 },
}

/// Everything that determines a single run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub kernel: PairwiseKernel,
    pub engine: Engine,
    pub algorithm: Algorithm,
    pub steps: StepRule,
    /// Number of samples `T`; the last hypothesis is `f_{T+1}`.
    pub horizon: usize,
    pub seed: u64,
    /// Hypothesis indices to record, within `[1, T + 1]`.
    pub record_at: Vec<usize>,
    pub keep_snapshots: bool,
    pub merge_centers: bool,
    /// Monte Carlo pairs for errors on continuous measures.
    pub mc_pairs: usize,
    /// Also record the error of the averaged iterate `mean(f_2..f_t)`.
    pub track_average: bool,
}

impl RunSpec {
    pub fn new(kernel: PairwiseKernel, steps: StepRule, horizon: usize, seed: u64) -> Self {
        let engine = if kernel.base().is_some() {
            Engine::Reduced
        } else {
            Engine::Direct
        };
        RunSpec {
            kernel,
            engine,
            algorithm: Algorithm::Opera,
            steps,
            horizon,
            seed,
            record_at: vec![horizon + 1],
            keep_snapshots: false,
            merge_centers: false,
            mc_pairs: crate::measure::DEFAULT_MC_PAIRS,
            track_average: false,
        }
    }
}

/// Metrics recorded at one hypothesis index.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: usize,
    pub gamma_t: f64,
    pub norm_k: f64,
    pub error: Estimate,
    pub averaged_error: Option<Estimate>,
    pub snapshot: Option<Snapshot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<Record>,
    pub samples: Vec<Sample>,
}

/// Runs OPERA or POGD on `T` samples drawn from `measure`.
pub fn run(spec: &RunSpec, measure: &Measure) -> Result<Trajectory> {
    run_with(spec, measure, |_| {})
}

/// `run`, calling `observe` on every hypothesis `f_1, ..., f_{T+1}`.
pub fn run_with(spec: &RunSpec, measure: &Measure, mut observe: impl FnMut(&OperaState)) -> Result<Trajectory> {
    let t_max = spec.horizon;
    if t_max < 2 {
        return Err(Error::input(format!("horizon must be at least 2, got {t_max}")));
    }
    if let Some(bad) = spec.record_at.iter().find(|t| **t < 1 || **t > t_max + 1) {
        return Err(Error::input(format!("record index {bad} outside [1, {}]", t_max + 1)));
    }
    let dim = crate::kernel::Kernel::domain_dim(&spec.kernel);
    if measure.dim() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: measure.dim(),
        });
    }
    let mut state = OperaState::new(spec.kernel.clone(), spec.engine)?.with_merged_centers(spec.merge_centers);
    if let Measure::Discrete(d) = measure {
        state = state.with_known_points(d.support());
    }
    let radius = match spec.algorithm {
        Algorithm::Opera => None,
        Algorithm::Pogd { radius } => {
            if !(radius > 0.0) {
                return Err(Error::config(format!(
                    "projection radius must be positive, got {radius}"
                )));
            }
            Some(radius)
        }
    };

    let mut record_at = spec.record_at.clone();
    record_at.sort_unstable();
    record_at.dedup();
    let mut next = 0;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let samples: Vec<Sample> = (0..t_max).map(|_| measure.sample(&mut rng)).collect();
    let mut records = Vec::with_capacity(record_at.len());

    let mut record = |state: &OperaState, records: &mut Vec<Record>| -> Result<()> {
        let t = state.t();
        while next < record_at.len() && record_at[next] == t {
            let error = error_of(measure, state, spec, t)?;
            let averaged_error = if spec.track_average {
                match state.average_snapshot() {
                    Some(avg) => Some(error_of(measure, &avg, spec, t)?),
                    None => None,
                }
            } else {
                None
            };
            records.push(Record {
                t,
                gamma_t: spec.steps.gamma(t),
                norm_k: state.norm_k(),
                error,
                averaged_error,
                snapshot: spec.keep_snapshots.then(|| state.snapshot()),
            });
            next += 1;
        }
        Ok(())
    };

    observe(&state);
    record(&state, &mut records)?;
    state.push_first(samples[0].clone())?;
    for (i, z) in samples.iter().enumerate().skip(1) {
        if spec.track_average {
            state.accumulate_average();
        }
        observe(&state);
        record(&state, &mut records)?;
        let t = i + 1;
        state.step(z.clone(), spec.steps.gamma(t))?;
        if let Some(r) = radius {
            state.project(r);
        }
    }
    if spec.track_average {
        state.accumulate_average();
    }
    observe(&state);
    record(&state, &mut records)?;
    Ok(Trajectory { records, samples })
}

fn error_of<F: PairwiseFunction>(measure: &Measure, f: &F, spec: &RunSpec, t: usize) -> Result<Estimate> {
    match measure {
        Measure::Discrete(_) => measure.rho_error(f),
        Measure::Sampler(_) => {
            let seed = spec.seed ^ (t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let target = measure.pairwise_target();
            measure.rho_norm_monte_carlo(
                &|a: &[f64], b: &[f64]| f.value(a, b) - target.value(a, b),
                spec.mc_pairs,
                &mut rng,
            )
        }
    }
}
