//! Multi-trial execution of a configured experiment.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::config::{ExperimentConfig, Mode};
use crate::experiment::rates::{fit_rate, median, RateFit};
use crate::learner::{lemma1_bound, run, Algorithm, RunSpec, StepRule};
use crate::measure::Measure;
use crate::theory::decomposition::target_grid;
use crate::theory::spectral::MAX_GRID;
use crate::theory::{k_functional, theorem1_bound, kfunctional_argument, SpectralModel};

/// One recorded hypothesis of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub t: usize,
    pub gamma_t: f64,
    pub error_rho: f64,
    pub error_rho_stderr: Option<f64>,
    pub norm_k: f64,
    pub lemma1_bound: f64,
    pub thm1_bound: Option<f64>,
    /// Error of the averaged iterate, tracked only when modes are compared.
    pub averaged_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub mode: Mode,
    /// Sorted by `t`.
    pub rows: Vec<Row>,
}

impl TrialResult {
    pub fn final_row(&self) -> Option<&Row> {
        self.rows.last()
    }
}

/// Quantities shared by every trial of an experiment.
#[derive(Debug, Clone)]
pub struct Context {
    pub label_bound: f64,
    pub record_at: Vec<usize>,
    /// Bound for the hypothesis at index `t`, when computable.
    pub thm1: BTreeMap<usize, f64>,
    pub steps: BTreeMap<Mode, StepRule>,
}

/// K-functional values need an exact grid, so the bound column is filled
/// only for discrete measures within the grid cap and `theta` in `(1/2, 1)`.
fn bound_column(cfg: &ExperimentConfig, label_bound: f64, record_at: &[usize]) -> Result<BTreeMap<usize, f64>> {
    let mut out = BTreeMap::new();
    let d = match &cfg.measure {
        Measure::Discrete(d) if d.m() * d.m() <= MAX_GRID => d,
        _ => return Ok(out),
    };
    if !(cfg.theta > 0.5 && cfg.theta < 1.0) {
        return Ok(out);
    }
    let model = SpectralModel::build(&cfg.kernel, d)?;
    let target = target_grid(&model, d);
    for &t in record_at {
        let horizon = t - 1;
        if horizon < 4 {
            continue;
        }
        let s = kfunctional_argument(cfg.theta, cfg.mu, cfg.kappa, horizon);
        let kf = k_functional(&model, &target, s)?;
        let b = theorem1_bound(cfg.theta, cfg.mu, cfg.kappa, label_bound, horizon, cfg.delta, kf)?;
        out.insert(t, b);
    }
    Ok(out)
}

impl Context {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let label_bound = cfg.measure.label_bound();
        let record_at = cfg.record_indices();
        let thm1 = bound_column(cfg, label_bound, &record_at)?;
        let mut steps = BTreeMap::new();
        for &mode in &cfg.modes {
            let rule = match mode {
                Mode::Opera => StepRule::Schedule(cfg.schedule()?),
                Mode::Pogd => {
                    let r = cfg.radius.ok_or_else(|| Error::config("mode pogd needs `R`"))?;
                    cfg.eta_rule()?.step_rule(r, label_bound, cfg.kappa, cfg.max_horizon())
                }
            };
            steps.insert(mode, rule);
        }
        Ok(Context {
            label_bound,
            record_at,
            thm1,
            steps,
        })
    }
}

/// Runs one trial of one mode with seed `cfg.seed + trial`.
pub fn run_trial(cfg: &ExperimentConfig, ctx: &Context, mode: Mode, trial: usize) -> Result<TrialResult> {
    let seed = cfg.seed.wrapping_add(trial as u64);
    let steps = ctx.steps[&mode];
    let mut spec = RunSpec::new(cfg.kernel.clone(), steps, cfg.max_horizon(), seed);
    spec.engine = cfg.engine;
    spec.algorithm = match mode {
        Mode::Opera => Algorithm::Opera,
        Mode::Pogd => Algorithm::Pogd {
            radius: cfg.radius.expect("validated"),
        },
    };
    spec.record_at = ctx.record_at.clone();
    spec.merge_centers = cfg.merge_centers;
    spec.mc_pairs = cfg.mc_pairs;
    spec.track_average = cfg.modes.len() > 1;
    let traj = run(&spec, &cfg.measure)?;
    let rows = traj
        .records
        .iter()
        .map(|r| Row {
            t: r.t,
            gamma_t: r.gamma_t,
            error_rho: r.error.value,
            error_rho_stderr: r.error.stderr,
            norm_k: r.norm_k,
            lemma1_bound: lemma1_bound(ctx.label_bound, &steps, r.t),
            thm1_bound: ctx.thm1.get(&r.t).copied(),
            averaged_error: r.averaged_error.map(|e| e.value),
        })
        .collect();
    Ok(TrialResult {
        trial,
        seed,
        mode,
        rows,
    })
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

/// All trials of all configured modes, ordered by mode then trial id.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    let ctx = Context::new(cfg)?;
    let jobs: Vec<(Mode, usize)> = cfg
        .modes
        .iter()
        .flat_map(|&m| (0..cfg.n_trials).map(move |i| (m, i)))
        .collect();
    let results: Vec<Result<TrialResult>> =
        pool(cfg.workers)?.install(|| jobs.par_iter().map(|&(m, i)| run_trial(cfg, &ctx, m, i)).collect());
    let mut out = results.into_iter().collect::<Result<Vec<_>>>()?;
    out.sort_by_key(|r| (r.mode, r.trial));
    Ok(out)
}

/// Per-mode summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    pub n_trials: usize,
    pub medians_by_t: BTreeMap<usize, f64>,
    pub rate_fit: Option<RateFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_fit_error: Option<String>,
    /// Fraction of trials whose final error exceeds the bound column.
    pub bound_violation_fraction: Option<f64>,
    pub final_median: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_median_averaged: Option<f64>,
}

pub fn medians_by_t(results: &[&TrialResult]) -> BTreeMap<usize, f64> {
    let mut by_t: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in results {
        for row in &r.rows {
            by_t.entry(row.t).or_default().push(row.error_rho);
        }
    }
    by_t.into_iter().map(|(t, v)| (t, median(&v))).collect()
}

pub fn bound_violation_fraction(results: &[&TrialResult]) -> Option<f64> {
    let judged: Vec<bool> = results
        .iter()
        .filter_map(|r| {
            let row = r.rows.iter().rev().find(|row| row.thm1_bound.is_some())?;
            Some(row.error_rho > row.thm1_bound.unwrap())
        })
        .collect();
    if judged.is_empty() {
        return None;
    }
    Some(judged.iter().filter(|v| **v).count() as f64 / judged.len() as f64)
}

pub fn summarize_mode(results: &[&TrialResult], t_min: usize) -> ModeSummary {
    let medians = medians_by_t(results);
    let (rate_fit, rate_fit_error) = match fit_rate(results, t_min) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let finals: Vec<f64> = results
        .iter()
        .filter_map(|r| r.final_row())
        .map(|r| r.error_rho)
        .collect();
    let averaged: Vec<f64> = results
        .iter()
        .filter_map(|r| r.final_row().and_then(|row| row.averaged_error))
        .collect();
    ModeSummary {
        n_trials: results.len(),
        medians_by_t: medians,
        rate_fit,
        rate_fit_error,
        bound_violation_fraction: bound_violation_fraction(results),
        final_median: median(&finals),
        final_median_averaged: (!averaged.is_empty()).then(|| median(&averaged)),
    }
}

/// Groups results by mode and summarizes each.
pub fn summarize(results: &[TrialResult], t_min: usize) -> BTreeMap<Mode, ModeSummary> {
    let mut by_mode: BTreeMap<Mode, Vec<&TrialResult>> = BTreeMap::new();
    for r in results {
        by_mode.entry(r.mode).or_default().push(r);
    }
    by_mode
        .into_iter()
        .map(|(m, rs)| (m, summarize_mode(&rs, t_min)))
        .collect()
}

/// One `(seed, t)` row present in both modes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedRow {
    pub seed: u64,
    pub t: usize,
    pub opera_error: f64,
    pub pogd_error: f64,
    pub opera_norm_k: f64,
    pub pogd_norm_k: f64,
    pub opera_averaged_error: Option<f64>,
    pub pogd_averaged_error: Option<f64>,
}

/// Joins OPERA and POGD rows on `(seed, t)`.
pub fn pair_modes(results: &[TrialResult]) -> Vec<PairedRow> {
    let mut pogd: BTreeMap<(u64, usize), &Row> = BTreeMap::new();
    for r in results.iter().filter(|r| r.mode == Mode::Pogd) {
        for row in &r.rows {
            pogd.insert((r.seed, row.t), row);
        }
    }
    let mut out = Vec::new();
    for r in results.iter().filter(|r| r.mode == Mode::Opera) {
        for row in &r.rows {
            if let Some(p) = pogd.get(&(r.seed, row.t)) {
                out.push(PairedRow {
                    seed: r.seed,
                    t: row.t,
                    opera_error: row.error_rho,
                    pogd_error: p.error_rho,
                    opera_norm_k: row.norm_k,
                    pogd_norm_k: p.norm_k,
                    opera_averaged_error: row.averaged_error,
                    pogd_averaged_error: p.averaged_error,
                });
            }
        }
    }
    out.sort_by_key(|p| (p.seed, p.t));
    out
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub results: Vec<TrialResult>,
    pub paired: Vec<PairedRow>,
    pub summary: BTreeMap<Mode, ModeSummary>,
}

/// Runs OPERA and POGD on the same seeds.
pub fn compare_modes(cfg: &ExperimentConfig) -> Result<Comparison> {
    if !(cfg.modes.contains(&Mode::Opera) && cfg.modes.contains(&Mode::Pogd)) {
        return Err(Error::config("compare needs `mode = opera,pogd`"));
    }
    let results = run_experiment(cfg)?;
    let paired = pair_modes(&results);
    let summary = summarize(&results, cfg.t_min);
    Ok(Comparison {
        results,
        paired,
        summary,
    })
}
