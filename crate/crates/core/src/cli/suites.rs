//! Verification suites runnable from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hypothesis::{isometry_check, DifferenceCombination};
use crate::kernel::{kappa, Pair, PairwiseKernel, UnivariateKernel};
use crate::learner::{run_with, Engine, RunSpec, Schedule, StepRule};
use crate::measure::{DiscreteMeasure, Measure};
use crate::theory::concentration::{bennett_coverage, pinelis_coverage, MartingaleKind, VectorDist};
use crate::theory::decomposition::{
    decomposition_check, martingale_mean_check, record_iterates, STEP_TOL, UNROLLED_TOL,
};
use crate::theory::lemmas::{sandwich_check, sum_bound_checks};
use crate::theory::operator::operator_product_norm_check;
use crate::theory::{ReportBuilder, SpectralModel, VerificationReport};

pub const DEFAULT_THETAS: [f64; 5] = [0.55, 0.6, 2.0 / 3.0, 0.75, 0.9];
pub const DEFAULT_MUS: [f64; 2] = [1.0, 2.0];

/// Equivalence tolerance between the direct and reduced engines.
pub const EQUIVALENCE_TOL: f64 = 1e-8;
/// Relative isometry tolerance `|a - b| <= tol (1 + b)`.
pub const ISOMETRY_TOL: f64 = 1e-8;

/// Uniform measure on `m` evenly spaced points of `[0, 1]` with a smooth target.
pub fn grid_measure(m: usize, noise: f64) -> Result<DiscreteMeasure> {
    if m < 2 {
        return Err(Error::input("need at least two support points"));
    }
    let support: Vec<Vec<f64>> = (0..m).map(|i| vec![i as f64 / (m - 1) as f64]).collect();
    let values = support.iter().map(|x| (std::f64::consts::PI * x[0]).sin()).collect();
    DiscreteMeasure::uniform(support, values, noise)
}

pub fn lemmas(thetas: &[f64], mus: &[f64], t_max: usize) -> Result<Vec<VerificationReport>> {
    let mut out = sum_bound_checks(thetas, mus, t_max)?;
    out.push(sandwich_check(thetas, mus, t_max)?);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn operators(
    betas: &[f64],
    theta: f64,
    mu: f64,
    dim: usize,
    trials: usize,
    windows: usize,
    seed: u64,
) -> Result<Vec<VerificationReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    betas
        .iter()
        .map(|&b| operator_product_norm_check(b, theta, mu, dim, trials, windows, &mut rng))
        .collect()
}

/// Bennett coverage for Rademacher and cube vectors, and Pinelis coverage for
/// both martingale constructions.
pub fn concentration(dim: usize, t: usize, delta: f64, trials: usize, seed: u64) -> Result<Vec<VerificationReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cube = VectorDist::Cube {
        offset: (0..dim).map(|i| 0.1 * i as f64).collect(),
        half_width: 1.0,
    };
    let mut out = Vec::new();
    for dist in [VectorDist::Rademacher { dim }, cube] {
        let mut c = bennett_coverage(&dist, t, delta, trials, &mut rng)?;
        c.report.parameters.insert("dist".into(), format!("{dist:?}").into());
        out.push(c.report);
    }
    for kind in [MartingaleKind::FixedDirection, MartingaleKind::Aligned] {
        out.push(pinelis_coverage(&kind, dim, t, delta, trials, &mut rng)?.report);
    }
    Ok(out)
}

fn schedule_for(k: &PairwiseKernel, meas: &DiscreteMeasure, theta: f64) -> Result<StepRule> {
    let kap = kappa(k, &Measure::Discrete(meas.clone()).domain())?.value;
    Ok(StepRule::Schedule(Schedule::new(theta, kap * kap)?))
}

/// One-step and unrolled residuals, plus the conditional mean of `B^t` at the
/// midpoint of the run.
pub fn decomposition(m: usize, horizon: usize, sigma: f64, theta: f64, seed: u64) -> Result<Vec<VerificationReport>> {
    let meas = grid_measure(m, 0.1)?;
    let k = PairwiseKernel::induced(UnivariateKernel::gaussian(sigma, 1)?);
    let model = SpectralModel::build(&k, &meas)?;
    let spec = RunSpec::new(k.clone(), schedule_for(&k, &meas, theta)?, horizon, seed);
    let (report, _) = decomposition_check(&spec, &meas, &model, STEP_TOL, UNROLLED_TOL)?;
    let (iterates, samples) = record_iterates(&spec, &meas, &model)?;
    let mid = (horizon / 2).max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mm = martingale_mean_check(&model, &meas, &samples[..mid - 1], &iterates[mid - 1], 2000, &mut rng)?;
    let mut b = ReportBuilder::new("martingale-mean")
        .param("t", mid)
        .param("draws", mm.n_draws)
        .param("mean_norm", mm.mean_norm)
        .param("stderr_norm", mm.stderr_norm);
    b.case(mm.mean_norm, 5.0 * mm.stderr_norm, 0.0, || format!("t={mid}"));
    Ok(vec![report, b.finish()])
}

/// Random difference combinations over gaussian and linear `G`.
pub fn isometry(trials: usize, seed: u64) -> Result<VerificationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = ReportBuilder::new("isometry")
        .param("trials", trials)
        .param("seed", seed);
    let mut worst = 0.0f64;
    for i in 0..trials {
        let dim = rng.random_range(1..=3usize);
        let base = if i % 2 == 0 {
            UnivariateKernel::gaussian(rng.random_range(0.2..2.0), dim)?
        } else {
            UnivariateKernel::linear(dim)?
        };
        let n = rng.random_range(1..=8usize);
        let point = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let pairs: Vec<Pair> = (0..n).map(|_| Pair::new(point(&mut rng), point(&mut rng))).collect();
        let coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let g = DifferenceCombination::new(base.clone(), pairs, coeffs)?;
        let (norm_g, norm_k) = isometry_check(&g)?;
        let gap = (norm_k - norm_g).abs();
        worst = worst.max(gap / (1.0 + norm_g));
        b.case(gap, ISOMETRY_TOL * (1.0 + norm_g), 0.0, || {
            format!("trial={i}, kernel={}, n={n}", crate::kernel::Kernel::spec(&base))
        });
    }
    let mut b = b.param("max_relative_gap", worst);
    if trials == 0 {
        b.note("no trials requested");
    }
    Ok(b.finish())
}

/// Largest `|f_t(a, b) - (g_t(a) - g_t(b))|` between the direct and reduced
/// engines over every support pair and every `t`, for one seed.
pub fn engine_deviation(
    k: &PairwiseKernel,
    meas: &DiscreteMeasure,
    steps: StepRule,
    horizon: usize,
    seed: u64,
) -> Result<f64> {
    let measure = Measure::Discrete(meas.clone());
    let support = meas.support();
    let mut direct: Vec<Vec<f64>> = Vec::new();
    let mut spec = RunSpec::new(k.clone(), steps, horizon, seed);
    spec.engine = Engine::Direct;
    run_with(&spec, &measure, |s| {
        direct.push(
            support
                .iter()
                .flat_map(|a| support.iter().map(move |b| (a, b)))
                .map(|(a, b)| s.evaluate(a, b))
                .collect(),
        )
    })?;
    let mut reduced: Vec<Vec<f64>> = Vec::new();
    spec.engine = Engine::Reduced;
    run_with(&spec, &measure, |s| {
        let at = |x: &Vec<f64>| s.univariate().map(|g| g.eval_at(x)).unwrap_or(0.0);
        reduced.push(
            support
                .iter()
                .flat_map(|a| support.iter().map(move |b| (a, b)))
                .map(|(a, b)| at(a) - at(b))
                .collect(),
        )
    })?;
    let mut worst = 0.0f64;
    for (d, r) in direct.iter().zip(&reduced) {
        for (x, y) in d.iter().zip(r) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}

pub fn equivalence(
    m: usize,
    horizon: usize,
    seeds: usize,
    sigma: f64,
    theta: f64,
    seed: u64,
) -> Result<VerificationReport> {
    let meas = grid_measure(m, 0.1)?;
    let k = PairwiseKernel::induced(UnivariateKernel::gaussian(sigma, 1)?);
    let steps = schedule_for(&k, &meas, theta)?;
    let mut b = ReportBuilder::new("equivalence")
        .param("m", m)
        .param("T", horizon)
        .param("seeds", seeds)
        .param("sigma", sigma);
    let mut worst = 0.0f64;
    for s in 0..seeds as u64 {
        let dev = engine_deviation(&k, &meas, steps, horizon, seed + s)?;
        worst = worst.max(dev);
        b.case(dev, EQUIVALENCE_TOL, 0.0, || format!("seed={}", seed + s));
    }
    Ok(b.param("max_deviation", worst).finish())
}
