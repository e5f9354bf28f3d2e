//! The error decomposition of an OPERA trajectory on a discrete support grid.
//!
//! All operators act on grid functions (see [`SpectralModel`]). At step `t`,
//! with `n = t - 1` past samples and `q_j` the grid index of `(x_t, x_j)`:
//!
//! ```text
//! L^_t f  = (1/n) sum_j f(q_j) K_{q_j}
//! S^_t    = (1/n) sum_j (y_t - y_j) K_{q_j}
//! L~_t f  = (1/n) sum_j sum_a p_a f(u_a, x_j) K_{(u_a, x_j)}
//! S~_t    = (1/n) sum_j sum_a p_a (f_rho(u_a) - y_j) K_{(u_a, x_j)}
//! A^t     = (L~_t - L_K) f_t - (S~_t - L_K f~)
//! B^t     = (L^_t - L~_t) f_t - (S^_t - S~_t)
//! ```
//!
//! so that `f_{t+1} - f~ = (I - gamma_t L_K)(f_t - f~) - gamma_t (A^t + B^t)`.
//! `L~_t` and `S~_t` are the conditional expectations of `L^_t` and `S^_t`
//! over `z_t`, which makes `B^t` a martingale difference.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::learner::{run_with, RunSpec, StepRule};
use crate::measure::{DiscreteMeasure, Measure, Sample};
use crate::theory::spectral::SpectralModel;
use crate::theory::{ReportBuilder, VerificationReport};

/// Default tolerance on the one-step residual.
pub const STEP_TOL: f64 = 1e-8;
/// Default tolerance on the unrolled residual at the final step.
pub const UNROLLED_TOL: f64 = 1e-7;

/// Grid representations of the step-`t` operators, applied to `f_t`.
#[derive(Debug, Clone)]
pub struct DecompositionFrame {
    pub t: usize,
    pub gamma: f64,
    pub l_hat_f: DVector<f64>,
    pub s_hat: DVector<f64>,
    pub l_tilde_f: DVector<f64>,
    pub s_tilde: DVector<f64>,
    pub a: DVector<f64>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    /// Max over steps of the sup-norm one-step residual.
    pub max_step_residual: f64,
    /// Sup-norm residual of the unrolled form at `T + 1`.
    pub unrolled_residual: f64,
    pub frames: Vec<DecompositionFrame>,
}

/// `f~(u_a, u_b) = f_rho(u_a) - f_rho(u_b)` on the grid.
pub fn target_grid(model: &SpectralModel, meas: &DiscreteMeasure) -> DVector<f64> {
    let f = meas.f_rho_values();
    DVector::from_fn(model.n(), |q, _| {
        let (a, b) = model.pair_of(q);
        f[a] - f[b]
    })
}

fn check_match(model: &SpectralModel, meas: &DiscreteMeasure) -> Result<()> {
    if model.support() != meas.support() {
        return Err(Error::input("spectral model and measure have different supports"));
    }
    let m = meas.m();
    let p = meas.probs();
    for q in 0..model.n() {
        let w = p[q / m] * p[q % m];
        if (model.weights()[q] - w).abs() > 1e-14 {
            return Err(Error::input("spectral model and measure have different weights"));
        }
    }
    Ok(())
}

fn indices(meas: &DiscreteMeasure, samples: &[Sample]) -> Result<Vec<usize>> {
    samples
        .iter()
        .map(|z| {
            meas.index_of(&z.x)
                .ok_or_else(|| Error::input(format!("sample {:?} is not a support point", z.x)))
        })
        .collect()
}

/// Step-`t` frame from the history `idx[..t-1]`, the new point `idx[t-1]` and `f_t`.
#[allow(clippy::too_many_arguments)]
fn frame(
    model: &SpectralModel,
    meas: &DiscreteMeasure,
    l_target: &DVector<f64>,
    idx: &[usize],
    ys: &[f64],
    f_t: &DVector<f64>,
    t: usize,
    gamma: f64,
) -> DecompositionFrame {
    let m = model.m();
    let n = model.n();
    let k = model.kernel_matrix();
    let probs = meas.probs();
    let fr = meas.f_rho_values();
    let past = (t - 1) as f64;
    let (it, yt) = (idx[t - 1], ys[t - 1]);
    let mut l_hat_f = DVector::zeros(n);
    let mut s_hat = DVector::zeros(n);
    // Past points enter L~ and S~ only through their counts and label sums.
    let mut count = vec![0.0; m];
    let mut ysum = vec![0.0; m];
    for j in 0..t - 1 {
        let q = model.pair_index(it, idx[j]);
        l_hat_f.axpy(f_t[q] / past, &k.column(q), 1.0);
        s_hat.axpy((yt - ys[j]) / past, &k.column(q), 1.0);
        count[idx[j]] += 1.0;
        ysum[idx[j]] += ys[j];
    }
    let mut l_tilde_f = DVector::zeros(n);
    let mut s_tilde = DVector::zeros(n);
    for b in 0..m {
        if count[b] == 0.0 {
            continue;
        }
        for a in 0..m {
            let q = model.pair_index(a, b);
            let w = probs[a] / past;
            l_tilde_f.axpy(w * count[b] * f_t[q], &k.column(q), 1.0);
            s_tilde.axpy(w * (count[b] * fr[a] - ysum[b]), &k.column(q), 1.0);
        }
    }
    let l_f = model.apply_direct(f_t);
    let a = &l_tilde_f - &l_f - (&s_tilde - l_target);
    let b = &l_hat_f - &l_tilde_f - (&s_hat - &s_tilde);
    DecompositionFrame {
        t,
        gamma,
        l_hat_f,
        s_hat,
        l_tilde_f,
        s_tilde,
        a,
        b,
    }
}

/// Checks the decomposition along recorded iterates `f_1, ..., f_{T+1}` (grid
/// functions) produced from `samples` with step sizes `steps`.
pub fn decomposition_residual(
    model: &SpectralModel,
    meas: &DiscreteMeasure,
    iterates: &[DVector<f64>],
    samples: &[Sample],
    steps: &StepRule,
) -> Result<DecompositionResult> {
    check_match(model, meas)?;
    let horizon = samples.len();
    if horizon < 2 || iterates.len() != horizon + 1 {
        return Err(Error::input(format!(
            "need T >= 2 samples and T + 1 iterates, got {} and {}",
            horizon,
            iterates.len()
        )));
    }
    if let Some(f) = iterates.iter().find(|f| f.len() != model.n()) {
        return Err(Error::Dimension {
            expected: model.n(),
            got: f.len(),
        });
    }
    let idx = indices(meas, samples)?;
    let ys: Vec<f64> = samples.iter().map(|z| z.y).collect();
    let target = target_grid(model, meas);
    let l_target = model.apply_direct(&target);
    let lop = model.operator_matrix();
    let n = model.n();

    let mut frames = Vec::with_capacity(horizon - 1);
    let mut max_step = 0.0f64;
    for t in 2..=horizon {
        let gamma = steps.gamma(t);
        let f_t = &iterates[t - 1];
        let fr = frame(model, meas, &l_target, &idx, &ys, f_t, t, gamma);
        let err = f_t - &target;
        let predicted = &err - (&lop * &err) * gamma - (&fr.a + &fr.b) * gamma;
        let actual = &iterates[t] - &target;
        max_step = max_step.max((actual - predicted).amax());
        frames.push(fr);
    }

    // f_{T+1} - f~ = prod_{j=2}^T (I - gamma_j L)(f_2 - f~)
    //              - sum_j gamma_j prod_{l=j+1}^T (I - gamma_l L)(A^j + B^j)
    let eye = DMatrix::<f64>::identity(n, n);
    let mut suffix = eye.clone();
    let mut acc = DVector::zeros(n);
    for fr in frames.iter().rev() {
        acc += (&suffix * (&fr.a + &fr.b)) * fr.gamma;
        suffix = &suffix * (&eye - &lop * fr.gamma);
    }
    let unrolled = &suffix * (&iterates[1] - &target) - acc;
    let unrolled_residual = (&iterates[horizon] - &target - unrolled).amax();
    Ok(DecompositionResult {
        max_step_residual: max_step,
        unrolled_residual,
        frames,
    })
}

/// Runs `spec` on `meas` and returns the grid values of `f_1, ..., f_{T+1}`
/// together with the consumed samples.
pub fn record_iterates(
    spec: &RunSpec,
    meas: &DiscreteMeasure,
    model: &SpectralModel,
) -> Result<(Vec<DVector<f64>>, Vec<Sample>)> {
    check_match(model, meas)?;
    let mut iterates = Vec::with_capacity(spec.horizon + 1);
    let measure = Measure::Discrete(meas.clone());
    let traj = run_with(spec, &measure, |s| iterates.push(model.grid_function(s)))?;
    Ok((iterates, traj.samples))
}

/// Runs `spec`, checks the decomposition and reports both residuals.
pub fn decomposition_check(
    spec: &RunSpec,
    meas: &DiscreteMeasure,
    model: &SpectralModel,
    step_tol: f64,
    unrolled_tol: f64,
) -> Result<(VerificationReport, DecompositionResult)> {
    let (iterates, samples) = record_iterates(spec, meas, model)?;
    let res = decomposition_residual(model, meas, &iterates, &samples, &spec.steps)?;
    let mut b = ReportBuilder::new("decomposition")
        .param("m", meas.m())
        .param("T", spec.horizon)
        .param("seed", spec.seed)
        .param("max_step_residual", res.max_step_residual)
        .param("unrolled_residual", res.unrolled_residual);
    b.case(res.max_step_residual, step_tol, 0.0, || "one-step recursion".into());
    b.case(res.unrolled_residual, unrolled_tol, 0.0, || "unrolled form".into());
    Ok((b.finish(), res))
}

/// Conditional mean of `B^t` over fresh draws of `z_t` with the history and
/// `f_t` held fixed.
#[derive(Debug, Clone)]
pub struct MartingaleMean {
    /// `||mean B^t||_rho`.
    pub mean_norm: f64,
    /// `sqrt(sum_q w_q se_q^2)` from the per-point standard errors.
    pub stderr_norm: f64,
    pub n_draws: usize,
}

impl MartingaleMean {
    pub fn within(&self, multiple: f64) -> bool {
        self.mean_norm <= multiple * self.stderr_norm
    }
}

pub fn martingale_mean_check(
    model: &SpectralModel,
    meas: &DiscreteMeasure,
    history: &[Sample],
    f_t: &DVector<f64>,
    n_draws: usize,
    rng: &mut impl Rng,
) -> Result<MartingaleMean> {
    check_match(model, meas)?;
    if history.is_empty() || n_draws < 2 {
        return Err(Error::input("need a nonempty history and at least two draws"));
    }
    if f_t.len() != model.n() {
        return Err(Error::Dimension {
            expected: model.n(),
            got: f_t.len(),
        });
    }
    let t = history.len() + 1;
    let mut idx = indices(meas, history)?;
    let mut ys: Vec<f64> = history.iter().map(|z| z.y).collect();
    idx.push(0);
    ys.push(0.0);
    let target = target_grid(model, meas);
    let l_target = model.apply_direct(&target);
    let measure = Measure::Discrete(meas.clone());
    let n = model.n();
    let mut sum = DVector::zeros(n);
    let mut sum_sq = DVector::zeros(n);
    for _ in 0..n_draws {
        let z = measure.sample(rng);
        idx[t - 1] = meas.index_of(&z.x).expect("sampled point lies on the support");
        ys[t - 1] = z.y;
        let fr = frame(model, meas, &l_target, &idx, &ys, f_t, t, 0.0);
        sum += &fr.b;
        sum_sq += fr.b.component_mul(&fr.b);
    }
    let nd = n_draws as f64;
    let mean = sum / nd;
    let var = (sum_sq / nd - mean.component_mul(&mean)).map(|v| v.max(0.0) * nd / (nd - 1.0));
    let se2 = var / nd;
    Ok(MartingaleMean {
        mean_norm: model.rho_norm(&mean),
        stderr_norm: se2.dot(model.weights()).sqrt(),
        n_draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{PairwiseKernel, UnivariateKernel};
    use crate::learner::Schedule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(m: usize) -> (SpectralModel, DiscreteMeasure, PairwiseKernel) {
        let support: Vec<Vec<f64>> = (0..m).map(|i| vec![i as f64 / (m - 1) as f64]).collect();
        let f: Vec<f64> = support.iter().map(|x| (3.0 * x[0]).sin()).collect();
        let meas = DiscreteMeasure::uniform(support, f, 0.2).unwrap();
        let k = PairwiseKernel::induced(UnivariateKernel::gaussian(0.5, 1).unwrap());
        (SpectralModel::build(&k, &meas).unwrap(), meas, k)
    }

    fn spec(k: &PairwiseKernel, horizon: usize, seed: u64) -> RunSpec {
        let s = Schedule::new(2.0 / 3.0, 2.0).unwrap();
        RunSpec::new(k.clone(), StepRule::Schedule(s), horizon, seed)
    }

    #[test]
    fn residuals_vanish_on_short_run() {
        let (model, meas, k) = setup(5);
        let (r, res) = decomposition_check(&spec(&k, 50, 7), &meas, &model, STEP_TOL, UNROLLED_TOL).unwrap();
        assert!(r.passed(), "{} {}", res.max_step_residual, res.unrolled_residual);
        assert_eq!(res.frames.len(), 49);
    }

    #[test]
    fn first_step_from_zero() {
        let (model, meas, k) = setup(4);
        let (iterates, samples) = record_iterates(&spec(&k, 2, 3), &meas, &model).unwrap();
        assert_eq!(iterates[1].amax(), 0.0);
        let res = decomposition_residual(&model, &meas, &iterates, &samples, &spec(&k, 2, 3).steps).unwrap();
        let target = target_grid(&model, &meas);
        let g = res.frames[0].gamma;
        let lhs = &iterates[2] - &target;
        let rhs = -&target + model.apply_direct(&target) * g - (&res.frames[0].a + &res.frames[0].b) * g;
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn martingale_mean_is_small() {
        let (model, meas, k) = setup(4);
        let (iterates, samples) = record_iterates(&spec(&k, 10, 11), &meas, &model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = martingale_mean_check(&model, &meas, &samples[..6], &iterates[6], 2000, &mut rng).unwrap();
        assert!(r.stderr_norm > 0.0);
        assert!(r.within(5.0), "{} vs {}", r.mean_norm, r.stderr_norm);
    }

    #[test]
    fn mismatched_measure_is_rejected() {
        let (model, _, k) = setup(4);
        let (_, other, _) = setup(5);
        assert!(matches!(
            record_iterates(&spec(&k, 5, 1), &other, &model),
            Err(Error::Input(_))
        ));
    }
}
