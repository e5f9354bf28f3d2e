//! Acceptance suite. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits nonzero if any criterion fails.
//!
//! Reference values are recomputed here from first principles wherever that is
//! practical, rather than read back from the library.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use opera::cli::suites;
use opera::experiment::runner::summarize;
use opera::experiment::{run_experiment, ExperimentConfig, TrialResult};
use opera::hypothesis::{isometry_check, DifferenceCombination};
use opera::kernel::{kappa, Pair, PairwiseKernel, UnivariateKernel};
use opera::learner::{run, run_with, Algorithm, Engine, EtaRule, OperaState, RunSpec, Schedule, StepRule};
use opera::measure::{DiscreteMeasure, Measure, Sample};
use opera::theory::concentration::{
    bennett_coverage, coverage_tolerance, pinelis_coverage, MartingaleKind, VectorDist,
};
use opera::theory::constants::c_theta;
use opera::theory::decomposition::{decomposition_check, STEP_TOL, UNROLLED_TOL};
use opera::theory::SpectralModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;
type Criterion = (usize, &'static str, fn() -> Outcome);

const SIGMA: f64 = 0.5;
const THETA_23: f64 = 2.0 / 3.0;

fn gauss(x: f64, y: f64) -> f64 {
    (-(x - y) * (x - y) / SIGMA).exp()
}

/// `sqrt(2 - 2 G)` at the diameter of `[0, 1]`.
fn kappa_unit() -> f64 {
    (2.0 - 2.0 * (-1.0 / SIGMA).exp()).sqrt()
}

fn grid(m: usize) -> DiscreteMeasure {
    suites::grid_measure(m, 0.1).unwrap()
}

fn induced() -> PairwiseKernel {
    PairwiseKernel::induced(UnivariateKernel::gaussian(SIGMA, 1).unwrap())
}

fn schedule(theta: f64, mu: f64) -> StepRule {
    StepRule::Schedule(Schedule::new(theta, mu).unwrap())
}

fn gamma(theta: f64, mu: f64, t: usize) -> f64 {
    (t as f64).powf(-theta) / mu
}

/// `2 M sqrt(sum_{j=2}^{t-1} gamma_j)`.
fn norm_bound(label_bound: f64, theta: f64, mu: f64, t: usize) -> f64 {
    let s: f64 = (2..t).map(|j| gamma(theta, mu, j)).sum();
    2.0 * label_bound * s.sqrt()
}

fn label_bound(meas: &DiscreteMeasure) -> f64 {
    meas.f_rho_values().iter().fold(0.0f64, |a, v| a.max(v.abs())) + 0.1
}

fn support_1d(meas: &DiscreteMeasure) -> Vec<f64> {
    meas.support().iter().map(|x| x[0]).collect()
}

/// The pairwise recursion kept as coefficients on every support pair, with
/// the kernel matrix on the `m^2` pair grid built from the gaussian formula.
struct NaivePairwise {
    m: usize,
    kmat: Vec<f64>,
    values: Vec<f64>,
    past: Vec<(usize, f64)>,
}

impl NaivePairwise {
    fn new(u: &[f64]) -> Self {
        let m = u.len();
        let n = m * m;
        let mut kmat = vec![0.0; n * n];
        for p in 0..n {
            let (a, b) = (u[p / m], u[p % m]);
            for q in 0..n {
                let (c, d) = (u[q / m], u[q % m]);
                kmat[p * n + q] = gauss(a, c) + gauss(b, d) - gauss(a, d) - gauss(b, c);
            }
        }
        NaivePairwise {
            m,
            kmat,
            values: vec![0.0; n],
            past: Vec::new(),
        }
    }

    fn step(&mut self, idx: usize, y: f64, step: f64) {
        let n = self.m * self.m;
        if !self.past.is_empty() {
            let mut delta = vec![0.0; n];
            let scale = step / self.past.len() as f64;
            for &(j, yj) in &self.past {
                let q = idx * self.m + j;
                delta[q] -= scale * (self.values[q] - y + yj);
            }
            for (p, v) in self.values.iter_mut().enumerate() {
                *v += (0..n).map(|q| self.kmat[p * n + q] * delta[q]).sum::<f64>();
            }
        }
        self.past.push((idx, y));
    }
}

/// Grid values `f_1, ..., f_{T+1}` of the naive recursion on `samples`.
fn naive_iterates(meas: &DiscreteMeasure, samples: &[Sample], theta: f64, mu: f64) -> Vec<Vec<f64>> {
    let mut o = NaivePairwise::new(&support_1d(meas));
    let mut out = vec![o.values.clone()];
    for (i, z) in samples.iter().enumerate() {
        o.step(meas.index_of(&z.x).unwrap(), z.y, gamma(theta, mu, i + 1));
        out.push(o.values.clone());
    }
    out
}

fn grid_of_state(s: &OperaState, u: &[Vec<f64>], reduced_form: bool) -> Vec<f64> {
    let g = |x: &Vec<f64>| s.univariate().map_or(0.0, |g| g.eval_at(x));
    let mut v = Vec::with_capacity(u.len() * u.len());
    for a in u {
        for b in u {
            v.push(if reduced_form { g(a) - g(b) } else { s.evaluate(a, b) });
        }
    }
    v
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

fn equivalence() -> Outcome {
    let meas = grid(5);
    let measure = Measure::Discrete(meas.clone());
    let mu = kappa_unit().powi(2);
    let (horizon, tol) = (300, 1e-8);
    let mut worst_oracle = 0.0f64;
    let mut worst_engines = 0.0f64;
    for seed in 0..5u64 {
        let spec = RunSpec::new(induced(), schedule(THETA_23, mu), horizon, seed);
        let mut reduced = Vec::new();
        let traj = run_with(&spec, &measure, |s| {
            reduced.push(grid_of_state(s, meas.support(), true))
        })
        .map_err(|e| e.to_string())?;
        let oracle = naive_iterates(&meas, &traj.samples, THETA_23, mu);
        if oracle.len() != reduced.len() {
            return Err(format!(
                "{} oracle iterates vs {} recorded",
                oracle.len(),
                reduced.len()
            ));
        }
        worst_oracle = worst_oracle.max(max_abs_diff(&oracle, &reduced));
        let dev = suites::engine_deviation(&induced(), &meas, spec.steps, horizon, seed).map_err(|e| e.to_string())?;
        worst_engines = worst_engines.max(dev);
    }
    let worst = worst_oracle.max(worst_engines);
    Ok((
        worst <= tol,
        format!("max deviation {worst:.3e} (naive pair recursion {worst_oracle:.3e}, direct engine {worst_engines:.3e}), tol {tol:e}"),
    ))
}

fn norm_invariant() -> Outcome {
    let meas = grid(8);
    let measure = Measure::Discrete(meas.clone());
    let kap = kappa_unit();
    let lib_kappa = kappa(&induced(), &measure.domain()).map_err(|e| e.to_string())?.value;
    if (lib_kappa - kap).abs() > 1e-12 {
        return Err(format!("kappa {lib_kappa} differs from {kap}"));
    }
    let mu = kap * kap;
    let m_bound = label_bound(&meas);
    let u = support_1d(&meas);
    let gmat: Vec<Vec<f64>> = u.iter().map(|a| u.iter().map(|b| gauss(*a, *b)).collect()).collect();
    let (mut violations, mut steps, mut worst_ratio, mut worst_norm_gap) = (0usize, 0usize, 0.0f64, 0.0f64);
    for theta in [0.6, THETA_23, 0.75] {
        let mut prefix = vec![0.0; 1002];
        for t in 2..1002 {
            prefix[t] = prefix[t - 1] + if t >= 3 { gamma(theta, mu, t - 1) } else { 0.0 };
        }
        for seed in 0..20u64 {
            let spec = RunSpec::new(induced(), schedule(theta, mu), 1000, seed);
            run_with(&spec, &measure, |s| {
                let t = s.t();
                let bound = 2.0 * m_bound * prefix[t].sqrt();
                // Aggregate the univariate coefficients per support point.
                let mut c = vec![0.0; u.len()];
                if let Some(g) = s.univariate() {
                    for (x, a) in g.centers().iter().zip(g.coefficients()) {
                        c[meas.index_of(x).expect("centers lie on the support")] += a;
                    }
                }
                let mut q = 0.0;
                for (i, ci) in c.iter().enumerate() {
                    for (j, cj) in c.iter().enumerate() {
                        q += ci * cj * gmat[i][j];
                    }
                }
                let norm = q.max(0.0).sqrt();
                worst_norm_gap = worst_norm_gap.max((norm - s.norm_k()).abs() / (1.0 + norm));
                let lhs = norm.max(s.norm_k());
                steps += 1;
                if bound > 0.0 {
                    worst_ratio = worst_ratio.max(lhs / bound);
                }
                if lhs > bound * (1.0 + 1e-9) {
                    violations += 1;
                }
            })
            .map_err(|e| e.to_string())?;
        }
    }
    Ok((
        violations == 0 && worst_norm_gap < 1e-8,
        format!(
            "{violations} violations over {steps} steps, max norm/bound {worst_ratio:.4}, library vs recomputed norm gap {worst_norm_gap:.2e}"
        ),
    ))
}

fn decomposition() -> Outcome {
    let m = 5;
    let horizon = 50;
    let meas = grid(m);
    let measure = Measure::Discrete(meas.clone());
    let mu = kappa_unit().powi(2);
    let model = SpectralModel::build(&induced(), &meas).map_err(|e| e.to_string())?;
    let spec = RunSpec::new(induced(), schedule(THETA_23, mu), horizon, 3);
    let (report, lib) = decomposition_check(&spec, &meas, &model, STEP_TOL, UNROLLED_TOL).map_err(|e| e.to_string())?;

    // Recompute every operator on the pair grid from the samples.
    let samples = run(&spec, &measure).map_err(|e| e.to_string())?.samples;
    let iterates = naive_iterates(&meas, &samples, THETA_23, mu);
    let u = support_1d(&meas);
    let n = m * m;
    let kmat = NaivePairwise::new(&u).kmat;
    let p = meas.probs();
    let f_rho = meas.f_rho_values();
    let k = DMatrix::from_row_slice(n, n, &kmat);
    let w = DVector::from_fn(n, |q, _| p[q / m] * p[q % m]);
    let l_op = &k * DMatrix::from_diagonal(&w);
    let target = DVector::from_fn(n, |q, _| f_rho[q / m] - f_rho[q % m]);
    let l_target = &l_op * &target;
    let col = |q: usize| k.column(q).into_owned();
    let ident = DMatrix::<f64>::identity(n, n);

    let mut step_res = 0.0f64;
    let mut forcing = Vec::new();
    for t in 2..=horizon {
        let f = DVector::from_column_slice(&iterates[t - 1]);
        let next = DVector::from_column_slice(&iterates[t]);
        let g = gamma(THETA_23, mu, t);
        let it = meas.index_of(&samples[t - 1].x).unwrap();
        let yt = samples[t - 1].y;
        let past = &samples[..t - 1];
        let nf = past.len() as f64;
        let (mut l_hat, mut s_hat, mut l_tilde, mut s_tilde) = (
            DVector::zeros(n),
            DVector::zeros(n),
            DVector::zeros(n),
            DVector::zeros(n),
        );
        for z in past {
            let j = meas.index_of(&z.x).unwrap();
            let q = it * m + j;
            l_hat += col(q) * (f[q] / nf);
            s_hat += col(q) * ((yt - z.y) / nf);
            for a in 0..m {
                let qa = a * m + j;
                l_tilde += col(qa) * (p[a] * f[qa] / nf);
                s_tilde += col(qa) * (p[a] * (f_rho[a] - z.y) / nf);
            }
        }
        let l_f = &l_op * &f;
        let a_term = (&l_tilde - &l_f) - (&s_tilde - &l_target);
        let b_term = (&l_hat - &l_tilde) - (&s_hat - &s_tilde);
        let predicted = (&ident - &l_op * g) * (&f - &target) - (&a_term + &b_term) * g;
        step_res = step_res.max((&next - &target - predicted).amax());
        forcing.push((g, a_term + b_term));
    }
    // Unroll from f_2: f_{T+1} - f~ = prod(I - g L)(f_2 - f~) - sum g_t prod_{l>t}(I - g_l L)(A_t + B_t).
    let mut acc = DVector::from_column_slice(&iterates[1]) - &target;
    for (g, ab) in &forcing {
        acc = (&ident - &l_op * *g) * acc - ab * *g;
    }
    let unrolled = (DVector::from_column_slice(&iterates[horizon]) - &target - acc).amax();

    let ok = report.passed() && step_res <= STEP_TOL && unrolled <= UNROLLED_TOL;
    Ok((
        ok,
        format!(
            "one-step residual {step_res:.2e} (library {:.2e}), unrolled {unrolled:.2e} (library {:.2e})",
            lib.max_step_residual, lib.unrolled_residual
        ),
    ))
}

fn isometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut fails = 0;
    for i in 0..100 {
        let gaussian = i % 2 == 0;
        let dim = rng.random_range(1..=3usize);
        let width = rng.random_range(0.2..2.0);
        let g_eval = |a: &[f64], b: &[f64]| -> f64 {
            if gaussian {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / width).exp()
            } else {
                a.iter().zip(b).map(|(x, y)| x * y).sum()
            }
        };
        let n = rng.random_range(1..=8usize);
        let mut pt = || (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..n).map(|_| (pt(), pt())).collect();
        let coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        // ||g||_G over the 2n univariate centers.
        let centers: Vec<(&[f64], f64)> = pairs
            .iter()
            .zip(&coeffs)
            .flat_map(|((a, b), c)| [(a.as_slice(), *c), (b.as_slice(), -*c)])
            .collect();
        let mut ng = 0.0;
        for (x, cx) in &centers {
            for (y, cy) in &centers {
                ng += cx * cy * g_eval(x, y);
            }
        }
        // ||Im g||_K over the n pairs with the four-term kernel.
        let mut nk = 0.0;
        for ((a1, a2), ci) in pairs.iter().zip(&coeffs) {
            for ((b1, b2), cj) in pairs.iter().zip(&coeffs) {
                nk += ci * cj * (g_eval(a1, b1) + g_eval(a2, b2) - g_eval(a1, b2) - g_eval(a2, b1));
            }
        }
        let (ng, nk) = (ng.max(0.0).sqrt(), nk.max(0.0).sqrt());
        let base = if gaussian {
            UnivariateKernel::gaussian(width, dim)
        } else {
            UnivariateKernel::linear(dim)
        }
        .map_err(|e| e.to_string())?;
        let combo = DifferenceCombination::new(
            base,
            pairs.iter().map(|(a, b)| Pair::new(a.clone(), b.clone())).collect(),
            coeffs.clone(),
        )
        .map_err(|e| e.to_string())?;
        let (lib_g, lib_k) = isometry_check(&combo).map_err(|e| e.to_string())?;
        let tol = 1e-8 * (1.0 + ng);
        let gap = (nk - ng).abs().max((lib_k - lib_g).abs()).max((lib_g - ng).abs());
        worst = worst.max(gap / (1.0 + ng));
        if gap > tol {
            fails += 1;
        }
    }
    Ok((fails == 0, format!("{fails} failures, max relative gap {worst:.2e}")))
}

fn c_theta_hand(theta: f64, mu: f64) -> f64 {
    let v = mu * (1.0 - theta);
    let big = (1.0 / v.sqrt()).max(v.sqrt());
    let tail = (5.0 / (2.0 * mu)).sqrt();
    if (theta - THETA_23).abs() < 1e-12 {
        20.0 * big / v + tail
    } else {
        26.0 * big / (v * (3.0 * theta - 2.0).abs()) + tail
    }
}

fn c_tilde_hand(theta: f64, mu: f64) -> f64 {
    let v = mu * (1.0 - theta);
    let big = (1.0 / v).max(v);
    let denom = if (theta - THETA_23).abs() < 1e-12 {
        mu * mu * (1.0 - theta)
    } else {
        mu * mu * (1.0 - theta) * (3.0 * theta - 2.0).abs()
    };
    (5.0 / (8.0 * mu) + 16.0 * big / denom).sqrt()
}

fn step_sums() -> Outcome {
    let thetas = suites::DEFAULT_THETAS;
    let mus = [1.0, 2.0];
    let t_max = 5000;
    let spot = c_theta(0.75, 1.0);
    let spot_ok = (spot - (832.0 + 2.5f64.sqrt())).abs() < 1e-9;
    let mut violations = [0usize; 4];
    let mut cases = 0usize;
    let mut sandwich_bad = 0usize;
    for &theta in &thetas {
        for &mu in &mus {
            let g: Vec<f64> = (0..=t_max)
                .map(|l| if l == 0 { 0.0 } else { gamma(theta, mu, l) })
                .collect();
            let r = (theta - 0.5).min((1.0 - theta) / 2.0);
            let (c, ct) = (c_theta_hand(theta, mu), c_tilde_hand(theta, mu));
            for t in 4..=t_max {
                // Walk j downward so the tail sum P(j+1, t) accumulates directly.
                let head_total: f64 = g[2..t].iter().sum();
                let mut head = head_total;
                let mut tail = 0.0f64;
                let mut sums = [0.0f64; 4];
                for j in (2..=t).rev() {
                    head -= if j < t { g[j] } else { 0.0 };
                    // head = P(2, j-1), tail = P(j+1, t).
                    let ws = (j as f64).sqrt() * (1.0 + tail).sqrt();
                    sums[0] += g[j] * (1.0 + head) / ws;
                    sums[1] += g[j] * (1.0 + head.max(0.0).sqrt()) / ws;
                    sums[2] += g[j] * g[j] * (1.0 + head * head) / (1.0 + tail);
                    sums[3] += g[j] * g[j] * (1.0 + head) / (1.0 + tail);
                    tail += g[j];
                }
                let f = (t as f64).powf(-r) * (t as f64).ln();
                let lhs = [sums[0], sums[1], sums[2].sqrt(), sums[3].sqrt()];
                for k in 0..4 {
                    let rhs = if k < 2 { c } else { ct } * f;
                    if lhs[k] > rhs * (1.0 + 1e-12) {
                        violations[k] += 1;
                    }
                }
                cases += 1;
            }
            let e = 1.0 - theta;
            let ladder: Vec<usize> = (0..40)
                .map(|i| (1.25f64.powi(i)).round() as usize)
                .filter(|&v| v <= t_max)
                .collect();
            for &j in &ladder {
                for &k in ladder.iter().filter(|&&k| k >= j) {
                    let sum: f64 = g[j..=k].iter().sum();
                    let lower = (((k + 1) as f64).powf(e) - (j as f64).powf(e)) / (mu * e);
                    let upper = ((k as f64).powf(e) - ((j - 1) as f64).powf(e)) / (mu * e);
                    if lower > sum * (1.0 + 1e-12) || sum > upper * (1.0 + 1e-12) {
                        sandwich_bad += 1;
                    }
                }
            }
        }
    }
    let reports = suites::lemmas(&thetas, &mus, t_max).map_err(|e| e.to_string())?;
    let lib_ok = reports.iter().all(|r| r.passed());
    let lib_summary: Vec<String> = reports
        .iter()
        .map(|r| format!("{}={}", r.check, r.n_violations))
        .collect();
    let ok = spot_ok && lib_ok && violations.iter().all(|v| *v == 0) && sandwich_bad == 0;
    Ok((
        ok,
        format!(
            "{cases} (theta, mu, t) cases; violations weighted stated/applied {}/{}, squared stated/applied {}/{}, sandwich {sandwich_bad}; library [{}]; C(0.75, 1) = {spot:.6}",
            violations[0],
            violations[1],
            violations[2],
            violations[3],
            lib_summary.join(", ")
        ),
    ))
}

fn operator_products() -> Outcome {
    let (theta, mu, dim) = (0.6, 1.0, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cases = 0usize;
    let mut violations = 0usize;
    let mut worst = 0.0f64;
    let mut dense_gap = 0.0f64;
    for beta in [0.5, 1.0] {
        for trial in 0..100 {
            let g = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
            let q = g.qr().q();
            let mut lam = DVector::from_fn(dim, |_, _| mu * rng.random::<f64>());
            lam[0] = mu;
            let a = &q * DMatrix::from_diagonal(&lam) * q.transpose();
            let a = (&a + a.transpose()) * 0.5;
            let eig = SymmetricEigen::new(a.clone());
            for _ in 0..20 {
                let j = rng.random_range(1..=200usize);
                let t = j + rng.random_range(0..=2000usize);
                let gs: Vec<f64> = (j..=t).map(|l| gamma(theta, mu, l)).collect();
                let sum: f64 = gs.iter().sum();
                let lhs = eig
                    .eigenvalues
                    .iter()
                    .map(|&l| {
                        let l = l.max(0.0);
                        gs.iter().map(|g| 1.0 - g * l).product::<f64>().abs() * l.powf(beta)
                    })
                    .fold(0.0, f64::max);
                let rhs = ((beta / std::f64::consts::E).powf(beta) + mu.powf(beta)) * sum.powf(-beta).min(1.0);
                worst = worst.max(lhs / rhs);
                if lhs > rhs * (1.0 + 1e-9) {
                    violations += 1;
                }
                cases += 1;
                if trial < 3 {
                    // Explicit product for a few windows.
                    let ident = DMatrix::<f64>::identity(dim, dim);
                    let mut p = ident.clone();
                    for g in &gs {
                        p = &p * (&ident - &a * *g);
                    }
                    let pw = eig.eigenvalues.map(|l| l.max(0.0).powf(beta));
                    let a_beta = &eig.eigenvectors * DMatrix::from_diagonal(&pw) * eig.eigenvectors.transpose();
                    let dense = (p * a_beta).singular_values().max();
                    dense_gap = dense_gap.max((dense - lhs).abs());
                }
            }
        }
    }
    let reports = suites::operators(&[0.5, 1.0], theta, mu, dim, 100, 20, 5).map_err(|e| e.to_string())?;
    let lib_ok = reports.iter().all(|r| r.passed());
    Ok((
        violations == 0 && lib_ok && dense_gap < 1e-8,
        format!(
            "{violations} violations in {cases} windows, max lhs/rhs {worst:.4}, dense vs spectral gap {dense_gap:.1e}, library check {}",
            if lib_ok { "clean" } else { "violated" }
        ),
    ))
}

fn spectral_config(horizons: &str, n_trials: usize) -> Result<ExperimentConfig, String> {
    let text = format!(
        "kernel = induced(gaussian:0.5)\nsupport = linspace:0:1:8\nf_rho = spectral:beta=1:seed=0\nnorm_target = 1\nnoise_half_width = 0.1\ntheta = {THETA_23}\nmu = auto\nT = {horizons}\nn_trials = {n_trials}\nseed = 1\ndelta = 0.1\n"
    );
    ExperimentConfig::from_text(&text).map_err(|e| e.to_string())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn medians_at(results: &[TrialResult], horizons: &[usize]) -> Result<Vec<f64>, String> {
    horizons
        .iter()
        .map(|&h| {
            let errs: Vec<f64> = results
                .iter()
                .map(|r| r.rows.iter().find(|row| row.t == h + 1).map(|row| row.error_rho))
                .collect::<Option<_>>()
                .ok_or(format!("missing row at t = {}", h + 1))?;
            Ok(median(errs))
        })
        .collect()
}

fn convergence() -> Outcome {
    let horizons = [100, 400, 1600];
    let cfg = spectral_config("100,400,1600", 20)?;
    let results = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let med = medians_at(&results, &horizons)?;
    let decreasing = med.windows(2).all(|w| w[1] < w[0]);
    let halved = med[2] <= 0.5 * med[0];
    let lib = summarize(&results, cfg.t_min);
    let lib_med: Vec<f64> = lib
        .values()
        .next()
        .map(|s| s.medians_by_t.values().copied().collect())
        .unwrap_or_default();
    let agree = lib_med.len() == 3 && lib_med.iter().zip(&med).all(|(a, b)| (a - b).abs() <= 1e-15);
    Ok((
        decreasing && halved && agree,
        format!(
            "medians {:.5} > {:.5} > {:.5}, final/first ratio {:.3}",
            med[0],
            med[1],
            med[2],
            med[2] / med[0]
        ),
    ))
}

fn bound_dominance() -> Outcome {
    let delta = 0.1;
    let n = 100;
    let cfg = spectral_config("400", n)?;
    let results = run_experiment(&cfg).map_err(|e| e.to_string())?;
    // The bound less its approximation term, with the constants written out.
    let (theta, mu, kap) = (cfg.theta, cfg.mu, cfg.kappa);
    let m_bound = cfg.measure.label_bound();
    let c_kappa = 4.0
        * (3.0 * c_theta_hand(theta, mu) + 16.0 * c_tilde_hand(theta, mu) / 3.0)
        * kap
        * (1.0 + kap).powi(2)
        * m_bound;
    let horizon = 400.0f64;
    let r = (theta - 0.5).min((1.0 - theta) / 2.0);
    let sample_part = c_kappa * horizon.powf(-r) * horizon.ln() * (8.0 * horizon / delta).ln();
    let mut exceed = 0usize;
    let mut consistent = true;
    let mut worst_ratio = 0.0f64;
    for r in &results {
        let row = r.rows.iter().find(|row| row.t == 401).ok_or("missing row at t = 401")?;
        let bound = row.thm1_bound.ok_or("bound column empty")?;
        consistent &= bound >= sample_part * (1.0 - 1e-12) && bound.is_finite();
        worst_ratio = worst_ratio.max(row.error_rho / bound);
        if row.error_rho > bound {
            exceed += 1;
        }
    }
    let frac = exceed as f64 / n as f64;
    let tol = delta + 3.0 * (delta * (1.0 - delta) / n as f64).sqrt();
    Ok((
        frac <= tol && consistent,
        format!(
            "violation fraction {frac} (limit {tol:.4}), max error/bound {worst_ratio:.2e}, bound {:.3e}",
            sample_part
        ),
    ))
}

fn rate() -> Outcome {
    let horizons = [128, 512, 2048];
    let cfg = spectral_config("128,512,2048", 20)?;
    let results = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let med = medians_at(&results, &horizons)?;
    let xs: Vec<f64> = horizons.iter().map(|h| ((h + 1) as f64).ln()).collect();
    let ys: Vec<f64> = med.iter().map(|m| m.ln()).collect();
    let mx = xs.iter().sum::<f64>() / 3.0;
    let my = ys.iter().sum::<f64>() / 3.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let lib = summarize(&results, cfg.t_min);
    let lib_slope = lib.values().next().and_then(|s| s.rate_fit.as_ref()).map(|f| f.slope);
    let agree = lib_slope.is_some_and(|s| (s - slope).abs() < 1e-9);
    Ok((
        slope <= -0.05 && agree,
        format!("fitted slope {slope:.4} (library {lib_slope:?}), medians {med:.5?}"),
    ))
}

fn pogd() -> Outcome {
    let meas = grid(8);
    let measure = Measure::Discrete(meas.clone());
    let kap = kappa_unit();
    let mu = kap * kap;
    let m_bound = label_bound(&meas);
    let horizon = 1000;
    let mut over = 0usize;
    let mut worst_ratio = 0.0f64;
    for radius in [0.1, 1.0, 10.0] {
        for seed in 0..5u64 {
            for steps in [
                EtaRule::Lipschitz.step_rule(radius, m_bound, kap, horizon),
                schedule(THETA_23, mu),
            ] {
                let mut spec = RunSpec::new(induced(), steps, horizon, seed);
                spec.algorithm = Algorithm::Pogd { radius };
                run_with(&spec, &measure, |s| {
                    worst_ratio = worst_ratio.max(s.norm_k() / radius);
                    if s.norm_k() > radius * (1.0 + 1e-12) {
                        over += 1;
                    }
                })
                .map_err(|e| e.to_string())?;
            }
        }
    }
    let radius = 1.5 * norm_bound(m_bound, THETA_23, mu, horizon + 1);
    let mut worst_gap = 0.0f64;
    for seed in 0..5u64 {
        let mut spec = RunSpec::new(induced(), schedule(THETA_23, mu), horizon, seed);
        spec.engine = Engine::Reduced;
        let mut plain = Vec::new();
        run_with(&spec, &measure, |s| plain.push(grid_of_state(s, meas.support(), false)))
            .map_err(|e| e.to_string())?;
        spec.algorithm = Algorithm::Pogd { radius };
        let mut projected = Vec::new();
        run_with(&spec, &measure, |s| {
            projected.push(grid_of_state(s, meas.support(), false))
        })
        .map_err(|e| e.to_string())?;
        worst_gap = worst_gap.max(max_abs_diff(&plain, &projected));
    }
    Ok((
        over == 0 && worst_gap <= 1e-10,
        format!(
            "{over} radius violations (max norm/R {worst_ratio:.4}); with R = {radius:.3} trajectory gap {worst_gap:.1e}"
        ),
    ))
}

fn concentration() -> Outcome {
    let (dim, t, delta, n) = (5, 100, 0.05, 10_000);
    let tol = delta + 3.0 * (delta * (1.0 - delta) / n as f64).sqrt();
    let lib_tol = coverage_tolerance(delta, n);
    let l = (2.0 / delta).ln();
    let tf = t as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut lines = Vec::new();
    let mut ok = (lib_tol - tol).abs() < 1e-15;

    // Hand simulations: unit Rademacher vectors (B = 1, sigma = 1) and the
    // centered cube [-1, 1]^5 (B = sqrt 5, sigma^2 = 5/3).
    for (name, b, sigma) in [
        ("rademacher", 1.0f64, 1.0f64),
        ("cube", 5f64.sqrt(), (5.0f64 / 3.0).sqrt()),
    ] {
        let bound = 2.0 * b * l / tf + sigma * (l / tf).sqrt();
        let mut bad = 0usize;
        for _ in 0..n {
            let mut s = [0.0f64; 5];
            for _ in 0..t {
                for v in s.iter_mut() {
                    *v += if name == "rademacher" {
                        (if rng.random::<bool>() { 1.0 } else { -1.0 }) / 5f64.sqrt()
                    } else {
                        2.0 * rng.random::<f64>() - 1.0
                    };
                }
            }
            let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt() / tf;
            if norm > bound {
                bad += 1;
            }
        }
        let freq = bad as f64 / n as f64;
        ok &= freq <= tol;
        lines.push(format!("{name} {freq}"));
    }
    for dist in [
        VectorDist::Rademacher { dim },
        VectorDist::Cube {
            offset: vec![0.2; dim],
            half_width: 1.0,
        },
    ] {
        let c = bennett_coverage(&dist, t, delta, n, &mut rng).map_err(|e| e.to_string())?;
        ok &= c.report.passed() && c.frequency <= tol;
        lines.push(format!(
            "library {} {}",
            if dim == dist.dim() {
                c.report.check.clone()
            } else {
                String::new()
            },
            c.frequency
        ));
    }
    for kind in [MartingaleKind::FixedDirection, MartingaleKind::Aligned] {
        let c = pinelis_coverage(&kind, dim, t, delta, n, &mut rng).map_err(|e| e.to_string())?;
        ok &= c.report.passed() && c.frequency <= tol;
        lines.push(format!("martingale {kind:?} {}", c.frequency));
    }
    Ok((ok, format!("frequencies [{}], limit {tol:.4}", lines.join(", "))))
}

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "engine equivalence", equivalence),
        (2, "iterate norm bound", norm_invariant),
        (3, "error decomposition", decomposition),
        (4, "difference isometry", isometry),
        (5, "step-size sums", step_sums),
        (6, "operator products", operator_products),
        (7, "convergence", convergence),
        (8, "bound dominance", bound_dominance),
        (9, "rate", rate),
        (10, "projected baseline", pogd),
        (11, "concentration coverage", concentration),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok((true, detail)) => println!("[PASS] criterion {n} ({name}, {secs:.1}s): {detail}"),
            Ok((false, detail)) => {
                failed += 1;
                println!("[FAIL] criterion {n} ({name}, {secs:.1}s): {detail}");
            }
            Err(e) => {
                failed += 1;
                println!("[FAIL] criterion {n} ({name}, {secs:.1}s): error: {e}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
