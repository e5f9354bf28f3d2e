//! Monte Carlo coverage of two Hilbert-space concentration inequalities.
//!
//! * Bennett: for independent `||xi_i|| <= B` with `E ||xi_i||^2 <= sigma^2`,
//!   `||mean(xi) - E xi|| <= 2 B log(2/delta)/t + sigma sqrt(log(2/delta)/t)`.
//! * Pinelis-Bernstein: for a martingale difference sequence with
//!   `||S_k|| <= B` and summed conditional second moments `<= sigma_t^2`,
//!   `sup_j ||sum_{k<=j} S_k|| <= 2 (B/3 + sigma_t) log(2/delta)`.
//!
//! Each holds with probability at least `1 - delta`; a replication counts as a
//! violation when the realized deviation exceeds the bound.

use rand::Rng;

use crate::error::{Error, Result};
use crate::theory::{ReportBuilder, VerificationReport};

/// Distributions of i.i.d. vectors for the Bennett check.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorDist {
    /// Every coordinate an independent sign, scaled so `||xi|| = 1`.
    Rademacher { dim: usize },
    /// Uniform on `offset + [-h, h]^dim`.
    Cube { offset: Vec<f64>, half_width: f64 },
    /// A point mass.
    Constant(Vec<f64>),
}

impl VectorDist {
    pub fn dim(&self) -> usize {
        match self {
            VectorDist::Rademacher { dim } => *dim,
            VectorDist::Cube { offset, .. } => offset.len(),
            VectorDist::Constant(v) => v.len(),
        }
    }

    /// `(B, sigma^2, E xi)`.
    pub fn moments(&self) -> (f64, f64, Vec<f64>) {
        match self {
            VectorDist::Rademacher { dim } => (1.0, 1.0, vec![0.0; *dim]),
            VectorDist::Cube { offset, half_width } => {
                let d = offset.len() as f64;
                let o = offset.iter().map(|x| x * x).sum::<f64>();
                let b = o.sqrt() + half_width * d.sqrt();
                (b, o + d * half_width * half_width / 3.0, offset.clone())
            }
            VectorDist::Constant(v) => {
                let n2 = v.iter().map(|x| x * x).sum::<f64>();
                (n2.sqrt(), n2, v.clone())
            }
        }
    }

    pub fn draw(&self, rng: &mut impl Rng, out: &mut [f64]) {
        match self {
            VectorDist::Rademacher { dim } => {
                let s = 1.0 / (*dim as f64).sqrt();
                for o in out.iter_mut() {
                    *o = if rng.random::<bool>() { s } else { -s };
                }
            }
            VectorDist::Cube { offset, half_width } => {
                for (o, c) in out.iter_mut().zip(offset) {
                    *o = c + half_width * (2.0 * rng.random::<f64>() - 1.0);
                }
            }
            VectorDist::Constant(v) => out.copy_from_slice(v),
        }
    }
}

/// Martingale difference constructions for the Pinelis-Bernstein check.
#[derive(Debug, Clone, PartialEq)]
pub enum MartingaleKind {
    /// `S_k = eps_k b_k v` for a fixed unit vector `v`.
    FixedDirection,
    /// `S_k = eps_k b_k u_k` with `u_k` the direction of the running sum
    /// (a fixed axis while the sum is zero); `u_k` is predictable.
    Aligned,
}

pub fn bennett_bound(b: f64, sigma: f64, t: usize, delta: f64) -> f64 {
    let l = (2.0 / delta).ln();
    let tf = t as f64;
    2.0 * b * l / tf + sigma * (l / tf).sqrt()
}

pub fn pinelis_bound(b: f64, sigma_t: f64, delta: f64) -> f64 {
    2.0 * (b / 3.0 + sigma_t) * (2.0 / delta).ln()
}

/// Allowed violation frequency: `delta + 3 sqrt(delta (1 - delta) / n)`.
pub fn coverage_tolerance(delta: f64, n_trials: usize) -> f64 {
    delta + 3.0 * (delta * (1.0 - delta) / n_trials as f64).sqrt()
}

fn check_args(t: usize, delta: f64, n_trials: usize) -> Result<()> {
    if t == 0 || n_trials == 0 {
        return Err(Error::input("t and n_trials must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::input(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Coverage result: the violation frequency and the report judging it.
#[derive(Debug, Clone)]
pub struct Coverage {
    pub frequency: f64,
    pub report: VerificationReport,
}

fn finish(name: &str, violations: usize, n_trials: usize, delta: f64, b: ReportBuilder) -> Coverage {
    let frequency = violations as f64 / n_trials as f64;
    let tol = coverage_tolerance(delta, n_trials);
    let mut b = b.param("frequency", frequency).param("tolerance", tol);
    b.case(frequency, tol, 0.0, || format!("{name} violation frequency"));
    Coverage {
        frequency,
        report: b.finish(),
    }
}

/// Bennett coverage over `n_trials` replications of `t` i.i.d. draws.
pub fn bennett_coverage(
    dist: &VectorDist,
    t: usize,
    delta: f64,
    n_trials: usize,
    rng: &mut impl Rng,
) -> Result<Coverage> {
    check_args(t, delta, n_trials)?;
    let d = dist.dim();
    let (b, sigma2, mean) = dist.moments();
    let bound = bennett_bound(b, sigma2.sqrt(), t, delta);
    let mut x = vec![0.0; d];
    let mut violations = 0;
    for _ in 0..n_trials {
        let mut acc = vec![0.0; d];
        for _ in 0..t {
            dist.draw(rng, &mut x);
            for (a, v) in acc.iter_mut().zip(&x) {
                *a += v;
            }
        }
        let dev: f64 = acc
            .iter()
            .zip(&mean)
            .map(|(a, m)| (a / t as f64 - m).powi(2))
            .sum::<f64>()
            .sqrt();
        if dev > bound {
            violations += 1;
        }
    }
    let b = ReportBuilder::new("bennett-coverage")
        .param("dim", d)
        .param("t", t)
        .param("delta", delta)
        .param("n_trials", n_trials)
        .param("bound", bound);
    Ok(finish("bennett", violations, n_trials, delta, b))
}

/// Pinelis-Bernstein coverage. Step `k` has magnitude
/// `b_k = 1 - 0.5 (k - 1)/t`, so `B = 1` and `sigma_t^2 = sum b_k^2`.
pub fn pinelis_coverage(
    kind: &MartingaleKind,
    dim: usize,
    t: usize,
    delta: f64,
    n_trials: usize,
    rng: &mut impl Rng,
) -> Result<Coverage> {
    check_args(t, delta, n_trials)?;
    if dim == 0 {
        return Err(Error::input("dimension must be positive"));
    }
    let mags: Vec<f64> = (1..=t).map(|k| 1.0 - 0.5 * (k - 1) as f64 / t as f64).collect();
    let sigma_t = mags.iter().map(|m| m * m).sum::<f64>().sqrt();
    let bound = pinelis_bound(1.0, sigma_t, delta);
    let mut violations = 0;
    for _ in 0..n_trials {
        let mut s = vec![0.0; dim];
        let mut sup: f64 = 0.0;
        for &bk in &mags {
            let eps = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
            match kind {
                MartingaleKind::Aligned if norm > 0.0 => {
                    let f = eps * bk / norm;
                    for x in s.iter_mut() {
                        *x += f * *x;
                    }
                }
                _ => s[0] += eps * bk,
            }
            sup = sup.max(s.iter().map(|x| x * x).sum::<f64>().sqrt());
        }
        if sup > bound {
            violations += 1;
        }
    }
    let b = ReportBuilder::new("pinelis-coverage")
        .param("kind", format!("{kind:?}"))
        .param("dim", dim)
        .param("t", t)
        .param("delta", delta)
        .param("n_trials", n_trials)
        .param("bound", bound);
    Ok(finish("pinelis", violations, n_trials, delta, b))
}
