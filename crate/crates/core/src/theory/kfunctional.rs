//! `K(s, f) = inf_{h in H_K} ||h - f||_rho + s ||h||_K` on the grid.
//!
//! In eigencoordinates the minimiser is `b_k = a_k lambda_k / (lambda_k + tau)`
//! for some `tau >= 0` satisfying `tau ||h||_K = s ||h - f||_rho`. The value is
//! taken as the least objective over the endpoints `tau = 0`, `tau = inf`
//! (`h = 0`), a logarithmic scan of `tau`, and the bisected roots of the
//! stationarity condition.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::theory::spectral::SpectralModel;

const SCAN_POINTS: usize = 400;
const ROOT_TOL: f64 = 1e-10;

/// `K(s, f)` for a grid function `f`.
pub fn k_functional(model: &SpectralModel, f: &DVector<f64>, s: f64) -> Result<f64> {
    let a = model.coords(f);
    k_functional_coords(model.eigenvalues().as_slice(), a.as_slice(), s)
}

/// `lim_{s -> 0+} K(s, f)`: the `rho`-distance from `f` to the closure of `H_K`.
pub fn approximation_distance(model: &SpectralModel, f: &DVector<f64>) -> f64 {
    let a = model.coords(f);
    null_part(model.eigenvalues().as_slice(), a.as_slice())
}

fn null_part(lambda: &[f64], a: &[f64]) -> f64 {
    lambda
        .iter()
        .zip(a)
        .filter(|(l, _)| **l <= 0.0)
        .map(|(_, x)| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Residual and norm of the path point at `tau`.
fn path(lambda: &[f64], a: &[f64], null_sq: f64, tau: f64) -> (f64, f64) {
    let mut r2 = null_sq;
    let mut n2 = 0.0;
    for (l, x) in lambda.iter().zip(a) {
        if *l <= 0.0 {
            continue;
        }
        let d = l + tau;
        r2 += (x * tau / d).powi(2);
        n2 += x * x * l / (d * d);
    }
    (r2.sqrt(), n2.sqrt())
}

/// `K(s, .)` in eigencoordinates: eigenvalues `lambda` (zeros mark null
/// directions) and target coordinates `a`.
pub fn k_functional_coords(lambda: &[f64], a: &[f64], s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::input(format!("K-functional needs s > 0, got {s}")));
    }
    if lambda.len() != a.len() {
        return Err(Error::Dimension {
            expected: lambda.len(),
            got: a.len(),
        });
    }
    let null = null_part(lambda, a);
    let null_sq = null * null;
    let full = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let objective = |tau: f64| {
        let (r, n) = path(lambda, a, null_sq, tau);
        r + s * n
    };
    // h = 0 and the unregularised projection onto the range.
    let mut best = full.min(objective(0.0));
    let lmax = lambda.iter().copied().fold(0.0f64, f64::max);
    if lmax <= 0.0 {
        return Ok(full);
    }
    let lmin = lambda
        .iter()
        .copied()
        .filter(|l| *l > 0.0)
        .fold(f64::INFINITY, f64::min);
    let lo = (lmin * 1e-12).ln();
    let hi = (lmax * 1e12).ln();
    let phi = |tau: f64| {
        let (r, n) = path(lambda, a, null_sq, tau);
        tau * n - s * r
    };
    let taus: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| (lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64).exp())
        .collect();
    let mut prev: Option<(f64, f64)> = None;
    for &tau in &taus {
        best = best.min(objective(tau));
        let p = phi(tau);
        if let Some((t0, p0)) = prev {
            if p0.signum() != p.signum() {
                let root = bisect(&phi, t0, tau, p0);
                best = best.min(objective(root));
            }
        }
        prev = Some((tau, p));
    }
    Ok(best)
}

fn bisect(phi: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut plo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let pm = phi(mid);
        if pm.abs() <= ROOT_TOL || (hi - lo) <= ROOT_TOL * mid.abs() {
            return mid;
        }
        if pm.signum() == plo.signum() {
            lo = mid;
            plo = pm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
