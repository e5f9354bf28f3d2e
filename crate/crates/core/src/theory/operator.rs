//! Operator-norm bound for products of `I - gamma_l A` against `A^beta`:
//!
//! ```text
//! || prod_{l=j}^{t} (I - gamma_l A) A^beta || <= ((beta/e)^beta + kappa^{2 beta}) min(1, (sum_{l=j}^t gamma_l)^{-beta})
//! ```
//!
//! for symmetric PSD `A` with `||A|| <= kappa^2` and `gamma_l kappa^2 <= 1`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::learner::Schedule;
use crate::theory::{ReportBuilder, VerificationReport};

/// Largest matrix dimension accepted by the randomized check.
pub const MAX_DIM: usize = 50;

/// Right-hand side of the bound.
pub fn product_bound(beta: f64, kappa_sq: f64, gamma_sum: f64) -> f64 {
    let c = (beta / std::f64::consts::E).powf(beta) + kappa_sq.powf(beta);
    c * gamma_sum.powf(-beta).min(1.0)
}

/// The norm from the eigenvalues of `A`: `max_i |prod (1 - gamma_l lambda_i)| lambda_i^beta`.
pub fn product_norm_spectral(eigenvalues: &[f64], gammas: &[f64], beta: f64) -> f64 {
    eigenvalues
        .iter()
        .map(|&lam| {
            let lam = lam.max(0.0);
            if lam == 0.0 {
                return 0.0;
            }
            let prod: f64 = gammas.iter().map(|g| 1.0 - g * lam).product();
            prod.abs() * lam.powf(beta)
        })
        .fold(0.0, f64::max)
}

/// The norm by forming the matrix product explicitly.
pub fn product_norm_dense(a: &DMatrix<f64>, gammas: &[f64], beta: f64) -> f64 {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let powered = eig.eigenvalues.map(|l| if l > 0.0 { l.powf(beta) } else { 0.0 });
    let a_beta = &eig.eigenvectors * DMatrix::from_diagonal(&powered) * eig.eigenvectors.transpose();
    let mut p = DMatrix::<f64>::identity(n, n);
    for g in gammas {
        p = &p * (DMatrix::<f64>::identity(n, n) - a * *g);
    }
    let m = p * a_beta;
    // Spectral norm as the largest singular value.
    m.singular_values().max()
}

/// A random symmetric PSD matrix with spectrum in `[0, top]`, whose largest
/// eigenvalue equals `top`.
pub fn random_psd(dim: usize, top: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let mut lam = DVector::from_fn(dim, |_, _| top * rng.random::<f64>());
    lam[0] = top;
    if dim > 2 && rng.random::<f64>() < 0.5 {
        lam[dim - 1] = 0.0;
    }
    let a = &q * DMatrix::from_diagonal(&lam) * q.transpose();
    (&a + a.transpose()) * 0.5
}

/// Randomized check over `trials` PSD matrices with `||A|| = kappa^2 = mu`,
/// each against `windows` random windows `[j, t]`.
pub fn operator_product_norm_check(
    beta: f64,
    theta: f64,
    mu: f64,
    dim: usize,
    trials: usize,
    windows: usize,
    rng: &mut impl Rng,
) -> Result<VerificationReport> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::input(format!("dimension must be in [1, {MAX_DIM}], got {dim}")));
    }
    if !(beta > 0.0) {
        return Err(Error::input("beta must be positive"));
    }
    let schedule = Schedule::new(theta, mu)?;
    let mut b = ReportBuilder::new("operator-product-norm")
        .param("beta", beta)
        .param("theta", theta)
        .param("mu", mu)
        .param("dim", dim)
        .param("trials", trials)
        .param("windows", windows);
    let mut hs_ok = true;
    for trial in 0..trials {
        let a = random_psd(dim, mu, rng);
        let eig = SymmetricEigen::new(a.clone());
        let lams: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let op_norm = lams.iter().copied().fold(0.0, f64::max);
        hs_ok &= a.norm() >= op_norm * (1.0 - 1e-12);
        for _ in 0..windows {
            let j = rng.random_range(1..=200usize);
            let t = j + rng.random_range(0..=2000usize);
            let gammas: Vec<f64> = (j..=t).map(|l| schedule.step_size(l)).collect();
            let sum: f64 = gammas.iter().sum();
            let lhs = product_norm_spectral(&lams, &gammas, beta);
            let rhs = product_bound(beta, mu, sum);
            b.case(lhs, rhs, 1e-9, || format!("trial={trial}, j={j}, t={t}"));
        }
    }
    if !hs_ok {
        b.note("Frobenius norm fell below the operator norm");
        b.case(1.0, 0.0, 0.0, || "Hilbert-Schmidt domination".into());
    }
    Ok(b.finish())
}
