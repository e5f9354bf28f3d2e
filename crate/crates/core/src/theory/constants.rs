//! Closed-form constants and the last-iterate error bounds.

use crate::error::{Error, Result};

/// Rate exponent `min(theta - 1/2, (1 - theta)/2)`.
pub fn rate_exponent(theta: f64) -> f64 {
    (theta - 0.5).min((1.0 - theta) / 2.0)
}

fn is_two_thirds(theta: f64) -> bool {
    (theta - 2.0 / 3.0).abs() < 1e-12
}

/// `C_theta`, the constant of the first weighted step-size sum bound.
pub fn c_theta(theta: f64, mu: f64) -> f64 {
    let v = mu * (1.0 - theta);
    let big = (1.0 / v.sqrt()).max(v.sqrt());
    let tail = (5.0 / (2.0 * mu)).sqrt();
    if is_two_thirds(theta) {
        20.0 * big / v + tail
    } else {
        26.0 * big / (v * (3.0 * theta - 2.0).abs()) + tail
    }
}

/// `C~_theta`, the constant of the second (squared) step-size sum bound.
pub fn c_tilde_theta(theta: f64, mu: f64) -> f64 {
    let v = mu * (1.0 - theta);
    let big = (1.0 / v).max(v);
    let denom = if is_two_thirds(theta) {
        mu * mu * (1.0 - theta)
    } else {
        mu * mu * (1.0 - theta) * (3.0 * theta - 2.0).abs()
    };
    (5.0 / (8.0 * mu) + 16.0 * big / denom).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub c_theta: f64,
    pub c_tilde_theta: f64,
    /// `4 (3 C_theta + 16 C~_theta / 3) kappa (1 + kappa)^2 M`.
    pub c_theta_kappa: f64,
    /// Approximation-error constant, with `(mu (1 - theta))^beta` as the
    /// integral comparison gives.
    pub d_kappa_beta: f64,
    /// The same constant with `(mu (1 - beta))^beta`; undefined for `beta >= 1`.
    pub d_kappa_beta_literal: Option<f64>,
}

impl BoundConstants {
    pub fn new(theta: f64, mu: f64, kappa: f64, label_bound: f64, beta: f64) -> Result<Self> {
        if !(theta > 0.5 && theta < 1.0) {
            return Err(Error::input(format!("theta must lie in (1/2, 1), got {theta}")));
        }
        if !(mu > 0.0 && kappa > 0.0 && label_bound > 0.0) {
            return Err(Error::input("mu, kappa and M must be positive"));
        }
        if !(beta > 0.0) {
            return Err(Error::input(format!("beta must be positive, got {beta}")));
        }
        let c = c_theta(theta, mu);
        let ct = c_tilde_theta(theta, mu);
        let c_theta_kappa = 4.0 * (3.0 * c + 16.0 * ct / 3.0) * kappa * (1.0 + kappa).powi(2) * label_bound;
        let lead = ((beta / std::f64::consts::E).powf(beta) + kappa.powf(2.0 * beta)) * kappa.powf(2.0 * beta);
        let tail = (1.0 - 0.5f64.powf(1.0 - theta)).powf(-beta);
        let d_kappa_beta = lead * (mu * (1.0 - theta)).powf(beta) * tail;
        let d_kappa_beta_literal = (beta < 1.0).then(|| lead * (mu * (1.0 - beta)).powf(beta) * tail);
        Ok(BoundConstants {
            c_theta: c,
            c_tilde_theta: ct,
            c_theta_kappa,
            d_kappa_beta,
            d_kappa_beta_literal,
        })
    }
}

/// The K-functional argument `sqrt(6 mu) (1 + kappa) T^{-(1 - theta)/2}`.
pub fn kfunctional_argument(theta: f64, mu: f64, kappa: f64, horizon: usize) -> f64 {
    (6.0 * mu).sqrt() * (1.0 + kappa) * (horizon as f64).powf(-(1.0 - theta) / 2.0)
}

/// High-probability bound on `||f_{T+1} - f_tilde_rho||_rho`:
/// `kfunc + C_{theta,kappa} T^{-rate} log T log(8T / delta)`.
pub fn theorem1_bound(
    theta: f64,
    mu: f64,
    kappa: f64,
    label_bound: f64,
    horizon: usize,
    delta: f64,
    kfunc_value: f64,
) -> Result<f64> {
    if horizon < 4 {
        return Err(Error::input(format!("bound needs T >= 4, got {horizon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::input(format!("delta must lie in (0, 1), got {delta}")));
    }
    let c = BoundConstants::new(theta, mu, kappa, label_bound, 1.0)?.c_theta_kappa;
    let t = horizon as f64;
    Ok(kfunc_value + c * t.powf(-rate_exponent(theta)) * t.ln() * (8.0 * t / delta).ln())
}

/// Rate bound under a source condition of order `beta`:
/// `D T^{-beta (1 - theta)} + C T^{-rate} log T log(8T / delta)`.
pub fn source_rate_bound(
    theta: f64,
    mu: f64,
    kappa: f64,
    label_bound: f64,
    beta: f64,
    horizon: usize,
    delta: f64,
) -> Result<f64> {
    if horizon < 4 {
        return Err(Error::input(format!("bound needs T >= 4, got {horizon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::input(format!("delta must lie in (0, 1), got {delta}")));
    }
    let c = BoundConstants::new(theta, mu, kappa, label_bound, beta)?;
    let t = horizon as f64;
    Ok(c.d_kappa_beta * t.powf(-beta * (1.0 - theta))
        + c.c_theta_kappa * t.powf(-rate_exponent(theta)) * t.ln() * (8.0 * t / delta).ln())
}

/// `theta = min((2 beta + 1)/(2 beta + 2), 2/3)`.
pub fn optimal_theta(beta: f64) -> f64 {
    ((2.0 * beta + 1.0) / (2.0 * beta + 2.0)).min(2.0 / 3.0)
}
