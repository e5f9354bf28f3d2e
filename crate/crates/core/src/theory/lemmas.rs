//! Direct summation checks of the step-size sum inequalities.
//!
//! With `gamma_j = j^{-theta}/mu`, `P(a, b) = sum_{l=a}^{b} gamma_l`:
//!
//! * weighted sum: `sum_{j=2}^t gamma_j N_j / (sqrt(j) (1 + P(j+1, t))^{1/2})`
//!   is at most `C_theta t^{-r} log t`, where `N_j = 1 + P(2, j-1)` as stated
//!   or `N_j = 1 + P(2, j-1)^{1/2}` as applied in the sample-error bound;
//! * squared sum: `(sum_{j=2}^t gamma_j^2 N_j / (1 + P(j+1, t)))^{1/2}` is at
//!   most `C~_theta t^{-r} log t`, with `N_j = 1 + P(2, j-1)^2` as stated or
//!   `N_j = 1 + P(2, j-1)` as applied;
//! * integral sandwich: `((k+1)^{1-theta} - j^{1-theta}) <= mu (1-theta) P(j, k)
//!   <= k^{1-theta} - (j-1)^{1-theta}`.
//!
//! Here `r = min(theta - 1/2, (1 - theta)/2)`.

use crate::error::{Error, Result};
use crate::theory::constants::{c_theta, c_tilde_theta, rate_exponent};
use crate::theory::{ReportBuilder, VerificationReport};

// Floating-point slack on the comparisons.
const REL_SLACK: f64 = 1e-12;

/// Which left-hand side is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Stated,
    Applied,
}

impl Variant {
    pub fn label(&self) -> &'static str {
        match self {
            Variant::Stated => "stated",
            Variant::Applied => "applied",
        }
    }
}

/// `P[i] = sum_{l=1}^{i} gamma_l`, with `P[0] = 0`.
fn prefix(theta: f64, mu: f64, t_max: usize) -> Vec<f64> {
    let mut p = vec![0.0; t_max + 1];
    for l in 1..=t_max {
        p[l] = p[l - 1] + (l as f64).powf(-theta) / mu;
    }
    p
}

/// Left-hand sides of the two sum bounds at `t` from prefix sums.
fn sums_at(p: &[f64], t: usize) -> [f64; 4] {
    let mut w_stated = 0.0;
    let mut w_applied = 0.0;
    let mut s_stated = 0.0;
    let mut s_applied = 0.0;
    for j in 2..=t {
        let g = p[j] - p[j - 1];
        let head = p[j - 1] - p[1];
        let tail = 1.0 + p[t] - p[j];
        let w_den = (j as f64).sqrt() * tail.sqrt();
        w_stated += g * (1.0 + head) / w_den;
        w_applied += g * (1.0 + head.sqrt()) / w_den;
        s_stated += g * g * (1.0 + head * head) / tail;
        s_applied += g * g * (1.0 + head) / tail;
    }
    [w_stated, w_applied, s_stated.sqrt(), s_applied.sqrt()]
}

/// Weighted-sum left-hand side at a single `t`, by direct summation.
pub fn weighted_sum_lhs(theta: f64, mu: f64, t: usize, variant: Variant) -> f64 {
    let p = prefix(theta, mu, t);
    let s = sums_at(&p, t);
    match variant {
        Variant::Stated => s[0],
        Variant::Applied => s[1],
    }
}

/// Squared-sum left-hand side at a single `t`, by direct summation.
pub fn squared_sum_lhs(theta: f64, mu: f64, t: usize, variant: Variant) -> f64 {
    let p = prefix(theta, mu, t);
    let s = sums_at(&p, t);
    match variant {
        Variant::Stated => s[2],
        Variant::Applied => s[3],
    }
}

/// The common right-hand side factor `t^{-r} log t`.
pub fn rate_factor(theta: f64, t: usize) -> f64 {
    let tf = t as f64;
    tf.powf(-rate_exponent(theta)) * tf.ln()
}

/// Checks both sum bounds, in both variants, for every `t` in `[4, t_max]`.
/// Returns four reports: weighted/stated, weighted/applied, squared/stated,
/// squared/applied.
pub fn sum_bound_checks(thetas: &[f64], mus: &[f64], t_max: usize) -> Result<Vec<VerificationReport>> {
    if t_max < 4 {
        return Err(Error::input(format!("t_max must be at least 4, got {t_max}")));
    }
    for &th in thetas {
        if !(th > 0.5 && th < 1.0) {
            return Err(Error::input(format!("theta must lie in (1/2, 1), got {th}")));
        }
    }
    if mus.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::input("mu must be positive"));
    }
    let names = [
        ("weighted-sum", Variant::Stated),
        ("weighted-sum", Variant::Applied),
        ("squared-sum", Variant::Stated),
        ("squared-sum", Variant::Applied),
    ];
    let mut builders: Vec<ReportBuilder> = names
        .iter()
        .map(|(n, v)| {
            ReportBuilder::new(format!("{n}/{}", v.label()))
                .param("thetas", thetas.to_vec())
                .param("mus", mus.to_vec())
                .param("t_min", 4)
                .param("t_max", t_max)
        })
        .collect();
    for &theta in thetas {
        for &mu in mus {
            let p = prefix(theta, mu, t_max);
            let c = [c_theta(theta, mu), c_tilde_theta(theta, mu)];
            for t in 4..=t_max {
                let lhs = sums_at(&p, t);
                let f = rate_factor(theta, t);
                for (k, b) in builders.iter_mut().enumerate() {
                    let rhs = c[k / 2] * f;
                    b.case(lhs[k], rhs, REL_SLACK, || format!("theta={theta}, mu={mu}, t={t}"));
                }
            }
        }
    }
    Ok(builders.into_iter().map(ReportBuilder::finish).collect())
}

/// The two sides of the integral sandwich: `(lower, sum, upper)`.
pub fn sandwich(theta: f64, mu: f64, j: usize, k: usize) -> (f64, f64, f64) {
    let e = 1.0 - theta;
    let v = mu * e;
    let lower = (((k + 1) as f64).powf(e) - (j as f64).powf(e)) / v;
    let upper = ((k as f64).powf(e) - ((j - 1) as f64).powf(e)) / v;
    let sum: f64 = (j..=k).map(|l| (l as f64).powf(-theta) / mu).sum();
    (lower, sum, upper)
}

/// Checks the sandwich over all `j <= k` on a grid covering `[1, k_max]`:
/// every `j = k`, and every pair from a geometric ladder.
pub fn sandwich_check(thetas: &[f64], mus: &[f64], k_max: usize) -> Result<VerificationReport> {
    if k_max < 1 {
        return Err(Error::input("k_max must be positive"));
    }
    for &th in thetas {
        if !(th > 0.0 && th < 1.0) {
            return Err(Error::input(format!("theta must lie in (0, 1), got {th}")));
        }
    }
    let mut ladder: Vec<usize> = vec![1, 2, 3];
    let mut x = 4.0f64;
    while (x as usize) <= k_max {
        ladder.push(x as usize);
        x *= 1.25;
    }
    ladder.push(k_max);
    ladder.sort_unstable();
    ladder.dedup();
    let mut b = ReportBuilder::new("integral-sandwich")
        .param("thetas", thetas.to_vec())
        .param("mus", mus.to_vec())
        .param("k_max", k_max);
    for &theta in thetas {
        for &mu in mus {
            let p = prefix(theta, mu, k_max);
            let e = 1.0 - theta;
            let v = mu * e;
            let mut pairs: Vec<(usize, usize)> = (1..=k_max).map(|j| (j, j)).collect();
            for (i, &j) in ladder.iter().enumerate() {
                for &k in &ladder[i..] {
                    pairs.push((j, k));
                }
            }
            for (j, k) in pairs {
                let sum = if j == k {
                    (j as f64).powf(-theta) / mu
                } else {
                    p[k] - p[j - 1]
                };
                let lower = (((k + 1) as f64).powf(e) - (j as f64).powf(e)) / v;
                let upper = ((k as f64).powf(e) - ((j - 1) as f64).powf(e)) / v;
                let what = || format!("theta={theta}, mu={mu}, j={j}, k={k}");
                b.case(lower, sum, REL_SLACK, what);
                b.case(sum, upper, REL_SLACK, what);
            }
        }
    }
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sandwich_single_term() {
        let (lo, s, hi) = sandwich(0.75, 1.0, 3, 3);
        assert!((s - 3f64.powf(-0.75)).abs() < 1e-15);
        assert!((lo - (4f64.powf(0.25) - 3f64.powf(0.25)) / 0.25).abs() < 1e-12);
        assert!((hi - (3f64.powf(0.25) - 2f64.powf(0.25)) / 0.25).abs() < 1e-12);
        assert!(lo <= s && s <= hi);
    }

    #[test]
    fn weighted_sum_t4_by_hand() {
        let g = |j: f64| j.powf(-0.75);
        let terms = [
            g(2.0) * 1.0 / (2f64.sqrt() * (1.0 + g(3.0) + g(4.0)).sqrt()),
            g(3.0) * (1.0 + g(2.0)) / (3f64.sqrt() * (1.0 + g(4.0)).sqrt()),
            g(4.0) * (1.0 + g(2.0) + g(3.0)) / 2.0,
        ];
        let hand: f64 = terms.iter().sum();
        let lhs = weighted_sum_lhs(0.75, 1.0, 4, Variant::Stated);
        assert!((lhs - hand).abs() < 1e-14);
        assert!(lhs <= c_theta(0.75, 1.0) * rate_factor(0.75, 4));
    }

    #[test]
    fn small_sweep_passes_including_two_thirds() {
        let reports = sum_bound_checks(&[0.6, 2.0 / 3.0, 0.8], &[1.0, 2.0], 300).unwrap();
        assert_eq!(reports.len(), 4);
        for r in &reports {
            assert!(r.passed(), "{}: {:?}", r.check, r.violations);
            assert_eq!(r.n_cases, 3 * 2 * 297);
        }
        let s = sandwich_check(&[0.3, 0.6, 0.9], &[1.0, 2.0], 500).unwrap();
        assert!(s.passed());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(sum_bound_checks(&[0.5], &[1.0], 10).is_err());
        assert!(sum_bound_checks(&[0.6], &[1.0], 3).is_err());
        assert!(sandwich_check(&[1.0], &[1.0], 10).is_err());
    }

    #[test]
    fn violations_are_reported() {
        // A deliberately tiny constant must be flagged.
        let mut b = ReportBuilder::new("probe");
        let lhs = weighted_sum_lhs(0.75, 1.0, 10, Variant::Applied);
        assert!(!b.case(lhs, 1e-6, REL_SLACK, || "t=10".into()));
        let r = b.finish();
        assert_eq!(r.n_violations, 1);
        assert!(r.worst_margin < 0.0);
        assert_eq!(r.violations[0].case, "t=10");
    }
}
