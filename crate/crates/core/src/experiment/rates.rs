//! Log-log rate fitting over trial medians.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::runner::{medians_by_t, TrialResult};

/// Least-squares line `log e = intercept + slope log t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub t_range: (usize, usize),
    pub n_points: usize,
}

/// Median of a nonempty slice (NaN if empty).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fits a power law to `(t, error)` points with positive errors.
pub fn fit_power_law(points: &[(usize, f64)]) -> Result<RateFit> {
    let pts: Vec<(usize, f64)> = points
        .iter()
        .copied()
        .filter(|(_, e)| *e > 0.0 && e.is_finite())
        .collect();
    let mut ts: Vec<usize> = pts.iter().map(|p| p.0).collect();
    ts.sort_unstable();
    ts.dedup();
    if ts.len() < 3 {
        return Err(Error::input(format!(
            "rate fit needs at least 3 distinct t with positive error, got {}",
            ts.len()
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(RateFit {
        slope,
        intercept,
        residual: (rss / n).sqrt(),
        t_range: (*ts.first().unwrap(), *ts.last().unwrap()),
        n_points: pts.len(),
    })
}

/// Fits the medians across trials at every recorded `t >= t_min`.
pub fn fit_rate(results: &[&TrialResult], t_min: usize) -> Result<RateFit> {
    let pts: Vec<(usize, f64)> = medians_by_t(results).into_iter().filter(|(t, _)| *t >= t_min).collect();
    fit_power_law(&pts)
}
