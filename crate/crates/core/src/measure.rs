//! Data distributions, regression targets, the `L2(rho)` norm on `X × X`,
//! and the pairwise least-squares risk.
//!
//! Labels are `y = f_rho(x) + eps` with `eps` uniform on `[-s, s]`, so
//! `|y| <= M := sup |f_rho| + s` surely.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hypothesis::{coord_key, PairwiseFunction};
use crate::kernel::Domain;

/// Default Monte Carlo sample size (pairs) for continuous measures.
pub const DEFAULT_MC_PAIRS: usize = 100_000;

// Fixed stream for norms that are requested without an explicit RNG.
const MC_SEED: u64 = 0x5eed_0f0e7a;

/// One labelled observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

/// A measure with finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    support: Vec<Vec<f64>>,
    probs: Vec<f64>,
    f_rho_values: Vec<f64>,
    noise_half_width: f64,
    cdf: Vec<f64>,
    index: HashMap<Vec<u64>, usize>,
}

impl DiscreteMeasure {
    pub fn new(support: Vec<Vec<f64>>, probs: Vec<f64>, f_rho_values: Vec<f64>, noise_half_width: f64) -> Result<Self> {
        let m = support.len();
        if m == 0 {
            return Err(Error::input("discrete measure needs at least one support point"));
        }
        if probs.len() != m || f_rho_values.len() != m {
            return Err(Error::input(format!(
                "support has {m} points but {} probabilities and {} target values",
                probs.len(),
                f_rho_values.len()
            )));
        }
        let d = support[0].len();
        if d == 0 || support.iter().any(|p| p.len() != d) {
            return Err(Error::input("support points must share a positive dimension"));
        }
        if probs.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::input("probabilities must be positive"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::input(format!("probabilities sum to {total}, not 1")));
        }
        if f_rho_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("target values must be finite"));
        }
        if !(noise_half_width >= 0.0 && noise_half_width.is_finite()) {
            return Err(Error::input("noise half-width must be nonnegative"));
        }
        let mut index = HashMap::new();
        for (i, p) in support.iter().enumerate() {
            if index.insert(coord_key(p), i).is_some() {
                return Err(Error::input("support points must be distinct"));
            }
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(DiscreteMeasure {
            support,
            probs,
            f_rho_values,
            noise_half_width,
            cdf,
            index,
        })
    }

    /// Equal weights on `support`.
    pub fn uniform(support: Vec<Vec<f64>>, f_rho_values: Vec<f64>, noise_half_width: f64) -> Result<Self> {
        let m = support.len().max(1);
        Self::new(support, vec![1.0 / m as f64; m], f_rho_values, noise_half_width)
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn f_rho_values(&self) -> &[f64] {
        &self.f_rho_values
    }

    pub fn m(&self) -> usize {
        self.support.len()
    }

    /// Index of `x` in the support, by exact coordinate equality.
    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        self.index.get(&coord_key(x)).copied()
    }

    /// Replaces the regression values, keeping support, weights and noise.
    pub fn with_f_rho(&self, f_rho_values: Vec<f64>) -> Result<Self> {
        Self::new(
            self.support.clone(),
            self.probs.clone(),
            f_rho_values,
            self.noise_half_width,
        )
    }

    fn draw_index(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|c| *c <= u);
        i.min(self.support.len() - 1)
    }

    /// `sum_{a,b} p_a p_b f(u_a, u_b)^2`.
    pub fn sq_norm_exact<F: PairwiseFunction + ?Sized>(&self, f: &F) -> f64 {
        let mut acc = 0.0;
        for (a, pa) in self.support.iter().zip(&self.probs) {
            for (b, pb) in self.support.iter().zip(&self.probs) {
                let v = f.value(a, b);
                acc += pa * pb * v * v;
            }
        }
        acc
    }
}

/// Closed-form regression functions for continuous measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetFunction {
    /// Mean of `sin(pi x_i)`.
    SinSum,
    /// Mean of `x_i^2`.
    Poly2,
    /// `tanh` of the coordinate mean.
    StepFree,
}

impl TargetFunction {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim() {
            "sin-sum" => Ok(TargetFunction::SinSum),
            "poly2" => Ok(TargetFunction::Poly2),
            "step-free" => Ok(TargetFunction::StepFree),
            other => Err(Error::parse(
                "f_rho",
                format!("unknown target `{other}`; expected sin-sum, poly2 or step-free"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TargetFunction::SinSum => "sin-sum",
            TargetFunction::Poly2 => "poly2",
            TargetFunction::StepFree => "step-free",
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = x.len() as f64;
        match self {
            TargetFunction::SinSum => x.iter().map(|v| (std::f64::consts::PI * v).sin()).sum::<f64>() / n,
            TargetFunction::Poly2 => x.iter().map(|v| v * v).sum::<f64>() / n,
            TargetFunction::StepFree => (x.iter().sum::<f64>() / n).tanh(),
        }
    }

    /// Upper bound on `|f|` over the box.
    fn sup_abs(&self, lo: &[f64], hi: &[f64]) -> f64 {
        match self {
            TargetFunction::SinSum => 1.0,
            TargetFunction::Poly2 => {
                let n = lo.len() as f64;
                lo.iter().zip(hi).map(|(l, h)| (l * l).max(h * h)).sum::<f64>() / n
            }
            TargetFunction::StepFree => {
                let n = lo.len() as f64;
                let a = (lo.iter().sum::<f64>() / n).tanh().abs();
                let b = (hi.iter().sum::<f64>() / n).tanh().abs();
                a.max(b)
            }
        }
    }
}

/// Uniform distribution on a box with a catalog regression function.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerMeasure {
    lo: Vec<f64>,
    hi: Vec<f64>,
    target: TargetFunction,
    noise_half_width: f64,
}

impl SamplerMeasure {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, target: TargetFunction, noise_half_width: f64) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::input("box bounds must be nonempty and of equal length"));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::input("box requires lo < hi on every axis"));
        }
        if !(noise_half_width >= 0.0 && noise_half_width.is_finite()) {
            return Err(Error::input("noise half-width must be nonnegative"));
        }
        Ok(SamplerMeasure {
            lo,
            hi,
            target,
            noise_half_width,
        })
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    pub fn target(&self) -> TargetFunction {
        self.target
    }

    fn draw_x(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l + (h - l) * rng.random::<f64>())
            .collect()
    }
}

/// The data distribution `rho`.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Discrete(DiscreteMeasure),
    Sampler(SamplerMeasure),
}

/// A norm or risk value, with a standard error for Monte Carlo estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: Option<f64>,
}

impl Measure {
    pub fn dim(&self) -> usize {
        match self {
            Measure::Discrete(d) => d.support[0].len(),
            Measure::Sampler(s) => s.lo.len(),
        }
    }

    pub fn noise_half_width(&self) -> f64 {
        match self {
            Measure::Discrete(d) => d.noise_half_width,
            Measure::Sampler(s) => s.noise_half_width,
        }
    }

    /// The label bound `M`.
    pub fn label_bound(&self) -> f64 {
        match self {
            Measure::Discrete(d) => d.f_rho_values.iter().fold(0.0f64, |a, v| a.max(v.abs())) + d.noise_half_width,
            Measure::Sampler(s) => s.target.sup_abs(&s.lo, &s.hi) + s.noise_half_width,
        }
    }

    /// Domain over which `kappa` is taken.
    pub fn domain(&self) -> Domain {
        match self {
            Measure::Discrete(d) => Domain::Points(d.support.clone()),
            Measure::Sampler(s) => Domain::Box {
                lo: s.lo.clone(),
                hi: s.hi.clone(),
            },
        }
    }

    /// `f_rho(x)`. For discrete measures this is NaN off the support.
    pub fn f_rho(&self, x: &[f64]) -> f64 {
        match self {
            Measure::Discrete(d) => d.index_of(x).map_or(f64::NAN, |i| d.f_rho_values[i]),
            Measure::Sampler(s) => s.target.eval(x),
        }
    }

    pub fn sample_x(&self, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            Measure::Discrete(d) => d.support[d.draw_index(rng)].clone(),
            Measure::Sampler(s) => s.draw_x(rng),
        }
    }

    fn noise(&self, rng: &mut impl Rng) -> f64 {
        let s = self.noise_half_width();
        if s == 0.0 {
            0.0
        } else {
            s * (2.0 * rng.random::<f64>() - 1.0)
        }
    }

    /// Draws `(x, y)`.
    pub fn sample(&self, rng: &mut impl Rng) -> Sample {
        let (x, fx) = match self {
            Measure::Discrete(d) => {
                let i = d.draw_index(rng);
                (d.support[i].clone(), d.f_rho_values[i])
            }
            Measure::Sampler(s) => {
                let x = s.draw_x(rng);
                let fx = s.target.eval(&x);
                (x, fx)
            }
        };
        let y = fx + self.noise(rng);
        Sample { x, y }
    }

    pub fn pairwise_target(&self) -> PairwiseTarget<'_> {
        PairwiseTarget { measure: self }
    }

    /// `||f||_rho`: exact for discrete measures, Monte Carlo otherwise.
    pub fn rho_norm<F: PairwiseFunction + ?Sized>(&self, f: &F) -> Result<Estimate> {
        match self {
            Measure::Discrete(d) => Ok(Estimate {
                value: d.sq_norm_exact(f).max(0.0).sqrt(),
                stderr: None,
            }),
            Measure::Sampler(_) => {
                let mut rng = ChaCha8Rng::seed_from_u64(MC_SEED);
                self.rho_norm_monte_carlo(f, DEFAULT_MC_PAIRS, &mut rng)
            }
        }
    }

    /// `||f - f_tilde_rho||_rho`.
    pub fn rho_error<F: PairwiseFunction + ?Sized>(&self, f: &F) -> Result<Estimate> {
        let target = self.pairwise_target();
        self.rho_norm(&|a: &[f64], b: &[f64]| f.value(a, b) - target.value(a, b))
    }

    /// Monte Carlo estimate of `||f||_rho` from `n` i.i.d. pairs. The standard
    /// error is propagated from the mean square by the delta method.
    pub fn rho_norm_monte_carlo<F: PairwiseFunction + ?Sized>(
        &self,
        f: &F,
        n: usize,
        rng: &mut impl Rng,
    ) -> Result<Estimate> {
        let (mean, se) = self.monte_carlo(n, rng, |a, b, _, _| {
            let v = f.value(a, b);
            v * v
        })?;
        let value = mean.max(0.0).sqrt();
        let stderr = if value > 0.0 { se / (2.0 * value) } else { se.sqrt() };
        Ok(Estimate {
            value,
            stderr: Some(stderr),
        })
    }

    /// Pairwise least-squares risk `E (f(x, x') - y + y')^2`.
    pub fn risk<F: PairwiseFunction + ?Sized>(&self, f: &F) -> Result<Estimate> {
        match self {
            Measure::Discrete(d) => {
                let target = self.pairwise_target();
                let excess = d.sq_norm_exact(&|a: &[f64], b: &[f64]| f.value(a, b) - target.value(a, b));
                let s = d.noise_half_width;
                Ok(Estimate {
                    value: excess + 2.0 * s * s / 3.0,
                    stderr: None,
                })
            }
            Measure::Sampler(_) => {
                let mut rng = ChaCha8Rng::seed_from_u64(MC_SEED);
                self.risk_monte_carlo(f, DEFAULT_MC_PAIRS, &mut rng)
            }
        }
    }

    pub fn risk_monte_carlo<F: PairwiseFunction + ?Sized>(
        &self,
        f: &F,
        n: usize,
        rng: &mut impl Rng,
    ) -> Result<Estimate> {
        let (mean, se) = self.monte_carlo(n, rng, |a, b, ya, yb| {
            let r = f.value(a, b) - ya + yb;
            r * r
        })?;
        Ok(Estimate {
            value: mean,
            stderr: Some(se),
        })
    }

    fn monte_carlo(
        &self,
        n: usize,
        rng: &mut impl Rng,
        mut h: impl FnMut(&[f64], &[f64], f64, f64) -> f64,
    ) -> Result<(f64, f64)> {
        if n < 2 {
            return Err(Error::input("Monte Carlo needs at least 2 samples"));
        }
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let a = self.sample(rng);
            let b = self.sample(rng);
            let v = h(&a.x, &b.x, a.y, b.y);
            sum += v;
            sum_sq += v * v;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        Ok((mean, (var / nf).sqrt()))
    }
}

/// `f_tilde_rho(x, x') = f_rho(x) - f_rho(x')`.
#[derive(Debug, Clone, Copy)]
pub struct PairwiseTarget<'a> {
    measure: &'a Measure,
}

impl PairwiseFunction for PairwiseTarget<'_> {
    fn value(&self, a: &[f64], b: &[f64]) -> f64 {
        self.measure.f_rho(a) - self.measure.f_rho(b)
    }
}
