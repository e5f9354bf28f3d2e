//! Hypotheses as finite kernel expansions.
//!
//! An [`Expansion`] is `sum_i c_i k(center_i, .)`. Over a pairwise kernel it
//! represents some `f` on `X × X`; over a univariate kernel it represents a `g`
//! on `X`, which [`LiftedHypothesis`] turns into `(x1, x2) -> g(x1) - g(x2)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{gram, Kernel, Pair, PairwiseKernel, UnivariateKernel};

/// Anything that can be evaluated at a pair of points.
pub trait PairwiseFunction {
    fn value(&self, a: &[f64], b: &[f64]) -> f64;
}

impl<F: Fn(&[f64], &[f64]) -> f64> PairwiseFunction for F {
    fn value(&self, a: &[f64], b: &[f64]) -> f64 {
        self(a, b)
    }
}

/// Exact-equality hash key for a coordinate vector.
pub(crate) fn coord_key(x: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 compare equal, so normalise before taking bits.
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

/// A finite linear combination of kernel sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion<K: Kernel> {
    kernel: K,
    centers: Vec<K::Input>,
    coefficients: Vec<f64>,
    cached_sq_norm: Option<f64>,
}

impl<K: Kernel> Expansion<K> {
    /// The zero function.
    pub fn zero(kernel: K) -> Self {
        Expansion {
            kernel,
            centers: Vec::new(),
            coefficients: Vec::new(),
            cached_sq_norm: Some(0.0),
        }
    }

    pub fn from_terms(kernel: K, centers: Vec<K::Input>, coefficients: Vec<f64>) -> Result<Self> {
        if centers.len() != coefficients.len() {
            return Err(Error::input(format!(
                "{} centers but {} coefficients",
                centers.len(),
                coefficients.len()
            )));
        }
        for c in &centers {
            kernel.check_input(c)?;
        }
        Ok(Expansion {
            kernel,
            centers,
            coefficients,
            cached_sq_norm: None,
        })
    }

    pub fn kernel(&self) -> &K {
        &self.kernel
    }

    pub fn centers(&self) -> &[K::Input] {
        &self.centers
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// `sum_i c_i k(center_i, p)`.
    pub fn evaluate(&self, p: &K::Input) -> f64 {
        self.centers
            .iter()
            .zip(&self.coefficients)
            .map(|(c, a)| a * self.kernel.eval(c, p))
            .sum()
    }

    pub fn try_evaluate(&self, p: &K::Input) -> Result<f64> {
        self.kernel.check_input(p)?;
        Ok(self.evaluate(p))
    }

    /// Squared RKHS norm, from the cache when present.
    pub fn sq_norm(&self) -> f64 {
        match self.cached_sq_norm {
            Some(v) => v.max(0.0),
            None => self.sq_norm_exact(),
        }
    }

    /// `c^T Gram c`, recomputed from scratch and clamped at zero.
    pub fn sq_norm_exact(&self) -> f64 {
        if self.centers.is_empty() {
            return 0.0;
        }
        let n = self.centers.len();
        let mut acc = 0.0;
        for i in 0..n {
            let ci = self.coefficients[i];
            if ci == 0.0 {
                continue;
            }
            let mut row = 0.5 * ci * self.kernel.eval(&self.centers[i], &self.centers[i]);
            for j in 0..i {
                row += self.coefficients[j] * self.kernel.eval(&self.centers[i], &self.centers[j]);
            }
            acc += 2.0 * ci * row;
        }
        acc.max(0.0)
    }

    pub fn rkhs_norm(&self) -> f64 {
        self.sq_norm().sqrt()
    }

    pub fn cached_sq_norm(&self) -> Option<f64> {
        self.cached_sq_norm
    }

    /// Installs a squared norm maintained by the caller.
    pub fn set_cached_sq_norm(&mut self, v: f64) {
        self.cached_sq_norm = Some(v.max(0.0));
    }

    /// Recomputes and stores the squared norm.
    pub fn refresh_norm(&mut self) {
        self.cached_sq_norm = Some(self.sq_norm_exact());
    }

    /// Appends terms. With `merge`, a new center that coincides exactly with an
    /// existing one adds to that coefficient instead of creating a new term.
    pub fn add_scaled_terms(&mut self, new_centers: Vec<K::Input>, new_coeffs: Vec<f64>, merge: bool) -> Result<()> {
        if new_centers.len() != new_coeffs.len() {
            return Err(Error::input(format!(
                "{} centers but {} coefficients",
                new_centers.len(),
                new_coeffs.len()
            )));
        }
        for c in &new_centers {
            self.kernel.check_input(c)?;
        }
        self.cached_sq_norm = None;
        if !merge {
            self.centers.extend(new_centers);
            self.coefficients.extend(new_coeffs);
            return Ok(());
        }
        let mut index: HashMap<Vec<u64>, usize> = self
            .centers
            .iter()
            .enumerate()
            .map(|(i, c)| (coord_key(&K::to_coords(c)), i))
            .collect();
        for (c, a) in new_centers.into_iter().zip(new_coeffs) {
            let key = coord_key(&K::to_coords(&c));
            match index.get(&key) {
                Some(&i) => self.coefficients[i] += a,
                None => {
                    index.insert(key, self.centers.len());
                    self.centers.push(c);
                    self.coefficients.push(a);
                }
            }
        }
        Ok(())
    }

    /// Adds `delta` to coefficient `i`. Invalidates the norm cache.
    pub fn add_to_coefficient(&mut self, i: usize, delta: f64) {
        self.coefficients[i] += delta;
        self.cached_sq_norm = None;
    }

    /// Multiplies every coefficient by `c`.
    pub fn scale(&mut self, c: f64) {
        for a in &mut self.coefficients {
            *a *= c;
        }
        if let Some(v) = self.cached_sq_norm.as_mut() {
            *v *= c * c;
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut h = self.clone();
        h.scale(c);
        h
    }

    /// Concatenation of the two term lists (the sum of the functions).
    pub fn plus(&self, other: &Self) -> Self {
        let mut h = self.clone();
        h.centers.extend(other.centers.iter().cloned());
        h.coefficients.extend_from_slice(&other.coefficients);
        h.cached_sq_norm = None;
        h
    }

    /// Metric projection onto the closed ball of radius `radius`.
    pub fn project_ball(&self, radius: f64) -> Result<Self> {
        let mut h = self.clone();
        h.project_ball_in_place(radius)?;
        Ok(h)
    }

    /// In-place projection; returns the scale factor applied (1 when inactive).
    pub fn project_ball_in_place(&mut self, radius: f64) -> Result<f64> {
        if !(radius >= 0.0) {
            return Err(Error::input(format!("ball radius must be nonnegative, got {radius}")));
        }
        let norm = self.rkhs_norm();
        if norm <= radius {
            return Ok(1.0);
        }
        let factor = radius / norm;
        for a in &mut self.coefficients {
            *a *= factor;
        }
        self.cached_sq_norm = Some(radius * radius);
        Ok(factor)
    }

    /// JSON form `{kernel, centers, coefficients, dim}`.
    pub fn to_json(&self) -> Result<String> {
        let doc = ExpansionDoc {
            kernel: self.kernel.spec(),
            dim: Some(self.kernel.domain_dim()),
            centers: self.centers.iter().map(K::to_coords).collect(),
            coefficients: self.coefficients.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    /// Parses the JSON form. Without a `dim` field the dimension is inferred
    /// from the first center.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ExpansionDoc = serde_json::from_str(text)?;
        let dim = match (doc.dim, doc.centers.first()) {
            (Some(d), _) => d,
            (None, Some(c)) => c.len() / K::COORD_MULTIPLE,
            (None, None) => 1,
        };
        let kernel = K::from_spec(&doc.kernel, dim)?;
        let centers = doc
            .centers
            .iter()
            .map(|c| kernel.input_from_coords(c))
            .collect::<Result<Vec<_>>>()?;
        Expansion::from_terms(kernel, centers, doc.coefficients)
    }
}

#[derive(Serialize, Deserialize)]
struct ExpansionDoc {
    kernel: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    centers: Vec<Vec<f64>>,
    coefficients: Vec<f64>,
}

impl Expansion<UnivariateKernel> {
    /// `sum_i c_i G(center_i, x)` on a raw slice.
    pub fn eval_at(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.coefficients)
            .map(|(c, a)| a * self.kernel.eval_slices(c, x))
            .sum()
    }
}

impl PairwiseFunction for Expansion<PairwiseKernel> {
    fn value(&self, a: &[f64], b: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.coefficients)
            .map(|(c, w)| w * self.kernel.eval_slices(&c.first, &c.second, a, b))
            .sum()
    }
}

/// The image `Im(g)` of a univariate expansion: `(x1, x2) -> g(x1) - g(x2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedHypothesis {
    pub base: Expansion<UnivariateKernel>,
}

pub fn lift(g: Expansion<UnivariateKernel>) -> LiftedHypothesis {
    LiftedHypothesis { base: g }
}

impl LiftedHypothesis {
    pub fn evaluate(&self, p: &Pair) -> f64 {
        self.value(&p.first, &p.second)
    }
}

impl PairwiseFunction for LiftedHypothesis {
    fn value(&self, a: &[f64], b: &[f64]) -> f64 {
        self.base.eval_at(a) - self.base.eval_at(b)
    }
}

/// `g = sum_i c_i (G_{a_i} - G_{b_i})`, kept together with its pair form
/// `sum_i c_i K_{(a_i, b_i)}` under the induced kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceCombination {
    pub base: UnivariateKernel,
    pub pairs: Vec<Pair>,
    pub coefficients: Vec<f64>,
}

impl DifferenceCombination {
    pub fn new(base: UnivariateKernel, pairs: Vec<Pair>, coefficients: Vec<f64>) -> Result<Self> {
        if pairs.len() != coefficients.len() {
            return Err(Error::input("pairs and coefficients differ in length"));
        }
        Ok(DifferenceCombination {
            base,
            pairs,
            coefficients,
        })
    }

    /// The univariate expansion with `2n` terms.
    pub fn univariate(&self) -> Result<Expansion<UnivariateKernel>> {
        let mut centers = Vec::with_capacity(2 * self.pairs.len());
        let mut coeffs = Vec::with_capacity(2 * self.pairs.len());
        for (p, c) in self.pairs.iter().zip(&self.coefficients) {
            centers.push(p.first.clone());
            coeffs.push(*c);
            centers.push(p.second.clone());
            coeffs.push(-*c);
        }
        Expansion::from_terms(self.base.clone(), centers, coeffs)
    }

    /// The pairwise expansion with `n` terms.
    pub fn pairwise(&self) -> Result<Expansion<PairwiseKernel>> {
        Expansion::from_terms(
            PairwiseKernel::induced(self.base.clone()),
            self.pairs.clone(),
            self.coefficients.clone(),
        )
    }
}

/// Returns `(||g||_G, ||Im(g)||_K)`, each from its own Gram matrix.
pub fn isometry_check(g: &DifferenceCombination) -> Result<(f64, f64)> {
    if g.pairs.is_empty() {
        return Ok((0.0, 0.0));
    }
    let quad = |m: &nalgebra::DMatrix<f64>, c: &[f64]| -> f64 {
        let v = nalgebra::DVector::from_column_slice(c);
        (v.transpose() * m * &v)[0].max(0.0).sqrt()
    };
    let u = g.univariate()?;
    let norm_g = quad(&gram(&g.base, u.centers())?, u.coefficients());
    let k = PairwiseKernel::induced(g.base.clone());
    let norm_k = quad(&gram(&k, &g.pairs)?, &g.coefficients);
    Ok((norm_g, norm_k))
}
