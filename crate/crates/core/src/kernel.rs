//! Mercer kernels on `X` and on `X × X`.
//!
//! Univariate kernels act on points of `R^d`. Pairwise kernels act on ordered
//! pairs of points; the induced construction builds one from a univariate
//! kernel `G`:
//!
//! ```text
//! K((x1, x2), (z1, z2)) = G(x1, z1) + G(x2, z2) - G(x1, z2) - G(x2, z1)
//! ```
//!
//! Config files name kernels with short spec strings: `gaussian:SIGMA`,
//! `laplace:SIGMA`, `linear`, `poly:DEGREE:OFFSET`, and `induced(...)` around
//! any of these for the pairwise construction. A bare `gaussian:SIGMA` or
//! `laplace:SIGMA` used as a pairwise kernel is the direct kernel on the
//! concatenated pair.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance applied to Gram eigenvalues, scaled by the trace.
pub const PSD_RELATIVE_TOL: f64 = 1e-10;

/// Lattice points per axis for grid-based kappa bounds.
pub const DEFAULT_KAPPA_GRID: usize = 64;

/// Safety factor applied to grid-based kappa values.
pub const KAPPA_INFLATION: f64 = 1.01;

// Total lattice size cap for box domains; keeps the pair sweep tractable in d > 1.
const MAX_LATTICE_POINTS: usize = 4096;

/// An ordered pair of points in `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl Pair {
    pub fn new(first: Vec<f64>, second: Vec<f64>) -> Self {
        Pair { first, second }
    }

    /// The pair with its two entries swapped.
    pub fn swapped(&self) -> Self {
        Pair {
            first: self.second.clone(),
            second: self.first.clone(),
        }
    }
}

/// Common interface of univariate and pairwise kernels.
pub trait Kernel: Clone + fmt::Debug + Send + Sync {
    type Input: Clone + PartialEq + fmt::Debug + Send + Sync;

    /// Kernel value without dimension checks.
    fn eval(&self, a: &Self::Input, b: &Self::Input) -> f64;

    fn check_input(&self, x: &Self::Input) -> Result<()>;

    fn try_eval(&self, a: &Self::Input, b: &Self::Input) -> Result<f64> {
        self.check_input(a)?;
        self.check_input(b)?;
        Ok(self.eval(a, b))
    }

    /// Config-file spec string of this kernel.
    fn spec(&self) -> String;

    fn domain_dim(&self) -> usize;

    /// Flat coordinate encoding of an input (pairs are concatenated).
    fn to_coords(x: &Self::Input) -> Vec<f64>;

    fn input_from_coords(&self, coords: &[f64]) -> Result<Self::Input>;

    /// Coordinates per input, as a multiple of the domain dimension.
    const COORD_MULTIPLE: usize;

    fn from_spec(spec: &str, dim: usize) -> Result<Self>;
}

/// Families of univariate kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `exp(-|x - x'|^2 / sigma)`
    Gaussian { sigma: f64 },
    /// `exp(-|x - x'| / sigma)`
    Laplace { sigma: f64 },
    /// `x . x'`
    Linear,
    /// `(x . x' + offset)^degree`
    Polynomial { degree: u32, offset: f64 },
}

impl Family {
    fn validate(&self) -> Result<()> {
        match *self {
            Family::Gaussian { sigma } | Family::Laplace { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::config(format!("bandwidth must be positive, got {sigma}")));
                }
            }
            Family::Linear => {}
            Family::Polynomial { degree, offset } => {
                if degree == 0 {
                    return Err(Error::config("polynomial degree must be positive"));
                }
                if !(offset >= 0.0 && offset.is_finite()) {
                    return Err(Error::config(format!(
                        "polynomial offset must be nonnegative, got {offset}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn spec(&self) -> String {
        match *self {
            Family::Gaussian { sigma } => format!("gaussian:{sigma}"),
            Family::Laplace { sigma } => format!("laplace:{sigma}"),
            Family::Linear => "linear".to_string(),
            Family::Polynomial { degree, offset } => format!("poly:{degree}:{offset}"),
        }
    }

    fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let mut parts = spec.split(':');
        let name = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse("kernel", format!("bad number `{s}` in `{spec}`")))
        };
        let family = match (name, args.as_slice()) {
            ("gaussian", [s]) => Family::Gaussian { sigma: num(s)? },
            ("laplace", [s]) => Family::Laplace { sigma: num(s)? },
            ("linear", []) => Family::Linear,
            ("poly", [d, o]) => {
                let degree = d
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| Error::parse("kernel", format!("bad degree `{d}` in `{spec}`")))?;
                Family::Polynomial {
                    degree,
                    offset: num(o)?,
                }
            }
            _ => return Err(Error::parse("kernel", format!("unknown kernel spec `{spec}`"))),
        };
        family.validate()?;
        Ok(family)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::Dimension { expected, got: x.len() });
    }
    Ok(())
}

/// A Mercer kernel `G` on `X ⊂ R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateKernel {
    family: Family,
    dim: usize,
}

impl UnivariateKernel {
    pub fn new(family: Family, dim: usize) -> Result<Self> {
        family.validate()?;
        if dim == 0 {
            return Err(Error::config("domain dimension must be positive"));
        }
        Ok(UnivariateKernel { family, dim })
    }

    pub fn gaussian(sigma: f64, dim: usize) -> Result<Self> {
        Self::new(Family::Gaussian { sigma }, dim)
    }

    pub fn laplace(sigma: f64, dim: usize) -> Result<Self> {
        Self::new(Family::Laplace { sigma }, dim)
    }

    pub fn linear(dim: usize) -> Result<Self> {
        Self::new(Family::Linear, dim)
    }

    pub fn polynomial(degree: u32, offset: f64, dim: usize) -> Result<Self> {
        Self::new(Family::Polynomial { degree, offset }, dim)
    }

    /// Parses `gaussian:SIGMA`, `laplace:SIGMA`, `linear` or `poly:DEGREE:OFFSET`.
    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        Self::new(Family::parse(spec)?, dim)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Kernel value on raw coordinate slices.
    #[inline]
    pub fn eval_slices(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.family {
            Family::Gaussian { sigma } => (-sq_dist(a, b) / sigma).exp(),
            Family::Laplace { sigma } => (-sq_dist(a, b).sqrt() / sigma).exp(),
            Family::Linear => dot(a, b),
            Family::Polynomial { degree, offset } => (dot(a, b) + offset).powi(degree as i32),
        }
    }
}

impl Kernel for UnivariateKernel {
    type Input = Vec<f64>;

    fn eval(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        self.eval_slices(a, b)
    }

    fn check_input(&self, x: &Vec<f64>) -> Result<()> {
        check_dim(self.dim, x)
    }

    fn spec(&self) -> String {
        self.family.spec()
    }

    fn domain_dim(&self) -> usize {
        self.dim
    }

    fn to_coords(x: &Vec<f64>) -> Vec<f64> {
        x.clone()
    }

    fn input_from_coords(&self, coords: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, coords)?;
        Ok(coords.to_vec())
    }

    const COORD_MULTIPLE: usize = 1;

    fn from_spec(spec: &str, dim: usize) -> Result<Self> {
        Self::parse(spec, dim)
    }
}

/// Where a pairwise kernel comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PairSource {
    Induced(UnivariateKernel),
    /// Gaussian kernel on the concatenated pair in `R^{2d}`.
    DirectGaussian {
        sigma: f64,
    },
    /// Laplace kernel on the concatenated pair in `R^{2d}`.
    DirectLaplace {
        sigma: f64,
    },
}

/// A Mercer kernel `K` on `X × X`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseKernel {
    source: PairSource,
    dim: usize,
}

impl PairwiseKernel {
    pub fn induced(base: UnivariateKernel) -> Self {
        let dim = base.dim;
        PairwiseKernel {
            source: PairSource::Induced(base),
            dim,
        }
    }

    pub fn direct_gaussian(sigma: f64, dim: usize) -> Result<Self> {
        Family::Gaussian { sigma }.validate()?;
        if dim == 0 {
            return Err(Error::config("domain dimension must be positive"));
        }
        Ok(PairwiseKernel {
            source: PairSource::DirectGaussian { sigma },
            dim,
        })
    }

    pub fn direct_laplace(sigma: f64, dim: usize) -> Result<Self> {
        Family::Laplace { sigma }.validate()?;
        if dim == 0 {
            return Err(Error::config("domain dimension must be positive"));
        }
        Ok(PairwiseKernel {
            source: PairSource::DirectLaplace { sigma },
            dim,
        })
    }

    /// Parses `induced(<univariate spec>)`, or a direct `gaussian:SIGMA` / `laplace:SIGMA`.
    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        let spec = spec.trim();
        if let Some(inner) = spec.strip_prefix("induced(").and_then(|s| s.strip_suffix(')')) {
            return Ok(Self::induced(UnivariateKernel::parse(inner, dim)?));
        }
        match Family::parse(spec)? {
            Family::Gaussian { sigma } => Self::direct_gaussian(sigma, dim),
            Family::Laplace { sigma } => Self::direct_laplace(sigma, dim),
            _ => Err(Error::parse(
                "kernel",
                format!("`{spec}` is not a pairwise kernel; wrap it as induced({spec})"),
            )),
        }
    }

    pub fn source(&self) -> &PairSource {
        &self.source
    }

    /// The univariate kernel `G` when this kernel is induced.
    pub fn base(&self) -> Option<&UnivariateKernel> {
        match &self.source {
            PairSource::Induced(g) => Some(g),
            _ => None,
        }
    }

    /// Kernel value `K((a1, a2), (b1, b2))` on raw coordinate slices.
    #[inline]
    pub fn eval_slices(&self, a1: &[f64], a2: &[f64], b1: &[f64], b2: &[f64]) -> f64 {
        match &self.source {
            PairSource::Induced(g) => {
                g.eval_slices(a1, b1) + g.eval_slices(a2, b2) - g.eval_slices(a1, b2) - g.eval_slices(a2, b1)
            }
            PairSource::DirectGaussian { sigma } => (-(sq_dist(a1, b1) + sq_dist(a2, b2)) / sigma).exp(),
            PairSource::DirectLaplace { sigma } => (-(sq_dist(a1, b1) + sq_dist(a2, b2)).sqrt() / sigma).exp(),
        }
    }

    /// `K(p, p)` for the pair `(a, b)`.
    pub fn diagonal(&self, a: &[f64], b: &[f64]) -> f64 {
        self.eval_slices(a, b, a, b)
    }
}

impl Kernel for PairwiseKernel {
    type Input = Pair;

    fn eval(&self, a: &Pair, b: &Pair) -> f64 {
        self.eval_slices(&a.first, &a.second, &b.first, &b.second)
    }

    fn check_input(&self, x: &Pair) -> Result<()> {
        check_dim(self.dim, &x.first)?;
        check_dim(self.dim, &x.second)
    }

    fn spec(&self) -> String {
        match &self.source {
            PairSource::Induced(g) => format!("induced({})", g.spec()),
            PairSource::DirectGaussian { sigma } => format!("gaussian:{sigma}"),
            PairSource::DirectLaplace { sigma } => format!("laplace:{sigma}"),
        }
    }

    fn domain_dim(&self) -> usize {
        self.dim
    }

    fn to_coords(x: &Pair) -> Vec<f64> {
        let mut c = x.first.clone();
        c.extend_from_slice(&x.second);
        c
    }

    fn input_from_coords(&self, coords: &[f64]) -> Result<Pair> {
        check_dim(2 * self.dim, coords)?;
        let (a, b) = coords.split_at(self.dim);
        Ok(Pair::new(a.to_vec(), b.to_vec()))
    }

    const COORD_MULTIPLE: usize = 2;

    fn from_spec(spec: &str, dim: usize) -> Result<Self> {
        Self::parse(spec, dim)
    }
}

/// The set over which `kappa` takes its supremum.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Axis-aligned box `[lo_i, hi_i]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// A finite point set (e.g. the support of a discrete measure).
    Points(Vec<Vec<f64>>),
}

impl Domain {
    fn dim(&self) -> Result<usize> {
        match self {
            Domain::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::input("box bounds must be nonempty and of equal length"));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err(Error::input("box requires lo <= hi on every axis"));
                }
                Ok(lo.len())
            }
            Domain::Points(pts) => {
                let first = pts.first().ok_or_else(|| Error::input("empty point set"))?;
                Ok(first.len())
            }
        }
    }

    /// Largest Euclidean distance between two points of the domain.
    fn diameter(&self) -> f64 {
        match self {
            Domain::Box { lo, hi } => sq_dist(lo, hi).sqrt(),
            Domain::Points(pts) => {
                let mut best: f64 = 0.0;
                for (i, a) in pts.iter().enumerate() {
                    for b in &pts[i + 1..] {
                        best = best.max(sq_dist(a, b));
                    }
                }
                best.sqrt()
            }
        }
    }

    /// Evenly spaced points, `per_axis` per coordinate (the points themselves for a finite domain).
    pub fn lattice(&self, per_axis: usize) -> Vec<Vec<f64>> {
        match self {
            Domain::Points(pts) => pts.clone(),
            Domain::Box { lo, hi } => {
                let d = lo.len();
                let cap = (MAX_LATTICE_POINTS as f64).powf(1.0 / d as f64).floor() as usize;
                let n = per_axis.min(cap.max(2)).max(1);
                let axis = |i: usize, k: usize| {
                    if n == 1 {
                        0.5 * (lo[i] + hi[i])
                    } else {
                        lo[i] + (hi[i] - lo[i]) * k as f64 / (n - 1) as f64
                    }
                };
                let total = n.pow(d as u32);
                (0..total)
                    .map(|mut idx| {
                        (0..d)
                            .map(|i| {
                                let k = idx % n;
                                idx /= n;
                                axis(i, k)
                            })
                            .collect()
                    })
                    .collect()
            }
        }
    }
}

/// How a kappa value was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaProvenance {
    Analytic,
    Grid { n_points: usize },
}

/// Upper bound on `sqrt(K(p, p))` over the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaBound {
    pub value: f64,
    /// The grid maximum before inflation (equals `value` for analytic bounds).
    pub raw: f64,
    pub provenance: KappaProvenance,
}

/// Kappa with the default lattice resolution.
pub fn kappa(k: &PairwiseKernel, domain: &Domain) -> Result<KappaBound> {
    kappa_with_grid(k, domain, DEFAULT_KAPPA_GRID)
}

/// Kappa, computed analytically where a closed form exists and otherwise as the
/// inflated maximum over a deterministic lattice.
pub fn kappa_with_grid(k: &PairwiseKernel, domain: &Domain, per_axis: usize) -> Result<KappaBound> {
    let dim = domain.dim()?;
    if dim != k.dim {
        return Err(Error::Dimension {
            expected: k.dim,
            got: dim,
        });
    }
    let analytic = |value: f64| KappaBound {
        value,
        raw: value,
        provenance: KappaProvenance::Analytic,
    };
    match &k.source {
        PairSource::DirectGaussian { .. } | PairSource::DirectLaplace { .. } => Ok(analytic(1.0)),
        PairSource::Induced(g) => {
            let diam = domain.diameter();
            match g.family {
                // 2 - 2G is increasing in the distance for radial kernels.
                Family::Gaussian { sigma } => Ok(analytic((2.0 - 2.0 * (-diam * diam / sigma).exp()).max(0.0).sqrt())),
                Family::Laplace { sigma } => Ok(analytic((2.0 - 2.0 * (-diam / sigma).exp()).max(0.0).sqrt())),
                Family::Linear => Ok(analytic(diam)),
                Family::Polynomial { .. } => Ok(grid_kappa(k, domain, per_axis)),
            }
        }
    }
}

fn grid_kappa(k: &PairwiseKernel, domain: &Domain, per_axis: usize) -> KappaBound {
    let pts = domain.lattice(per_axis);
    let mut best: f64 = 0.0;
    for a in &pts {
        for b in &pts {
            best = best.max(k.diagonal(a, b));
        }
    }
    let raw = best.max(0.0).sqrt();
    KappaBound {
        value: raw * KAPPA_INFLATION,
        raw,
        provenance: KappaProvenance::Grid { n_points: pts.len() },
    }
}

/// Gram matrix `[k(p_i, p_j)]`.
pub fn gram<K: Kernel>(k: &K, points: &[K::Input]) -> Result<DMatrix<f64>> {
    if points.is_empty() {
        return Err(Error::input("gram matrix of an empty point list"));
    }
    for p in points {
        k.check_input(p)?;
    }
    let n = points.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = k.eval(&points[i], &points[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Whether a symmetric matrix is PSD up to `PSD_RELATIVE_TOL × trace`.
pub fn is_psd(m: &DMatrix<f64>) -> bool {
    let tol = PSD_RELATIVE_TOL * m.trace().abs();
    min_eigenvalue(m) >= -tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn g1() -> UnivariateKernel {
        UnivariateKernel::gaussian(1.0, 1).unwrap()
    }

    #[test]
    fn gaussian_values() {
        let g = g1();
        assert_eq!(g.eval(&vec![0.3], &vec![0.3]), 1.0);
        assert!((g.eval(&vec![0.0], &vec![1.0]) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn linear_dot_product() {
        let g = UnivariateKernel::linear(2).unwrap();
        assert_eq!(g.eval(&vec![1.0, 2.0], &vec![3.0, 4.0]), 11.0);
    }

    #[test]
    fn dimension_mismatch_is_an_input_error() {
        let g = UnivariateKernel::linear(2).unwrap();
        assert!(matches!(
            g.try_eval(&vec![1.0], &vec![1.0, 2.0]),
            Err(Error::Dimension { expected: 2, got: 1 })
        ));
        let k = PairwiseKernel::induced(g);
        let p = Pair::new(vec![1.0, 0.0], vec![1.0]);
        assert!(k.try_eval(&p, &p).is_err());
    }

    #[test]
    fn induced_examples() {
        let lin = PairwiseKernel::induced(UnivariateKernel::linear(1).unwrap());
        let p = Pair::new(vec![1.0], vec![0.0]);
        assert_eq!(lin.eval(&p, &p), 1.0);

        let k = PairwiseKernel::induced(g1());
        let eq = Pair::new(vec![0.4], vec![0.4]);
        let q = Pair::new(vec![-0.2], vec![1.3]);
        assert_eq!(k.eval(&eq, &q), 0.0);

        let (x, y) = (vec![0.1], vec![0.7]);
        let p = Pair::new(x.clone(), y.clone());
        let expected = 2.0 - 2.0 * g1().eval(&x, &y);
        assert!((k.eval(&p, &p) - expected).abs() < 1e-15);
    }

    #[test]
    fn induced_antisymmetry_within_pair() {
        let k = PairwiseKernel::induced(UnivariateKernel::laplace(0.7, 2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut pt = || vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let p = Pair::new(pt(), pt());
            let q = Pair::new(pt(), pt());
            assert!((k.eval(&p.swapped(), &q) + k.eval(&p, &q)).abs() < 1e-14);
        }
    }

    #[test]
    fn kappa_examples() {
        let k = PairwiseKernel::induced(UnivariateKernel::gaussian(0.5, 1).unwrap());
        let b = Domain::Box {
            lo: vec![-3.0],
            hi: vec![3.0],
        };
        let kb = kappa(&k, &b).unwrap();
        assert!(kb.value <= 2f64.sqrt());
        assert_eq!(kb.provenance, KappaProvenance::Analytic);

        let lin = PairwiseKernel::induced(UnivariateKernel::linear(1).unwrap());
        let kb = kappa(
            &lin,
            &Domain::Box {
                lo: vec![-1.0],
                hi: vec![1.0],
            },
        )
        .unwrap();
        assert!((kb.value - 2.0).abs() < 1e-15);

        let poly = PairwiseKernel::induced(UnivariateKernel::polynomial(2, 1.0, 1).unwrap());
        let kb = kappa(&poly, &Domain::Points(vec![vec![0.3]])).unwrap();
        assert_eq!(kb.raw, 0.0);
        assert!(matches!(kb.provenance, KappaProvenance::Grid { n_points: 1 }));
    }

    #[test]
    fn kappa_errors() {
        let k = PairwiseKernel::induced(g1());
        assert!(kappa(&k, &Domain::Points(vec![])).is_err());
        assert!(kappa(
            &k,
            &Domain::Box {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0]
            }
        )
        .is_err());
    }

    #[test]
    fn grid_kappa_dominates_denser_grid() {
        let poly = PairwiseKernel::induced(UnivariateKernel::polynomial(3, 0.5, 1).unwrap());
        let dom = Domain::Box {
            lo: vec![-1.0],
            hi: vec![0.8],
        };
        let kb = kappa_with_grid(&poly, &dom, 16).unwrap();
        for a in dom.lattice(160) {
            for b in dom.lattice(160) {
                assert!(poly.diagonal(&a, &b).sqrt() <= kb.value);
            }
        }
    }

    #[test]
    fn gram_examples() {
        let g = g1();
        let m = gram(&g, &[vec![0.2]]).unwrap();
        assert_eq!(m[(0, 0)], 1.0);
        let m = gram(&g, &[vec![0.2], vec![0.2], vec![0.9]]).unwrap();
        assert!(min_eigenvalue(&m).abs() < 1e-12);
        assert!(is_psd(&m));
        assert!(gram(&g, &[]).is_err());
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["gaussian:0.5", "laplace:2", "linear", "poly:3:1.5"] {
            let g = UnivariateKernel::parse(s, 1).unwrap();
            assert_eq!(UnivariateKernel::parse(&g.spec(), 1).unwrap(), g);
            let k = PairwiseKernel::parse(&format!("induced({s})"), 1).unwrap();
            assert_eq!(k.spec(), format!("induced({})", g.spec()));
        }
        assert!(PairwiseKernel::parse("gaussian:0.5", 2).unwrap().base().is_none());
        assert!(PairwiseKernel::parse("linear", 1).is_err());
        assert!(UnivariateKernel::parse("gaussian:-1", 1).is_err());
        assert!(UnivariateKernel::parse("cosine", 1).is_err());
    }
}
