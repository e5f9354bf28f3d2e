//! The integral operator `L_K` on the grid of ordered support pairs.
//!
//! Grid functions are vectors indexed by `q = a * m + b` for the pair
//! `(u_a, u_b)`, with weights `w_q = p_a p_b`. `L_K f = sum_q w_q f(q) K_q`.
//! The symmetric form `W^{1/2} K W^{1/2} = U diag(lambda) U^T` gives
//! eigencoordinates `c = U^T W^{1/2} f`, in which the `rho`-norm is Euclidean
//! and `L_K^beta` scales coordinate `k` by `lambda_k^beta`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::hypothesis::PairwiseFunction;
use crate::kernel::PairwiseKernel;
use crate::measure::DiscreteMeasure;

/// Largest supported grid (`m^2`).
pub const MAX_GRID: usize = 2500;

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const NULL_RELATIVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SpectralModel {
    support: Vec<Vec<f64>>,
    weights: DVector<f64>,
    sqrt_w: DVector<f64>,
    kmat: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralModel {
    pub fn build(kernel: &PairwiseKernel, measure: &DiscreteMeasure) -> Result<Self> {
        let m = measure.m();
        let n = m * m;
        if n > MAX_GRID {
            return Err(Error::config(format!(
                "support grid of {n} pairs exceeds the cap of {MAX_GRID}"
            )));
        }
        let support = measure.support().to_vec();
        let probs = measure.probs();
        let mut weights = DVector::zeros(n);
        for a in 0..m {
            for b in 0..m {
                weights[a * m + b] = probs[a] * probs[b];
            }
        }
        let mut kmat = DMatrix::zeros(n, n);
        for q in 0..n {
            let (a, b) = (q / m, q % m);
            for r in 0..=q {
                let (c, d) = (r / m, r % m);
                let v = kernel.eval_slices(&support[a], &support[b], &support[c], &support[d]);
                kmat[(q, r)] = v;
                kmat[(r, q)] = v;
            }
        }
        let sqrt_w = weights.map(f64::sqrt);
        let mut sym = kmat.clone();
        for i in 0..n {
            for j in 0..n {
                sym[(i, j)] *= sqrt_w[i] * sqrt_w[j];
            }
        }
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let top = eig.eigenvalues[order[0]].max(0.0);
        let mut eigenvalues = DVector::zeros(n);
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (k, &i) in order.iter().enumerate() {
            let lam = eig.eigenvalues[i];
            eigenvalues[k] = if lam <= NULL_RELATIVE_TOL * top { 0.0 } else { lam };
            eigenvectors.set_column(k, &eig.eigenvectors.column(i));
        }
        Ok(SpectralModel {
            support,
            weights,
            sqrt_w,
            kmat,
            eigenvalues,
            eigenvectors,
        })
    }

    /// Number of support points `m`.
    pub fn m(&self) -> usize {
        self.support.len()
    }

    /// Number of grid pairs `m^2`.
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Kernel matrix on the grid.
    pub fn kernel_matrix(&self) -> &DMatrix<f64> {
        &self.kmat
    }

    /// Eigenvalues in decreasing order, with null values set to 0.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `(a, b)` support indices of grid index `q`.
    pub fn pair_of(&self, q: usize) -> (usize, usize) {
        (q / self.m(), q % self.m())
    }

    pub fn pair_index(&self, a: usize, b: usize) -> usize {
        a * self.m() + b
    }

    /// Values of `f` on the grid.
    pub fn grid_function<F: PairwiseFunction + ?Sized>(&self, f: &F) -> DVector<f64> {
        let m = self.m();
        DVector::from_fn(m * m, |q, _| f.value(&self.support[q / m], &self.support[q % m]))
    }

    /// The kernel section `K_{(u_a, u_b)}` as a grid function.
    pub fn section(&self, q: usize) -> DVector<f64> {
        self.kmat.column(q).into_owned()
    }

    /// Eigencoordinates `U^T W^{1/2} f`.
    pub fn coords(&self, f: &DVector<f64>) -> DVector<f64> {
        self.eigenvectors.tr_mul(&f.component_mul(&self.sqrt_w))
    }

    /// Grid function with the given eigencoordinates.
    pub fn from_coords(&self, c: &DVector<f64>) -> DVector<f64> {
        (&self.eigenvectors * c).component_div(&self.sqrt_w)
    }

    /// `||f||_rho`.
    pub fn rho_norm(&self, f: &DVector<f64>) -> f64 {
        f.component_mul(&self.sqrt_w).norm()
    }

    /// `L_K f` by direct weighted summation.
    pub fn apply_direct(&self, f: &DVector<f64>) -> DVector<f64> {
        &self.kmat * f.component_mul(&self.weights)
    }

    /// `L_K f` through the eigendecomposition.
    pub fn apply(&self, f: &DVector<f64>) -> DVector<f64> {
        self.fractional_apply(1.0, f)
    }

    /// `L_K^beta f`; null directions map to zero.
    pub fn fractional_apply(&self, beta: f64, f: &DVector<f64>) -> DVector<f64> {
        let mut c = self.coords(f);
        for (ck, lam) in c.iter_mut().zip(self.eigenvalues.iter()) {
            *ck *= if *lam > 0.0 { lam.powf(beta) } else { 0.0 };
        }
        self.from_coords(&c)
    }

    /// `||f||_K` for a grid function in the range of `L_K`; infinite when `f`
    /// has a component along a null direction above `tol * ||f||_rho`.
    pub fn k_norm(&self, f: &DVector<f64>) -> f64 {
        let c = self.coords(f);
        let scale = c.norm();
        let mut acc = 0.0;
        for (ck, lam) in c.iter().zip(self.eigenvalues.iter()) {
            if *lam > 0.0 {
                acc += ck * ck / lam;
            } else if ck.abs() > 1e-8 * scale.max(1e-300) {
                return f64::INFINITY;
            }
        }
        acc.sqrt()
    }

    /// `||f||_K` for `f = sum_q c_q K_q`, from the coefficients.
    pub fn k_norm_of_expansion(&self, coeffs: &DVector<f64>) -> f64 {
        coeffs.dot(&(&self.kmat * coeffs)).max(0.0).sqrt()
    }

    /// Matrix of `L_K` acting on grid functions (`K W`).
    pub fn operator_matrix(&self) -> DMatrix<f64> {
        let mut m = self.kmat.clone();
        for j in 0..self.n() {
            let w = self.weights[j];
            for i in 0..self.n() {
                m[(i, j)] *= w;
            }
        }
        m
    }

    /// Builds `f_tilde = L_K^beta g` with `g` random on the non-null
    /// eigendirections and `||g||_rho = norm_target`. Returns the grid
    /// function, `||L_K^{-beta} f_tilde||_rho` recomputed from it, and the
    /// anchored values `f_rho(u_a) = f_tilde(u_a, u_1)`.
    pub fn construct_regular_target(&self, beta: f64, norm_target: f64, rng: &mut impl Rng) -> Result<RegularTarget> {
        if !(beta > 0.0) || !(norm_target > 0.0) {
            return Err(Error::input("beta and the target norm must be positive"));
        }
        let active: Vec<usize> = (0..self.n()).filter(|&k| self.eigenvalues[k] > 0.0).collect();
        if active.is_empty() {
            return Err(Error::Degenerate("all eigenvalues of the grid operator vanish".into()));
        }
        let mut g = DVector::zeros(self.n());
        for &k in &active {
            g[k] = rng.random_range(-1.0..1.0);
        }
        let scale = norm_target / g.norm();
        g *= scale;
        let mut c = g.clone();
        for &k in &active {
            c[k] *= self.eigenvalues[k].powf(beta);
        }
        let values = self.from_coords(&c);
        let source_norm = self.source_norm(&values, beta);
        let f_rho_values = (0..self.m()).map(|a| values[self.pair_index(a, 0)]).collect();
        Ok(RegularTarget {
            values,
            source_norm,
            f_rho_values,
        })
    }

    /// `||L_K^{-beta} f||_rho` over the non-null directions.
    pub fn source_norm(&self, f: &DVector<f64>, beta: f64) -> f64 {
        let c = self.coords(f);
        c.iter()
            .zip(self.eigenvalues.iter())
            .filter(|(_, l)| **l > 0.0)
            .map(|(ck, l)| (ck / l.powf(beta)).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// A target satisfying a source condition on the grid.
#[derive(Debug, Clone)]
pub struct RegularTarget {
    pub values: DVector<f64>,
    pub source_norm: f64,
    pub f_rho_values: Vec<f64>,
}
