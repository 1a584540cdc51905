//! LLL reduction and Babai's nearest-plane rounding.
//!
//! The reduction only needs the Gram–Schmidt data (`μ` and the squared
//! lengths `B_j` of the orthogonalized vectors), so it can start either
//! from explicit basis vectors or directly from a Cholesky factor of the
//! Gram matrix. The unimodular transform is tracked so the caller can map
//! coefficients back to the input basis.

use nalgebra::DMatrix;

use crate::error::{MraError, Result};

/// A lattice given by linearly independent real basis vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeBasis {
    pub columns: Vec<Vec<f64>>,
}

impl LatticeBasis {
    pub fn new(columns: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.len() != first.len()) {
                return Err(MraError::InvalidInput("basis vectors differ in length".into()));
            }
        }
        Ok(Self { columns })
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| dot(&self.columns[i], &self.columns[j]))
    }

    pub fn gram_determinant(&self) -> f64 {
        self.gram().determinant()
    }

    /// Size reduction and the Lovász condition with parameter `delta`,
    /// each up to `tol`.
    pub fn is_lll_reduced(&self, delta: f64, tol: f64) -> bool {
        let Ok(gs) = GramSchmidt::from_gram(&self.gram()) else {
            return false;
        };
        let d = self.dim();
        for i in 1..d {
            for j in 0..i {
                if gs.mu(i, j).abs() > 0.5 + tol {
                    return false;
                }
            }
            let m = gs.mu(i, i - 1);
            if gs.b[i] < (delta - m * m) * gs.b[i - 1] - tol * gs.b[i - 1] {
                return false;
            }
        }
        true
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gram–Schmidt coefficients of a basis plus the unimodular transform
/// from the original basis: current vector `j` is `Σ_s u[j][s] b_s`.
#[derive(Debug, Clone)]
pub struct GramSchmidt {
    d: usize,
    /// Row-major strictly lower triangle; `mu[i*d + j]` for `j < i`.
    mu: Vec<f64>,
    /// Squared lengths of the orthogonalized vectors.
    b: Vec<f64>,
    u: Vec<Vec<i64>>,
}

impl GramSchmidt {
    /// From a lower-triangular Cholesky factor `L` of the Gram matrix.
    pub fn from_cholesky(l: &DMatrix<f64>) -> Result<Self> {
        let d = l.nrows();
        let mut mu = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        for j in 0..d {
            let ljj = l[(j, j)];
            if !(ljj > 0.0) {
                return Err(MraError::DependentBasis);
            }
            b[j] = ljj * ljj;
            for i in j + 1..d {
                mu[i * d + j] = l[(i, j)] / ljj;
            }
        }
        let u = (0..d)
            .map(|j| {
                let mut e = vec![0i64; d];
                e[j] = 1;
                e
            })
            .collect();
        Ok(Self { d, mu, b, u })
    }

    pub fn from_gram(g: &DMatrix<f64>) -> Result<Self> {
        let chol = g.clone().cholesky().ok_or(MraError::DependentBasis)?;
        // Reject numerically singular bases as well.
        let l = chol.l();
        let scale = (0..g.nrows()).map(|i| g[(i, i)]).fold(0.0, f64::max).max(1e-300);
        if (0..l.nrows()).any(|j| l[(j, j)] * l[(j, j)] <= 1e-13 * scale) {
            return Err(MraError::DependentBasis);
        }
        Self::from_cholesky(&l)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn mu(&self, i: usize, j: usize) -> f64 {
        self.mu[i * self.d + j]
    }

    pub fn b_star(&self) -> &[f64] {
        &self.b
    }

    pub fn transform(&self) -> &[Vec<i64>] {
        &self.u
    }

    fn size_reduce(&mut self, k: usize, l: usize) {
        let d = self.d;
        let m = self.mu[k * d + l];
        if m.abs() <= 0.5 {
            return;
        }
        let q = m.round();
        let qi = q as i64;
        self.mu[k * d + l] -= q;
        for i in 0..l {
            self.mu[k * d + i] -= q * self.mu[l * d + i];
        }
        let (lo, hi) = self.u.split_at_mut(k);
        for (a, b) in hi[0].iter_mut().zip(&lo[l]) {
            *a -= qi * b;
        }
    }

    fn swap(&mut self, k: usize) {
        let d = self.d;
        self.u.swap(k, k - 1);
        for j in 0..k - 1 {
            self.mu.swap(k * d + j, (k - 1) * d + j);
        }
        let m = self.mu[k * d + k - 1];
        let bb = self.b[k] + m * m * self.b[k - 1];
        let new_m = m * self.b[k - 1] / bb;
        self.mu[k * d + k - 1] = new_m;
        self.b[k] = self.b[k - 1] * self.b[k] / bb;
        self.b[k - 1] = bb;
        for i in k + 1..d {
            let t = self.mu[i * d + k];
            self.mu[i * d + k] = self.mu[i * d + k - 1] - m * t;
            self.mu[i * d + k - 1] = t + new_m * self.mu[i * d + k];
        }
    }

    /// LLL reduction in place. Returns the number of swaps.
    pub fn lll(&mut self, delta: f64) -> usize {
        let d = self.d;
        let mut swaps = 0;
        let mut k = 1;
        while k < d {
            self.size_reduce(k, k - 1);
            let m = self.mu[k * d + k - 1];
            if self.b[k] < (delta - m * m) * self.b[k - 1] {
                self.swap(k);
                swaps += 1;
                k = (k - 1).max(1);
            } else {
                for l in (0..k - 1).rev() {
                    self.size_reduce(k, l);
                }
                k += 1;
            }
        }
        swaps
    }

    /// Babai nearest plane. `g[j] = ⟨t, b_j⟩` for the current basis
    /// vectors; returns coefficients in the current basis.
    pub fn babai(&self, g: &[f64]) -> Vec<i64> {
        let d = self.d;
        // τ_j = ⟨t, b*_j⟩ / B_j by forward substitution.
        let mut tau = vec![0.0; d];
        let mut proj = vec![0.0; d];
        for j in 0..d {
            let mut v = g[j];
            let row = &self.mu[j * d..j * d + j];
            for (m, p) in row.iter().zip(&proj[..j]) {
                v -= m * p;
            }
            proj[j] = v;
            tau[j] = v / self.b[j];
        }
        let mut c = vec![0i64; d];
        for j in (0..d).rev() {
            let cj = tau[j].round();
            c[j] = cj as i64;
            if cj != 0.0 {
                let row = &self.mu[j * d..j * d + j];
                for (t, m) in tau[..j].iter_mut().zip(row) {
                    *t -= cj * m;
                }
            }
        }
        c
    }

    /// Babai rounding for a target given by its inner products with the
    /// original basis vectors; returns coefficients in the original basis.
    pub fn closest_in_original(&self, g_orig: &[f64]) -> Vec<i64> {
        let d = self.d;
        let g: Vec<f64> = self
            .u
            .iter()
            .map(|uj| uj.iter().zip(g_orig).filter(|(a, _)| **a != 0).map(|(a, b)| *a as f64 * b).sum())
            .collect();
        let c = self.babai(&g);
        let mut out = vec![0i64; d];
        for (cj, uj) in c.iter().zip(&self.u) {
            if *cj != 0 {
                for (o, a) in out.iter_mut().zip(uj) {
                    *o += cj * a;
                }
            }
        }
        out
    }
}

/// LLL-reduces an explicit basis with parameter `delta ∈ (1/4, 1)`.
pub fn lll_reduce(basis: &LatticeBasis, delta: f64) -> Result<LatticeBasis> {
    if !(delta > 0.25 && delta < 1.0) {
        return Err(MraError::InvalidInput(format!("LLL delta must be in (1/4, 1), got {delta}")));
    }
    let mut gs = GramSchmidt::from_gram(&basis.gram())?;
    gs.lll(delta);
    let len = basis.columns.first().map_or(0, |c| c.len());
    let columns = gs
        .transform()
        .iter()
        .map(|uj| {
            let mut v = vec![0.0; len];
            for (a, col) in uj.iter().zip(&basis.columns) {
                if *a != 0 {
                    for (o, x) in v.iter_mut().zip(col) {
                        *o += *a as f64 * x;
                    }
                }
            }
            v
        })
        .collect();
    LatticeBasis::new(columns)
}

/// Babai nearest-plane coefficients of `target` with respect to `basis`.
pub fn nearest_lattice_point(basis: &LatticeBasis, target: &[f64]) -> Result<Vec<i64>> {
    let gs = GramSchmidt::from_gram(&basis.gram())?;
    let g: Vec<f64> = basis.columns.iter().map(|c| dot(c, target)).collect();
    Ok(gs.babai(&g))
}
