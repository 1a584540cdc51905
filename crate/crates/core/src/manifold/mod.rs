//! Phase recovery as optimization over the phase torus.
//!
//! The objective is `f(z) = Re(z* M(z) z)` with
//! `M(z) = W∘W ∘ B̃ ∘ conj(T(z))` and `T(z)[k1,k2] = z[k2−k1]`.

mod geometry;
mod objective;
mod phase_sync;
mod rtr;

pub use geometry::{
    down_up, inner, is_on_manifold, is_tangent, norm, project_tangent, random_point, retract,
    ManifoldKind,
};
pub use objective::{FrozenQuadratic, Objective};
pub use phase_sync::{iterative_phase_sync, PhaseSyncOptions};
pub use rtr::{riemannian_gradient, riemannian_hessian, rtr_maximize, rtr_solve, RtrOptions, RtrReport};

use num_complex::Complex64 as C64;

use crate::error::{MraError, Result};
use crate::invariants::{CMat, RMat};

/// Normalized bispectrum and weights defining the phase objective.
#[derive(Debug, Clone)]
pub struct PhaseProblem {
    b_tilde: CMat,
    w: RMat,
    /// `W∘W∘B̃`, the only combination the objective needs.
    g: CMat,
    is_real: bool,
    y0: C64,
}

impl PhaseProblem {
    /// Builds the problem, projecting `b_tilde` and `w` onto the symmetries
    /// that the closed-form derivatives rely on.
    pub fn new(b_tilde: &CMat, w: &RMat, is_real: bool, y0: C64) -> Result<Self> {
        let n = b_tilde.nrows();
        if b_tilde.ncols() != n || w.nrows() != n || w.ncols() != n {
            return Err(MraError::InvalidInput("B̃ and W must be square of equal size".into()));
        }
        if n == 0 {
            return Err(MraError::InvalidInput("empty problem".into()));
        }
        if w.iter().any(|v| !(*v >= 0.0)) {
            return Err(MraError::InvalidInput("weights must be nonnegative".into()));
        }
        let y0 = if is_real {
            C64::new(if y0.re < 0.0 { -1.0 } else { 1.0 }, 0.0)
        } else if y0.norm() > 0.0 {
            y0 / y0.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let b_tilde = symmetrize(b_tilde, is_real, |v| v.conj());
        let w = symmetrize(w, is_real, |v| v);
        let g = CMat::from_fn(n, n, |i, j| b_tilde[(i, j)] * (w[(i, j)] * w[(i, j)]));
        Ok(Self { b_tilde, w, g, is_real, y0 })
    }

    /// Unit weights.
    pub fn unweighted(b_tilde: &CMat, is_real: bool, y0: C64) -> Result<Self> {
        let n = b_tilde.nrows();
        Self::new(b_tilde, &RMat::from_element(n, n, 1.0), is_real, y0)
    }

    pub fn n(&self) -> usize {
        self.b_tilde.nrows()
    }

    pub fn b_tilde(&self) -> &CMat {
        &self.b_tilde
    }

    pub fn w(&self) -> &RMat {
        &self.w
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn y0(&self) -> C64 {
        self.y0
    }

    pub fn kind(&self) -> ManifoldKind {
        ManifoldKind::for_signal(self.is_real)
    }

    /// `M(z)`.
    pub fn m_of_z(&self, z: &[C64]) -> CMat {
        let n = self.n();
        CMat::from_fn(n, n, |k1, k2| self.g[(k1, k2)] * z[(k2 + n - k1) % n].conj())
    }

    /// `M(z) v`.
    pub fn m_apply(&self, z: &[C64], v: &[C64]) -> Vec<C64> {
        let n = self.n();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for k2 in 0..n {
            let vk2 = v[k2];
            for (k1, o) in out.iter_mut().enumerate() {
                *o += self.g[(k1, k2)] * z[(k2 + n - k1) % n].conj() * vk2;
            }
        }
        out
    }

    /// `M(z)* v`.
    pub fn m_adjoint_apply(&self, z: &[C64], v: &[C64]) -> Vec<C64> {
        let n = self.n();
        (0..n)
            .map(|k2| {
                let zc = z;
                (0..n)
                    .map(|k1| (self.g[(k1, k2)] * zc[(k2 + n - k1) % n].conj()).conj() * v[k1])
                    .sum()
            })
            .collect()
    }

    /// `f(z) = Re(z* M(z) z)`.
    pub fn cost(&self, z: &[C64]) -> f64 {
        let mz = self.m_apply(z, z);
        z.iter().zip(&mz).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Adjoint of `z ↦ M(z)` for the real inner products on ℂ^N and ℂ^{N×N}:
    /// `M^adj(X)[k] = Σ_{k2−k1=k} G[k1,k2] conj(X[k1,k2])`.
    pub fn m_adj(&self, x: &CMat) -> Vec<C64> {
        let n = self.n();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for k2 in 0..n {
            for k1 in 0..n {
                out[(k2 + n - k1) % n] += self.g[(k1, k2)] * x[(k1, k2)].conj();
            }
        }
        out
    }
}

/// Projects a matrix onto the entry symmetries of an exact bispectrum.
///
/// Complex signals: `B[k1,k2] = B[k2−k1,k2]`. Real signals: the entry only
/// depends on the frequency triple `{k1, −k2, k2−k1}` (summing to zero),
/// and negating the triple conjugates it. The projection averages over the
/// orbit of the generated group.
fn symmetrize<T, F>(m: &nalgebra::DMatrix<T>, is_real: bool, conj: F) -> nalgebra::DMatrix<T>
where
    T: nalgebra::Scalar + Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    F: Fn(T) -> T,
{
    let n = m.nrows();
    nalgebra::DMatrix::from_fn(n, n, |k1, k2| {
        let md = |v: i64| v.rem_euclid(n as i64) as usize;
        if !is_real {
            return (m[(k1, k2)] + m[((k2 + n - k1) % n, k2)]) * 0.5;
        }
        let (a, b) = (k1 as i64, -(k2 as i64));
        let c = -a - b;
        let perms = [(a, b), (a, c), (b, a), (b, c), (c, a), (c, b)];
        let mut acc = m[(k1, k2)] * 0.0;
        for (p, q) in perms {
            // Entry (p, −q) holds the product over the triple; entry
            // (−p, q) holds its conjugate.
            acc = acc + m[(md(p), md(-q))];
            acc = acc + conj(m[(md(-p), md(q))]);
        }
        acc * (1.0 / 12.0)
    })
}
