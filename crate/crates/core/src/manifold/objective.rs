use num_complex::Complex64 as C64;

use super::PhaseProblem;
use crate::invariants::CMat;

/// A smooth real function on ℂ^N with Euclidean derivatives taken with
/// respect to the real inner product `Re(u* v)`.
pub trait Objective {
    fn cost(&self, z: &[C64]) -> f64;
    fn egrad(&self, z: &[C64]) -> Vec<C64>;
    fn ehess(&self, z: &[C64], dz: &[C64]) -> Vec<C64>;
}

fn axpy(acc: &mut [C64], a: f64, x: &[C64]) {
    for (o, v) in acc.iter_mut().zip(x) {
        *o += v * a;
    }
}

impl Objective for PhaseProblem {
    fn cost(&self, z: &[C64]) -> f64 {
        PhaseProblem::cost(self, z)
    }

    /// `2 M(z) z + M(z)* z`.
    fn egrad(&self, z: &[C64]) -> Vec<C64> {
        let mut g = self.m_apply(z, z);
        for v in g.iter_mut() {
            *v *= 2.0;
        }
        axpy(&mut g, 1.0, &self.m_adjoint_apply(z, z));
        g
    }

    /// `2 M(ż) z + 2 M(z) ż + M(ż)* z + M(z)* ż`.
    fn ehess(&self, z: &[C64], dz: &[C64]) -> Vec<C64> {
        let mut h = self.m_apply(dz, z);
        axpy(&mut h, 1.0, &self.m_apply(z, dz));
        for v in h.iter_mut() {
            *v *= 2.0;
        }
        axpy(&mut h, 1.0, &self.m_adjoint_apply(dz, z));
        axpy(&mut h, 1.0, &self.m_adjoint_apply(z, dz));
        h
    }
}

/// `z ↦ Re(z* C z)` for a fixed matrix `C`.
#[derive(Debug, Clone)]
pub struct FrozenQuadratic {
    /// `C + C*`.
    sym: CMat,
}

impl FrozenQuadratic {
    pub fn new(c: &CMat) -> Self {
        Self { sym: c + c.adjoint() }
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        let n = v.len();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            let vj = v[j];
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.sym[(i, j)] * vj;
            }
        }
        out
    }
}

impl Objective for FrozenQuadratic {
    fn cost(&self, z: &[C64]) -> f64 {
        let cz = self.apply(z);
        0.5 * z.iter().zip(&cz).map(|(a, b)| (a.conj() * b).re).sum::<f64>()
    }

    fn egrad(&self, z: &[C64]) -> Vec<C64> {
        self.apply(z)
    }

    fn ehess(&self, _z: &[C64], dz: &[C64]) -> Vec<C64> {
        self.apply(dz)
    }
}
