//! Iterative phase synchronization: freeze `B̃ ∘ conj(T(ŷ))` at the
//! current estimate, solve the resulting quadratic problem on the torus,
//! repeat. The weights of the problem only enter the reported cost.

use num_complex::Complex64 as C64;

use super::geometry::down_up;
use super::objective::FrozenQuadratic;
use super::rtr::{rtr_maximize, RtrOptions, RtrReport};
use super::PhaseProblem;
use crate::error::{MraError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSyncOptions {
    pub max_outer: usize,
    /// Stop when successive estimates differ by less than this in ∞-norm.
    pub tol: f64,
    pub inner: RtrOptions,
}

impl Default for PhaseSyncOptions {
    fn default() -> Self {
        Self { max_outer: 15, tol: 1e-9, inner: RtrOptions::default() }
    }
}

fn unit_or_one(v: C64) -> C64 {
    let r = v.norm();
    if r > 0.0 {
        v / r
    } else {
        C64::new(1.0, 0.0)
    }
}

pub fn iterative_phase_sync(
    p: &PhaseProblem,
    z0: &[C64],
    y0_phase: C64,
    opts: &PhaseSyncOptions,
) -> Result<RtrReport> {
    let n = p.n();
    if z0.len() != n {
        return Err(MraError::LengthMismatch { expected: n, got: z0.len() });
    }
    let y0 = unit_or_one(y0_phase);
    let mut y = z0.to_vec();
    let mut iterations = 0;
    let mut last_grad = f64::NAN;
    let mut converged = false;
    let unw = PhaseProblem::unweighted(p.b_tilde(), p.is_real(), p.y0())?;
    for _ in 0..opts.max_outer {
        iterations += 1;
        // B̃ ∘ conj(T(ŷ)) without the weights. Weighting it made the outer
        // iteration contract far more slowly (15 rounds left 1e−2 error on
        // a noiseless window signal, against 2–3 rounds to 1e−10 here).
        let frozen = FrozenQuadratic::new(&unw.m_of_z(&y));
        let sub = rtr_maximize(&frozen, p.kind(), &y, &opts.inner)?;
        last_grad = sub.grad_norm;
        let mut z = sub.z;
        let rot = y0 * z[0].conj();
        for v in z.iter_mut() {
            *v = unit_or_one(*v * rot);
        }
        if p.is_real() {
            z = down_up(&z).into_iter().map(unit_or_one).collect();
            z[0] = p.y0();
            if n % 2 == 0 {
                let h = n / 2;
                z[h] = C64::new(if z[h].re < 0.0 { -1.0 } else { 1.0 }, 0.0);
            }
        }
        let change = z.iter().zip(&y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        y = z;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    let cost = p.cost(&y);
    if !cost.is_finite() {
        return Err(MraError::NonFinite("phase synchronization cost"));
    }
    Ok(RtrReport { z: y, cost, grad_norm: last_grad, iterations, converged })
}
