//! Phase recovery by integer unwrapping of the bispectrum phases.
//!
//! With `Ψ[k1,k2]` the principal angle of `B̃[k1,k2]` and `ψ` the Fourier
//! phases, `Ψ + 2πχ = Aψ` for some integer vector `χ`, where row
//! `(k1,k2)` of `A` encodes `ψ[k1] − ψ[k2] + ψ[k2−k1]`.
//!
//! The DC phase enters `A` through its own column and is read off the
//! `(0,0)` entry (that row is `ψ[0] − ψ[0] + ψ[0]`). Eliminating it leaves
//! a system in `ψ[1..]` whose matrix has rank N−1. Multiples of 2π in
//! `ψ[k]` shift `χ` by integer columns of that matrix, so N−1 entries of
//! `χ` can be fixed to zero; the rest are found by LLL reduction of the
//! lattice `C·ℤ^d` (`C` an orthonormal basis of `ker Aᵀ`) followed by
//! Babai rounding. The phases are then an L1 fit.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::irls::{irls_l1, IrlsOptions, L1Fit};
use super::lattice::GramSchmidt;
use crate::error::{MraError, Result};
use crate::invariants::{CMat, RMat};
use crate::signal::{angle, PhaseVec};

/// Linear system relating bispectrum phases to Fourier phases.
#[derive(Debug, Clone)]
pub struct UnwrapSystem {
    n: usize,
    /// N²×N, rows indexed by `k1 + N·k2`; column 0 is zero after the DC
    /// phase has been eliminated.
    a_matrix: RMat,
    /// The eliminated DC column.
    dc_column: Vec<f64>,
    dc_phase: f64,
    psi_vec: Vec<f64>,
    /// Householder vectors of `A[:,1..] = Q R`, one per column.
    reflectors: Vec<(Vec<f64>, f64)>,
    /// Orthonormal basis of range(A), N²×(N−1).
    q1: RMat,
    gauge: Vec<usize>,
}

/// Row indices of the N−1 integers fixed to zero.
///
/// Rows `(1,k)`, `k = 2..N−1`, and `(N−1,1)`. Restricted to `ψ[1..]` they
/// form a nonsingular block, which is what makes the reduced lattice
/// full-rank.
fn gauge_rows(n: usize) -> Vec<usize> {
    match n {
        0 | 1 => vec![],
        2 => vec![1],
        _ => {
            let mut f: Vec<usize> = (2..n).map(|k| 1 + n * k).collect();
            f.push((n - 1) + n);
            f
        }
    }
}

impl UnwrapSystem {
    /// From raw (not necessarily wrapped) phase data, column-stacked.
    pub fn from_psi(n: usize, psi_vec: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(MraError::InvalidInput("empty system".into()));
        }
        if psi_vec.len() != n * n {
            return Err(MraError::LengthMismatch { expected: n * n, got: psi_vec.len() });
        }
        let mut a = RMat::zeros(n * n, n);
        for k2 in 0..n {
            for k1 in 0..n {
                let row = k1 + n * k2;
                a[(row, k1)] += 1.0;
                a[(row, k2)] -= 1.0;
                a[(row, (k2 + n - k1) % n)] += 1.0;
            }
        }
        let dc_column: Vec<f64> = a.column(0).iter().copied().collect();
        a.column_mut(0).fill(0.0);
        let dc_phase = psi_vec[0];

        // Householder QR of the N−1 live columns.
        let m = n * n;
        let mut work = a.columns(1, n - 1).into_owned();
        let mut reflectors = Vec::with_capacity(n - 1);
        for j in 0..n - 1 {
            let x: Vec<f64> = (j..m).map(|i| work[(i, j)]).collect();
            let alpha = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if alpha < 1e-10 {
                return Err(MraError::DependentBasis);
            }
            let mut v = vec![0.0; m];
            let s = if x[0] >= 0.0 { 1.0 } else { -1.0 };
            v[j] = x[0] + s * alpha;
            v[j + 1..].copy_from_slice(&x[1..]);
            let beta = 2.0 / v.iter().map(|t| t * t).sum::<f64>();
            for c in j..n - 1 {
                let d: f64 = (j..m).map(|i| v[i] * work[(i, c)]).sum();
                for i in j..m {
                    work[(i, c)] -= beta * d * v[i];
                }
            }
            reflectors.push((v, beta));
        }
        let mut sys = Self {
            n,
            a_matrix: a,
            dc_column,
            dc_phase,
            psi_vec,
            reflectors,
            q1: RMat::zeros(m, n - 1),
            gauge: gauge_rows(n),
        };
        for j in 0..n - 1 {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            sys.apply_q(&mut e);
            sys.q1.column_mut(j).copy_from_slice(&e);
        }
        Ok(sys)
    }

    /// `v ← H_1 ⋯ H_r v`.
    fn apply_q(&self, v: &mut [f64]) {
        for (h, beta) in self.reflectors.iter().rev() {
            let d: f64 = h.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            for (vi, hi) in v.iter_mut().zip(h) {
                *vi -= beta * d * hi;
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a_matrix(&self) -> &RMat {
        &self.a_matrix
    }

    pub fn dc_column(&self) -> &[f64] {
        &self.dc_column
    }

    pub fn dc_phase(&self) -> f64 {
        self.dc_phase
    }

    pub fn psi_vec(&self) -> &[f64] {
        &self.psi_vec
    }

    /// Orthonormal basis of the range of `a_matrix`.
    pub fn range_basis(&self) -> &RMat {
        &self.q1
    }

    pub fn gauge_rows(&self) -> &[usize] {
        &self.gauge
    }

    /// `(N²−N+1)×N²` matrix with orthonormal rows spanning `ker Aᵀ`.
    /// Dense, so only meant for small N.
    pub fn c_matrix(&self) -> RMat {
        let m = self.n * self.n;
        let r = self.n - 1;
        let mut c = RMat::zeros(m - r, m);
        for j in r..m {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            self.apply_q(&mut e);
            for (i, v) in e.into_iter().enumerate() {
                c[(j - r, i)] = v;
            }
        }
        c
    }

    /// `Ψ − ψ[0]·(DC column)`, the right-hand side for `ψ[1..]`.
    pub fn reduced_rhs(&self) -> Vec<f64> {
        self.psi_vec.iter().zip(&self.dc_column).map(|(p, d)| p - d * self.dc_phase).collect()
    }

    /// Projection onto the orthogonal complement of range(A).
    fn project_out(&self, v: &[f64]) -> Vec<f64> {
        let coef: Vec<f64> =
            (0..self.q1.ncols()).map(|j| self.q1.column(j).iter().zip(v).map(|(a, b)| a * b).sum()).collect();
        let mut out = v.to_vec();
        for (j, cj) in coef.iter().enumerate() {
            for (o, q) in out.iter_mut().zip(self.q1.column(j).iter()) {
                *o -= cj * q;
            }
        }
        out
    }

    /// Lattice misfit `‖P⊥(Ψ' + 2πχ)‖₂`, where `P⊥` projects out range(A).
    pub fn lattice_residual(&self, chi: &[i64]) -> f64 {
        let v: Vec<f64> =
            self.reduced_rhs().iter().zip(chi).map(|(p, c)| p + 2.0 * PI * *c as f64).collect();
        self.project_out(&v).iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Builds the unwrapping system from the principal angles of `B̃`.
pub fn build_unwrap_system(b_tilde: &CMat) -> Result<UnwrapSystem> {
    let n = b_tilde.nrows();
    if b_tilde.ncols() != n {
        return Err(MraError::InvalidInput("B̃ must be square".into()));
    }
    // Column-major storage is exactly the column stacking.
    let psi: Vec<f64> = b_tilde.iter().map(|v| angle(*v)).collect();
    UnwrapSystem::from_psi(n, psi)
}

/// Options for [`phase_unwrap`].
#[derive(Debug, Clone, Copy)]
pub struct UnwrapOptions {
    pub lll_delta: f64,
    pub irls: IrlsOptions,
}

impl Default for UnwrapOptions {
    fn default() -> Self {
        Self { lll_delta: 0.75, irls: IrlsOptions::default() }
    }
}

/// Integer vector `χ` (length N²) with the gauge entries at zero and the
/// others from LLL + Babai on the lattice `C_S ℤ^d`.
pub fn solve_integers(sys: &UnwrapSystem, lll_delta: f64) -> Result<Vec<i64>> {
    if !(lll_delta > 0.25 && lll_delta < 1.0) {
        return Err(MraError::InvalidInput(format!("LLL delta must be in (1/4, 1), got {lll_delta}")));
    }
    let n = sys.n;
    let m = n * n;
    let mut fixed = vec![false; m];
    for &f in &sys.gauge {
        fixed[f] = true;
    }
    let free: Vec<usize> = (0..m).filter(|i| !fixed[*i]).collect();
    let d = free.len();

    // Gram matrix of the basis C e_s, s ∈ free: (I − Q1 Q1ᵀ)[S,S]. Its
    // Cholesky factor comes from N−1 rank-one downdates of the identity.
    let mut l = vec![0.0; d * d]; // column-major
    for k in 0..d {
        l[k + d * k] = 1.0;
    }
    let mut x = vec![0.0; d];
    for j in 0..sys.q1.ncols() {
        for (xs, &s) in x.iter_mut().zip(&free) {
            *xs = sys.q1[(s, j)];
        }
        for k in 0..d {
            let lkk = l[k + d * k];
            let r2 = lkk * lkk - x[k] * x[k];
            if !(r2 > 1e-13) {
                return Err(MraError::DependentBasis);
            }
            let r = r2.sqrt();
            let c = r / lkk;
            let s = x[k] / lkk;
            l[k + d * k] = r;
            if s != 0.0 {
                let col = &mut l[k * d..(k + 1) * d];
                for i in k + 1..d {
                    col[i] = (col[i] - s * x[i]) / c;
                    x[i] = c * x[i] - s * col[i];
                }
            } else if c != 1.0 {
                let col = &mut l[k * d..(k + 1) * d];
                for i in k + 1..d {
                    col[i] /= c;
                    x[i] *= c;
                }
            }
        }
    }
    let mut gs = GramSchmidt::from_cholesky(&DMatrix::from_vec(d, d, l))?;
    gs.lll(lll_delta);

    // Target t with C_S·t closest to −CΨ'/(2π); only ⟨t, C e_s⟩ is needed.
    let proj = sys.project_out(&sys.reduced_rhs());
    let g: Vec<f64> = free.iter().map(|&s| -proj[s] / (2.0 * PI)).collect();
    let c = gs.closest_in_original(&g);
    let mut chi = vec![0i64; m];
    for (cs, &s) in c.iter().zip(&free) {
        chi[s] = *cs;
    }
    Ok(chi)
}

/// L1 fit of `Ψ + 2πχ ≈ Aψ`; returns all N phases (`ψ[0]` is the DC
/// phase) together with the fit diagnostics.
pub fn l1_phase_fit(sys: &UnwrapSystem, chi: &[i64], opts: &IrlsOptions) -> Result<(Vec<f64>, L1Fit)> {
    let n = sys.n;
    if chi.len() != n * n {
        return Err(MraError::LengthMismatch { expected: n * n, got: chi.len() });
    }
    let b: Vec<f64> =
        sys.reduced_rhs().iter().zip(chi).map(|(p, c)| p + 2.0 * PI * *c as f64).collect();
    let mut psi = vec![sys.dc_phase; n];
    if n == 1 {
        let obj = b.iter().map(|v| v.abs()).sum();
        return Ok((psi, L1Fit { x: vec![], objective: obj, iterations: 0, converged: true }));
    }
    let a = sys.a_matrix.columns(1, n - 1).into_owned();
    let fit = irls_l1(&a, &b, opts);
    psi[1..].copy_from_slice(&fit.x);
    Ok((psi, fit))
}

/// Full unwrapping pipeline: integers, L1 phases, exponentiation.
pub fn phase_unwrap(b_tilde: &CMat, opts: &UnwrapOptions) -> Result<PhaseVec> {
    let n = b_tilde.nrows();
    if n == 0 || b_tilde.ncols() != n {
        return Err(MraError::InvalidInput("B̃ must be square and non-empty".into()));
    }
    let psi = match n {
        1 => vec![angle(b_tilde[(0, 0)])],
        // B̃[1,0] carries 2ψ[1] − ψ[0]; either square root is a valid shift.
        2 => {
            let p0 = angle(b_tilde[(0, 0)]);
            vec![p0, 0.5 * (angle(b_tilde[(1, 0)]) + p0)]
        }
        _ => {
            let sys = build_unwrap_system(b_tilde)?;
            let chi = solve_integers(&sys, opts.lll_delta)?;
            l1_phase_fit(&sys, &chi, &opts.irls)?.0
        }
    };
    Ok(PhaseVec::from_unit(psi.into_iter().map(|p| C64::from_polar(1.0, p)).collect()))
}
