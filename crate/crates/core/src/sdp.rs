//! Convex relaxation of phase recovery.
//!
//! Minimizes `‖W∘(B̃∘conj(T(z)) − Z)‖²_F` over the lifted Hermitian matrix
//! `X = [[Z, z], [z*, 1]] ⪰ 0` with `diag(Z) = 1` and pinned `z[0]`, `z[1]`
//! (plus conjugate symmetry for real signals), by ADMM on
//! `f(X) + 1_affine(X) + 1_psd(Y)` subject to `X = Y`.
//!
//! Pinned entries are eliminated first (see `Reduced`), so ADMM runs on the
//! lifted matrix over the unpinned indices. The X-update is solved exactly:
//! each free off-diagonal `Z[a,b]` is minimized out in closed form, leaving
//! a real least-squares problem in the free entries of `z` whose matrix
//! only changes with `ρ`.

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64 as C64;

use crate::error::{MraError, Result};
use crate::invariants::{CMat, RMat};
use crate::signal::{fft, unit};

/// Data of the relaxation.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    b_tilde: CMat,
    /// Squared weights, scaled to mean N. The minimizer does not depend on
    /// the scale, but ADMM does: this makes the curvature of the objective
    /// comparable to the Frobenius penalty on the (N+1)² lifted entries,
    /// and the absolute residual tolerance then bounds the error well.
    w2: RMat,
    y0: C64,
    y1: Option<C64>,
    is_real: bool,
}

impl SdpProblem {
    /// `y1 = None` leaves `z[1]` free, which keeps the modulation symmetry
    /// of the problem; the solver then only returns some feasible point.
    pub fn new(b_tilde: &CMat, w: &RMat, y0: C64, y1: Option<C64>, is_real: bool) -> Result<Self> {
        let n = b_tilde.nrows();
        if n == 0 || b_tilde.ncols() != n || w.shape() != (n, n) {
            return Err(MraError::InvalidInput("B̃ and W must be square of equal size".into()));
        }
        for k2 in 0..n {
            for k1 in 0..n {
                if !(w[(k1, k2)] > 0.0) {
                    return Err(MraError::ZeroWeight { k1, k2 });
                }
            }
        }
        let ms = w.iter().map(|v| v * v).sum::<f64>() / (n * n) as f64;
        let w2 = w.map(|v| v * v / ms * n as f64);
        let one = C64::new(1.0, 0.0);
        let y0 = if is_real { C64::new(if y0.re < 0.0 { -1.0 } else { 1.0 }, 0.0) } else { unit(y0, 0.0) };
        let y1 = y1.map(|v| if v.norm() > 0.0 { v / v.norm() } else { one });
        Ok(Self { b_tilde: b_tilde.clone(), w2, y0, y1, is_real })
    }

    pub fn n(&self) -> usize {
        self.b_tilde.nrows()
    }

    /// `Σ W²|B̃[a,b] conj(z[b−a]) − Z[a,b]|²`.
    pub fn objective(&self, z: &[C64], zm: &CMat) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for b in 0..n {
            for a in 0..n {
                let pred = self.b_tilde[(a, b)] * z[(b + n - a) % n].conj();
                s += self.w2[(a, b)] * (pred - zm[(a, b)]).norm_sqr();
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions {
    /// Bound on both the primal residual (see `sdp_solve`) and the dual
    /// residual `ρ‖Y − Y_prev‖_F`.
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 5000, rho: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SdpReport {
    pub z: Vec<C64>,
    pub z_matrix: CMat,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
}

impl SdpReport {
    /// The lifted matrix `[[Z, z], [z*, 1]]`.
    pub fn lifted(&self) -> CMat {
        lift(&self.z, &self.z_matrix)
    }
}

fn lift(z: &[C64], zm: &CMat) -> CMat {
    let n = z.len();
    let mut x = CMat::zeros(n + 1, n + 1);
    x.view_mut((0, 0), (n, n)).copy_from(zm);
    for k in 0..n {
        x[(k, n)] = z[k];
        x[(n, k)] = z[k].conj();
    }
    x[(n, n)] = C64::new(1.0, 0.0);
    x
}

fn project_psd(m: &CMat) -> CMat {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let mut v = eig.eigenvectors.clone();
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        v.column_mut(j).scale_mut(s);
    }
    &v * v.adjoint()
}

/// Complex-affine function `c0 + Σ coef·θ_j` of the real parameters.
#[derive(Debug, Clone)]
struct Lin {
    c0: C64,
    terms: Vec<(usize, C64)>,
}

impl Lin {
    fn constant(c0: C64) -> Self {
        Self { c0, terms: Vec::new() }
    }

    fn conj(&self) -> Self {
        Self { c0: self.c0.conj(), terms: self.terms.iter().map(|&(j, c)| (j, c.conj())).collect() }
    }

    fn scale(&self, a: C64) -> Self {
        Self { c0: self.c0 * a, terms: self.terms.iter().map(|&(j, c)| (j, c * a)).collect() }
    }

    fn sub(&self, o: &Lin) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(o.terms.iter().map(|&(j, c)| (j, -c)));
        Self { c0: self.c0 - o.c0, terms }
    }
}

/// The problem after facial reduction.
///
/// A pinned `z[k] = c` together with `Z[k,k] = 1` makes the 2×2 minor on
/// `(k, last)` singular, so every feasible lifted matrix has row `k` equal
/// to `c` times the last row. Substituting `Z[k,b] = c·conj(z[b])` removes
/// those rows; what remains is a lifted matrix over the free indices that
/// has strictly feasible points, which ADMM needs to converge at a
/// reasonable rate.
struct Reduced {
    n: usize,
    pins: Vec<Option<C64>>,
    /// Unpinned indices in increasing order; `slot[k]` is the row of `z[k]`
    /// in the reduced matrix, whose last row belongs to the constant 1.
    free: Vec<usize>,
    slot: Vec<Option<usize>>,
    /// `z[k]` as a function of the real parameters.
    z_of: Vec<Lin>,
    params: usize,
}

impl Reduced {
    fn new(p: &SdpProblem) -> Self {
        let n = p.n();
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let mut pins = vec![None; n];
        pins[0] = Some(p.y0);
        if let (Some(y1), true) = (p.y1, n > 1) {
            pins[1] = Some(y1);
            if p.is_real {
                pins[n - 1] = Some(y1.conj());
            }
        }
        let mut z_of: Vec<Lin> = pins.iter().map(|c| Lin::constant(c.unwrap_or_default())).collect();
        let mut params = 0;
        if p.is_real {
            for m in 1..=n / 2 {
                if pins[m].is_some() {
                    continue;
                }
                if 2 * m == n {
                    z_of[m].terms = vec![(params, one)];
                    params += 1;
                } else {
                    z_of[m].terms = vec![(params, one), (params + 1, i)];
                    z_of[n - m].terms = vec![(params, one), (params + 1, -i)];
                    params += 2;
                }
            }
        } else {
            for k in 1..n {
                if pins[k].is_none() {
                    z_of[k].terms = vec![(params, one), (params + 1, i)];
                    params += 2;
                }
            }
        }
        let free: Vec<usize> = (0..n).filter(|&k| pins[k].is_none()).collect();
        let mut slot = vec![None; n];
        for (r, &k) in free.iter().enumerate() {
            slot[k] = Some(r);
        }
        Self { n, pins, free, slot, z_of, params }
    }

    fn dim(&self) -> usize {
        self.free.len() + 1
    }

    fn eval(&self, l: &Lin, theta: &[f64]) -> C64 {
        l.c0 + l.terms.iter().map(|&(j, c)| c * theta[j]).sum::<C64>()
    }

    /// `Z[a,b]` when `a` or `b` is pinned.
    fn pinned_entry(&self, a: usize, b: usize, z: &[C64]) -> Option<C64> {
        match (self.pins[a], self.pins[b]) {
            (Some(ca), _) => Some(ca * z[b].conj()),
            (None, Some(cb)) => Some(z[a] * cb.conj()),
            (None, None) => None,
        }
    }

    fn lift(&self, z: &[C64], zm: &CMat) -> CMat {
        let d = self.dim();
        let last = d - 1;
        let mut x = CMat::zeros(d, d);
        for (ra, &a) in self.free.iter().enumerate() {
            for (rb, &b) in self.free.iter().enumerate() {
                x[(ra, rb)] = zm[(a, b)];
            }
            x[(ra, last)] = z[a];
            x[(last, ra)] = z[a].conj();
        }
        x[(last, last)] = C64::new(1.0, 0.0);
        x
    }
}

/// Real normal equations `G θ = h` of a sum of `weight·|L(θ) − t|²`.
struct Normal {
    g: nalgebra::DMatrix<f64>,
    h: nalgebra::DVector<f64>,
    with_g: bool,
}

impl Normal {
    fn new(p: usize, with_g: bool) -> Self {
        let gd = if with_g { p } else { 0 };
        Self { g: nalgebra::DMatrix::zeros(gd, gd), h: nalgebra::DVector::zeros(p), with_g }
    }

    fn add(&mut self, weight: f64, l: &Lin, target: C64) {
        if weight == 0.0 {
            return;
        }
        let r = target - l.c0;
        for &(j, cj) in &l.terms {
            self.h[j] += weight * (cj.conj() * r).re;
            if self.with_g {
                for &(k, ck) in &l.terms {
                    self.g[(j, k)] += weight * (cj.conj() * ck).re;
                }
            }
        }
    }
}

/// Builds the normal equations of the X-update for the reduced target `v`.
/// The matrix only depends on `ρ`; it is assembled when `with_g` is set.
fn x_update_system(p: &SdpProblem, red: &Reduced, v: &CMat, rho: f64, with_g: bool) -> Normal {
    let n = red.n;
    let last = red.dim() - 1;
    let bt = &p.b_tilde;
    let zero = C64::new(0.0, 0.0);
    let mut ne = Normal::new(red.params, with_g);
    for &k in &red.free {
        let r = red.slot[k].expect("free index has a slot");
        ne.add(rho, &red.z_of[k], (v[(r, last)] + v[(last, r)].conj()) * 0.5);
    }
    for a in 0..n {
        for b in a + 1..n {
            let (a1, a2) = (p.w2[(a, b)], p.w2[(b, a)]);
            let c1 = red.z_of[b - a].conj().scale(bt[(a, b)]);
            let c2 = red.z_of[(a + n - b) % n].scale(bt[(b, a)].conj());
            match (red.slot[a], red.slot[b]) {
                (Some(ra), Some(rb)) => {
                    // ζ = Z[a,b] minimized out in closed form.
                    let s = a1 + a2 + rho;
                    let vv = (v[(ra, rb)] + v[(rb, ra)].conj()) * 0.5;
                    ne.add(a1 * a2 / s, &c1.sub(&c2), zero);
                    ne.add(a1 * rho / s, &c1, vv);
                    ne.add(a2 * rho / s, &c2, vv);
                }
                _ => {
                    let zeta = match (red.pins[a], red.pins[b]) {
                        (Some(ca), _) => red.z_of[b].conj().scale(ca),
                        (None, Some(cb)) => red.z_of[a].scale(cb.conj()),
                        (None, None) => unreachable!(),
                    };
                    ne.add(a1, &c1.sub(&zeta), zero);
                    ne.add(a2, &c2.sub(&zeta), zero);
                }
            }
        }
    }
    ne
}

/// Full `(z, Z)` from the parameters and the reduced target.
fn x_from_theta(p: &SdpProblem, red: &Reduced, theta: &[f64], v: &CMat, rho: f64) -> (Vec<C64>, CMat) {
    let n = red.n;
    let z: Vec<C64> = red.z_of.iter().map(|l| red.eval(l, theta)).collect();
    let bt = &p.b_tilde;
    let mut zm = CMat::zeros(n, n);
    for a in 0..n {
        zm[(a, a)] = C64::new(1.0, 0.0);
        for b in a + 1..n {
            let zeta = red.pinned_entry(a, b, &z).unwrap_or_else(|| {
                let (ra, rb) = (red.slot[a].unwrap(), red.slot[b].unwrap());
                let (a1, a2) = (p.w2[(a, b)], p.w2[(b, a)]);
                let c1 = bt[(a, b)] * z[b - a].conj();
                let c2 = bt[(b, a)].conj() * z[(a + n - b) % n];
                let vv = (v[(ra, rb)] + v[(rb, ra)].conj()) * 0.5;
                (c1 * a1 + c2 * a2 + vv * rho) / (a1 + a2 + rho)
            });
            zm[(a, b)] = zeta;
            zm[(b, a)] = zeta.conj();
        }
    }
    (z, zm)
}

/// Factorization of the X-update matrix for one value of `ρ`.
struct XSolver {
    rho: f64,
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl XSolver {
    fn new(p: &SdpProblem, red: &Reduced, rho: f64) -> Self {
        let d = red.dim();
        let ne = x_update_system(p, red, &CMat::zeros(d, d), rho, true);
        let chol = if red.params == 0 { None } else { nalgebra::Cholesky::new(ne.g) };
        Self { rho, chol }
    }

    fn solve(&self, p: &SdpProblem, red: &Reduced, v: &CMat) -> (Vec<C64>, CMat) {
        let ne = x_update_system(p, red, v, self.rho, false);
        let theta: Vec<f64> = match &self.chol {
            Some(c) => c.solve(&ne.h).iter().copied().collect(),
            None => vec![0.0; red.params],
        };
        x_from_theta(p, red, &theta, v, self.rho)
    }
}

/// Exact minimizer of `f(X) + (ρ/2)‖X_r − V‖²_F` over the affine set,
/// where `X_r` is the reduced lifted matrix.
#[cfg(test)]
fn x_update(p: &SdpProblem, red: &Reduced, v: &CMat, rho: f64) -> (Vec<C64>, CMat) {
    XSolver::new(p, red, rho).solve(p, red, v)
}

fn frob(m: &CMat) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves the relaxation. The returned `(z, Z)` satisfies the affine
/// constraints exactly. The primal residual is `(1 + #pins)‖X_r − Y_r‖_F`
/// for the reduced matrices, which bounds how far the smallest eigenvalue
/// of the full lifted matrix can fall below zero.
pub fn sdp_solve(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpReport> {
    if !(opts.tol > 0.0 && opts.rho > 0.0) {
        return Err(MraError::InvalidInput("SDP tolerance and penalty must be positive".into()));
    }
    let red = Reduced::new(p);
    let d = red.dim();
    let mut rho = opts.rho;
    let mut solver = XSolver::new(p, &red, rho);
    // Start from the lift of the pins with ones elsewhere.
    let z0: Vec<C64> = red.free.iter().map(|_| C64::new(1.0, 0.0)).chain([C64::new(1.0, 0.0)]).collect();
    let zz = nalgebra::DVector::from_vec(z0);
    let mut y = &zz * zz.adjoint();
    let mut u = CMat::zeros(d, d);
    // The full matrix is V X_r V* with ‖V‖² ≤ 1 + #pins.
    let spread = (1 + red.n - red.free.len()) as f64;
    let mut best: Option<(f64, SdpReport)> = None;
    for it in 1..=opts.max_iter {
        let (z, zm) = solver.solve(p, &red, &(&y - &u));
        let x = red.lift(&z, &zm);
        let y_prev = y;
        y = project_psd(&(&x + &u));
        u += &x - &y;
        let r = spread * frob(&(&x - &y));
        let s = rho * frob(&(&y - &y_prev));
        let converged = r <= opts.tol && s <= opts.tol;
        let score = r.max(s);
        let improves = best.as_ref().map_or(true, |b| score < b.0);
        if converged || improves {
            let rep = SdpReport {
                objective: p.objective(&z, &zm),
                z,
                z_matrix: zm,
                iterations: it,
                primal_residual: r,
                dual_residual: s,
                converged,
            };
            if converged {
                return Ok(rep);
            }
            best = Some((score, rep));
        }
        if r > 10.0 * s {
            rho *= 2.0;
            u *= C64::new(0.5, 0.0);
        } else if s > 10.0 * r {
            rho *= 0.5;
            u *= C64::new(2.0, 0.0);
        }
        if rho != solver.rho {
            solver = XSolver::new(p, &red, rho);
        }
    }
    let (_, mut rep) = best.expect("at least one iteration");
    rep.iterations = opts.max_iter;
    Ok(rep)
}

/// Whether `u` meets the hypotheses under which only `u ≡ 1` is possible:
/// unit modulus, `u[k] = conj(u[−k])`, `u[0] = u[1] = 1`, and a real,
/// nonnegative DFT (all to 1e−9).
pub fn check_lemma_la(u: &[C64]) -> bool {
    let n = u.len();
    const TOL: f64 = 1e-9;
    if n < 2 {
        return false;
    }
    if u.iter().any(|v| (v.norm() - 1.0).abs() > TOL) {
        return false;
    }
    if (u[0] - 1.0).norm() > TOL || (u[1] - 1.0).norm() > TOL {
        return false;
    }
    if (0..n).any(|k| (u[k] - u[(n - k) % n].conj()).norm() > TOL) {
        return false;
    }
    fft(u).iter().all(|v| v.im.abs() <= TOL && v.re >= -TOL)
}
