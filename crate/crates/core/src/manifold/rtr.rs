//! Riemannian trust-region maximization with a truncated conjugate
//! gradient (Steihaug–Toint) inner solver.

use num_complex::Complex64 as C64;

use super::geometry::{down_up, inner, norm, project_tangent, retract, ManifoldKind};
use super::objective::Objective;
use super::PhaseProblem;
use crate::error::{MraError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RtrOptions {
    /// Stop when the Riemannian gradient norm drops to this value.
    /// `None` means `1e-8 · N`.
    pub tol_grad: Option<f64>,
    pub max_iter: usize,
    /// Initial trust radius; `None` means `N / 8`.
    pub delta0: Option<f64>,
    /// Largest trust radius; `None` means `N`.
    pub delta_max: Option<f64>,
    /// Accept a step when the agreement ratio exceeds this.
    pub rho_accept: f64,
    /// Inner stopping: `‖r‖ ≤ ‖r0‖ min(‖r0‖^θ, κ)`.
    pub kappa: f64,
    pub theta: f64,
    /// Inner iteration cap; `None` means the manifold dimension.
    pub max_inner: Option<usize>,
    /// Apply the sign flip of `z[N/2]` for real problems of even length.
    pub flip_heuristic: bool,
}

impl Default for RtrOptions {
    fn default() -> Self {
        Self {
            tol_grad: None,
            max_iter: 500,
            delta0: None,
            delta_max: None,
            rho_accept: 0.1,
            kappa: 0.1,
            theta: 1.0,
            max_inner: None,
            flip_heuristic: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RtrReport {
    pub z: Vec<C64>,
    pub cost: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Riemannian gradient: tangent projection of the Euclidean gradient.
pub fn riemannian_gradient<O: Objective + ?Sized>(obj: &O, kind: ManifoldKind, z: &[C64]) -> Vec<C64> {
    project_tangent(kind, z, &obj.egrad(z))
}

/// Riemannian Hessian `Proj(∇²f[ż] − Re(g ∘ z̄) ∘ ż)`, where `g` is the
/// Euclidean gradient (symmetrized for the real manifold).
pub fn riemannian_hessian<O: Objective + ?Sized>(
    obj: &O,
    kind: ManifoldKind,
    z: &[C64],
    egrad: &[C64],
    dz: &[C64],
) -> Vec<C64> {
    let g = match kind {
        ManifoldKind::Complex => egrad.to_vec(),
        ManifoldKind::Real => down_up(egrad),
    };
    let mut h = obj.ehess(z, dz);
    for k in 0..z.len() {
        let radial = g[k].re * z[k].re + g[k].im * z[k].im;
        h[k] -= dz[k] * radial;
    }
    project_tangent(kind, z, &h)
}

struct Inner {
    eta: Vec<C64>,
    /// Riemannian Hessian of f applied to `eta`.
    h_eta: Vec<C64>,
    hit_boundary: bool,
}

fn add_scaled(x: &mut [C64], a: f64, y: &[C64]) {
    for (u, v) in x.iter_mut().zip(y) {
        *u += v * a;
    }
}

/// Positive root of `‖eta + τ d‖ = delta`.
fn to_boundary(eta: &[C64], d: &[C64], delta: f64) -> f64 {
    let ed = inner(eta, d);
    let dd = inner(d, d);
    let ee = inner(eta, eta);
    if dd <= 0.0 {
        return 0.0;
    }
    let disc = (ed * ed + dd * (delta * delta - ee)).max(0.0);
    (-ed + disc.sqrt()) / dd
}

/// Approximately maximizes the quadratic model
/// `⟨g, η⟩ + ½⟨η, H η⟩` over `‖η‖ ≤ delta`.
fn truncated_cg<O: Objective + ?Sized>(
    obj: &O,
    kind: ManifoldKind,
    z: &[C64],
    egrad: &[C64],
    grad: &[C64],
    delta: f64,
    opts: &RtrOptions,
    max_inner: usize,
) -> Inner {
    let n = z.len();
    let zero = vec![C64::new(0.0, 0.0); n];
    let mut eta = zero.clone();
    let mut h_eta = zero;
    // Residual of the minimization form: r = −g − Hη.
    let mut r: Vec<C64> = grad.iter().map(|v| -v).collect();
    let mut rr = inner(&r, &r);
    let r0 = rr.sqrt();
    let mut d: Vec<C64> = grad.to_vec();
    for _ in 0..max_inner {
        let hd = riemannian_hessian(obj, kind, z, egrad, &d);
        // Curvature of the minimized model −f along d.
        let curv = -inner(&d, &hd);
        let alpha = rr / curv;
        let mut trial = eta.clone();
        add_scaled(&mut trial, alpha, &d);
        if curv <= 0.0 || norm(&trial) >= delta {
            let tau = to_boundary(&eta, &d, delta);
            add_scaled(&mut eta, tau, &d);
            add_scaled(&mut h_eta, tau, &hd);
            return Inner { eta, h_eta, hit_boundary: true };
        }
        eta = trial;
        add_scaled(&mut h_eta, alpha, &hd);
        // r ← r + α (−H) d
        add_scaled(&mut r, -alpha, &hd);
        r = project_tangent(kind, z, &r);
        let rr_new = inner(&r, &r);
        let rn = rr_new.sqrt();
        if rn <= r0 * r0.powf(opts.theta).min(opts.kappa) {
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (dk, rk) in d.iter_mut().zip(&r) {
            *dk = -rk + *dk * beta;
        }
        d = project_tangent(kind, z, &d);
    }
    Inner { eta, h_eta, hit_boundary: false }
}

fn manifold_dim(kind: ManifoldKind, n: usize) -> usize {
    match kind {
        ManifoldKind::Complex => n,
        ManifoldKind::Real => (n - 1) / 2,
    }
}

/// Maximizes `obj` on the manifold starting from `z0`.
pub fn rtr_maximize<O: Objective + ?Sized>(
    obj: &O,
    kind: ManifoldKind,
    z0: &[C64],
    opts: &RtrOptions,
) -> Result<RtrReport> {
    let n = z0.len();
    let nf = n as f64;
    let tol = opts.tol_grad.unwrap_or(1e-8 * nf);
    let delta_max = opts.delta_max.unwrap_or(nf);
    let mut delta = opts.delta0.unwrap_or(nf / 8.0).min(delta_max);
    let max_inner = opts.max_inner.unwrap_or_else(|| manifold_dim(kind, n).max(1));

    let mut z = z0.to_vec();
    let mut f = obj.cost(&z);
    if !f.is_finite() {
        return Err(MraError::NonFinite("trust-region cost"));
    }
    let mut egrad = obj.egrad(&z);
    let mut grad = project_tangent(kind, &z, &egrad);
    let mut gn = norm(&grad);
    let mut iterations = 0;
    while iterations < opts.max_iter && gn > tol {
        iterations += 1;
        let step = truncated_cg(obj, kind, &z, &egrad, &grad, delta, opts, max_inner);
        let z_new = retract(kind, &z, &step.eta);
        let f_new = obj.cost(&z_new);
        if !f_new.is_finite() {
            return Err(MraError::NonFinite("trust-region cost"));
        }
        let pred = inner(&grad, &step.eta) + 0.5 * inner(&step.eta, &step.h_eta);
        let actual = f_new - f;
        // Guards the ratio against round-off near convergence.
        let reg = f.abs().max(1.0) * f64::EPSILON * 1e3;
        let model_ok = pred >= 0.0;
        let rho = (actual + reg) / (pred + reg);
        if !model_ok || rho < 0.25 {
            delta /= 4.0;
        } else if rho > 0.75 && step.hit_boundary {
            delta = (2.0 * delta).min(delta_max);
        }
        if model_ok && rho > opts.rho_accept {
            z = z_new;
            f = f_new;
            egrad = obj.egrad(&z);
            grad = project_tangent(kind, &z, &egrad);
            gn = norm(&grad);
        }
        if delta < 1e-14 * nf {
            break;
        }
    }
    Ok(RtrReport { z, cost: f, grad_norm: gn, iterations, converged: gn <= tol })
}

/// Trust-region solve of the phase problem. For real problems of even
/// length, the entry `z[N/2] = ±1` cannot be moved by the solver; the
/// opposite sign is tried and the solve repeated from it when that gives
/// a higher cost.
pub fn rtr_solve(p: &PhaseProblem, z0: &[C64], opts: &RtrOptions) -> Result<RtrReport> {
    let n = p.n();
    if z0.len() != n {
        return Err(MraError::LengthMismatch { expected: n, got: z0.len() });
    }
    let kind = p.kind();
    let mut start = z0.to_vec();
    if kind == ManifoldKind::Real {
        start[0] = p.y0();
    }
    let mut best = rtr_maximize(p, kind, &start, opts)?;
    if kind == ManifoldKind::Real && n % 2 == 0 && opts.flip_heuristic {
        let mut flipped = best.z.clone();
        flipped[n / 2] = -flipped[n / 2];
        if p.cost(&flipped) > best.cost {
            let again = rtr_maximize(p, kind, &flipped, opts)?;
            let iterations = best.iterations + again.iterations;
            if again.cost > best.cost {
                best = again;
            }
            best.iterations = iterations;
        }
    }
    Ok(best)
}
