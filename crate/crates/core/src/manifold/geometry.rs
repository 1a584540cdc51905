//! The phase torus `{z ∈ ℂ^N : |z[k]| = 1}` and its conjugate-symmetric
//! submanifold used for real signals.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    /// Product of N unit circles.
    Complex,
    /// Points with `z[N−k] = conj(z[k])` and `z[0]` fixed. For even N,
    /// `z[N/2] = ±1` is also fixed (the tangent space is zero there).
    Real,
}

impl ManifoldKind {
    pub fn for_signal(is_real: bool) -> Self {
        if is_real {
            Self::Real
        } else {
            Self::Complex
        }
    }
}

/// Real inner product `Re(u* v)`.
pub fn inner(u: &[C64], v: &[C64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
}

pub fn norm(u: &[C64]) -> f64 {
    inner(u, u).sqrt()
}

/// `(u[k] + conj(u[N−k])) / 2`.
pub fn down_up(u: &[C64]) -> Vec<C64> {
    let n = u.len();
    (0..n).map(|k| (u[k] + u[(n - k) % n].conj()) * 0.5).collect()
}

fn proj_circle(z: &[C64], u: &[C64]) -> Vec<C64> {
    z.iter()
        .zip(u)
        .map(|(zk, uk)| {
            let radial = uk.re * zk.re + uk.im * zk.im;
            uk - zk * radial
        })
        .collect()
}

/// Orthogonal projection of `u` onto the tangent space at `z`.
pub fn project_tangent(kind: ManifoldKind, z: &[C64], u: &[C64]) -> Vec<C64> {
    match kind {
        ManifoldKind::Complex => proj_circle(z, u),
        ManifoldKind::Real => {
            let mut v = proj_circle(z, &down_up(u));
            // Exact zeros where the real manifold has no freedom.
            let n = v.len();
            v[0] = C64::new(0.0, 0.0);
            if n % 2 == 0 {
                v[n / 2] = C64::new(0.0, 0.0);
            }
            v
        }
    }
}

/// `phase(z + dz)`; an entry with `z[k] + dz[k] = 0` keeps `z[k]`.
pub fn retract(kind: ManifoldKind, z: &[C64], dz: &[C64]) -> Vec<C64> {
    let n = z.len();
    let mut out: Vec<C64> = z
        .iter()
        .zip(dz)
        .map(|(a, d)| {
            let s = a + d;
            let r = s.norm();
            if r > 0.0 && r.is_finite() {
                s / r
            } else {
                *a
            }
        })
        .collect();
    if kind == ManifoldKind::Real {
        // Conjugate symmetry already holds up to the order of floating
        // point operations; make it exact.
        out[0] = z[0];
        for k in 1..=n / 2 {
            if 2 * k == n {
                out[k] = z[k];
            } else {
                out[n - k] = out[k].conj();
            }
        }
    }
    out
}

/// Uniform random phases; for the real manifold the phases are symmetrized
/// and `z[0]` is set to `y0`.
pub fn random_point<R: Rng + ?Sized>(kind: ManifoldKind, n: usize, y0: C64, rng: &mut R) -> Vec<C64> {
    let z: Vec<C64> = (0..n).map(|_| C64::from_polar(1.0, rng.gen_range(-PI..PI))).collect();
    match kind {
        ManifoldKind::Complex => z,
        ManifoldKind::Real => {
            let mut s: Vec<C64> = down_up(&z)
                .into_iter()
                .map(|v| {
                    let r = v.norm();
                    if r > 0.0 {
                        v / r
                    } else {
                        C64::new(1.0, 0.0)
                    }
                })
                .collect();
            s[0] = y0;
            s
        }
    }
}

/// Whether `z` lies on the manifold within `tol`.
pub fn is_on_manifold(kind: ManifoldKind, z: &[C64], tol: f64) -> bool {
    let n = z.len();
    if z.iter().any(|v| (v.norm() - 1.0).abs() > tol) {
        return false;
    }
    if kind == ManifoldKind::Real {
        if z[0].im.abs() > tol {
            return false;
        }
        if (0..n).any(|k| (z[(n - k) % n] - z[k].conj()).norm() > tol) {
            return false;
        }
    }
    true
}

/// Whether `dz` is tangent at `z` within `tol`.
pub fn is_tangent(kind: ManifoldKind, z: &[C64], dz: &[C64], tol: f64) -> bool {
    let n = z.len();
    if z.iter().zip(dz).any(|(a, d)| (a.re * d.re + a.im * d.im).abs() > tol) {
        return false;
    }
    if kind == ManifoldKind::Real {
        if dz[0].norm() > tol || (n % 2 == 0 && dz[n / 2].norm() > tol) {
            return false;
        }
        if (0..n).any(|k| (dz[(n - k) % n] - dz[k].conj()).norm() > tol) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gauss_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        (0..n)
            .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect()
    }

    #[test]
    fn radial_directions_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = random_point(ManifoldKind::Complex, 9, C64::new(1.0, 0.0), &mut rng);
        let u: Vec<C64> = z.iter().enumerate().map(|(k, v)| v * (k as f64 - 3.0)).collect();
        assert!(norm(&project_tangent(ManifoldKind::Complex, &z, &u)) < 1e-14);
    }

    #[test]
    fn projection_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for kind in [ManifoldKind::Complex, ManifoldKind::Real] {
            for n in [8, 9] {
                let z = random_point(kind, n, C64::new(-1.0, 0.0), &mut rng);
                let u = gauss_vec(n, &mut rng);
                let p = project_tangent(kind, &z, &u);
                let pp = project_tangent(kind, &z, &p);
                let d: Vec<C64> = p.iter().zip(&pp).map(|(a, b)| a - b).collect();
                assert!(norm(&d) < 1e-12);
                assert!(is_tangent(kind, &z, &p, 1e-14));
            }
        }
    }

    #[test]
    fn real_retraction_stays_on_submanifold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [8, 9] {
            for _ in 0..20 {
                let z = random_point(ManifoldKind::Real, n, C64::new(1.0, 0.0), &mut rng);
                let u = gauss_vec(n, &mut rng);
                let dz = project_tangent(ManifoldKind::Real, &z, &u);
                let r = retract(ManifoldKind::Real, &z, &dz);
                for k in 0..n {
                    assert_eq!(r[(n - k) % n], r[k].conj());
                }
                assert_eq!(r[0], C64::new(1.0, 0.0));
                if n % 2 == 0 {
                    assert_eq!(r[n / 2], z[n / 2]);
                }
                assert!(is_on_manifold(ManifoldKind::Real, &r, 1e-14));
            }
        }
    }

    #[test]
    fn retract_zero_and_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = random_point(ManifoldKind::Complex, 5, C64::new(1.0, 0.0), &mut rng);
        assert_eq!(retract(ManifoldKind::Complex, &z, &vec![C64::new(0.0, 0.0); 5]), z);
        let mut dz = vec![C64::new(0.0, 0.0); 5];
        dz[2] = -z[2];
        assert_eq!(retract(ManifoldKind::Complex, &z, &dz)[2], z[2]);
    }
}
