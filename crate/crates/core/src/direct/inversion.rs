use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{MraError, Result};
use crate::invariants::CMat;
use crate::signal::{ifft, zero_threshold, Signal};

/// Constructive inverse of the bispectrum map for signals whose DFT does
/// not vanish.
///
/// Moduli come from the diagonal (`B[k,k] = |y[k]|² y[0]`), the phase of
/// `y[1]` from an N-th root of `B[N−1,1] B[1,2] Π_{k=2}^{N−1} B[1,k]`, and
/// the remaining phases from `y[k] ∝ y[k−1] conj(B[1,k]) y[1]`.
///
/// The root is the principal one relative to `root_reference`: the angle
/// of the product is taken in `(ref − π, ref + π]` and divided by N. With
/// `None` the reference is the angle of the product itself.
///
/// The output is complex; it lies in the shift orbit of the signal that
/// produced `b`.
pub fn direct_inversion(b: &CMat, root_reference: Option<f64>) -> Result<Signal> {
    let n = b.nrows();
    if n == 0 || b.ncols() != n {
        return Err(MraError::InvalidInput("bispectrum must be square and non-empty".into()));
    }
    let tau = zero_threshold(b.as_slice());
    let check = |v: C64, freq: usize| -> Result<C64> {
        if v.norm() > tau {
            Ok(v)
        } else {
            Err(MraError::VanishingDft { frequency: freq })
        }
    };
    let b00 = check(b[(0, 0)], 0)?;
    let m0 = b00.norm().cbrt();
    let mut y = vec![C64::new(0.0, 0.0); n];
    y[0] = b00 / b00.norm() * m0;
    if n == 1 {
        return Signal::from_complex(ifft(&y));
    }
    let mags: Vec<f64> = (0..n)
        .map(|k| check(b[(k, k)], k).map(|v| (v.norm() / m0).sqrt()))
        .collect::<Result<_>>()?;

    let p1 = if n == 2 {
        // B[1,0] = y[1]² conj(y[0]); the square roots are the two shifts.
        let v = check(b[(1, 0)], 1)? * y[0] / m0;
        C64::from_polar(1.0, v.arg())
    } else {
        let mut prod = check(b[(n - 1, 1)], n - 1)?;
        prod *= check(b[(1, 2)], 2)?;
        for k in 2..n {
            prod *= check(b[(1, k)], k)?;
        }
        let prod = prod / prod.norm();
        C64::from_polar(1.0, prod.arg())
    };
    let reference = root_reference.unwrap_or_else(|| p1.arg());
    let mut angle = p1.arg();
    while angle <= reference - PI {
        angle += 2.0 * PI;
    }
    while angle > reference + PI {
        angle -= 2.0 * PI;
    }
    let root_n = if n == 2 { 2.0 } else { n as f64 };
    let ph1 = C64::from_polar(1.0, angle / root_n);

    let mut phase = ph1;
    y[1] = ph1 * mags[1];
    for k in 2..n {
        let v = phase * check(b[(1, k)], k)?.conj() * ph1;
        phase = v / v.norm();
        y[k] = phase * mags[k];
    }
    Signal::from_complex(ifft(&y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariants::bispectrum_of;
    use crate::signal::{circular_shift, relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn offset(x: Signal, c: f64) -> Signal {
        let v = x.values().iter().map(|v| v + c).collect();
        Signal::from_complex(v).unwrap()
    }

    #[test]
    fn exact_inversion_complex() {
        let x = offset(Signal::complex_gaussian(11, 5).unwrap(), 0.8);
        let xh = direct_inversion(&bispectrum_of(&x), None).unwrap();
        assert!(relative_error(&x, &xh).unwrap() < 1e-8);
    }

    #[test]
    fn shifted_input_same_orbit() {
        let x = offset(Signal::complex_gaussian(11, 6).unwrap(), 0.5);
        let xh = direct_inversion(&bispectrum_of(&circular_shift(&x, 4)), None).unwrap();
        assert!(relative_error(&x, &xh).unwrap() < 1e-8);
    }

    #[test]
    fn small_lengths() {
        for n in [1, 2, 3] {
            let x = offset(Signal::complex_gaussian(n, 7).unwrap(), 1.0);
            let xh = direct_inversion(&bispectrum_of(&x), None).unwrap();
            assert!(relative_error(&x, &xh).unwrap() < 1e-8, "n = {n}");
        }
    }

    #[test]
    fn error_decays_linearly_with_perturbation() {
        let x = offset(Signal::complex_gaussian(11, 8).unwrap(), 0.7);
        let b = bispectrum_of(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = CMat::from_fn(11, 11, |_, _| {
            C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        let e_norm = e.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let errs: Vec<f64> = [1e-4, 1e-6, 1e-8]
            .iter()
            .map(|&s| {
                let bp = &b + &e * C64::new(s / e_norm, 0.0);
                relative_error(&x, &direct_inversion(&bp, None).unwrap()).unwrap()
            })
            .collect();
        // Lipschitz constants at each scale agree within a factor 10.
        let l: Vec<f64> = errs.iter().zip([1e-4, 1e-6, 1e-8]).map(|(e, s)| e / s).collect();
        assert!(l.iter().all(|v| v.is_finite()));
        let (lo, hi) = (l.iter().cloned().fold(f64::INFINITY, f64::min), l.iter().cloned().fold(0.0, f64::max));
        assert!(hi / lo < 10.0, "{l:?}");
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
    }

    #[test]
    fn vanishing_coefficient_is_reported() {
        let x = Signal::window(8, 4, 1.0).unwrap(); // y[2] = y[4] = y[6] = 0
        assert!(matches!(
            direct_inversion(&bispectrum_of(&x), None),
            Err(MraError::VanishingDft { frequency: 2 })
        ));
    }
}
