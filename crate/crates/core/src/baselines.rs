//! Alignment-based reference estimators.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{MraError, Result};
use crate::observations::ObservationBatch;
use crate::signal::{fft, shift_slice, Signal};

/// Shift `k` maximizing `Re Σ_n ξ_1[n] conj(ξ_j[n+k])`, given both DFTs.
/// Ties go to the smallest `k`.
pub fn best_alignment(ref_hat: &[C64], xi_hat: &[C64]) -> usize {
    let n = ref_hat.len();
    let prod: Vec<C64> = ref_hat.iter().zip(xi_hat).map(|(a, b)| a * b.conj()).collect();
    let c = fft(&prod);
    let mut best = 0;
    for k in 1..n {
        if c[k].re > c[best].re {
            best = k;
        }
    }
    best
}

fn average(batch: &ObservationBatch, aligned: Vec<Vec<C64>>) -> Result<Signal> {
    let m = aligned.len() as f64;
    let mut acc = vec![C64::new(0.0, 0.0); batch.n];
    for a in aligned {
        for (t, v) in acc.iter_mut().zip(a) {
            *t += v;
        }
    }
    acc.iter_mut().for_each(|v| *v /= m);
    Signal::new(acc, batch.is_real)
}

/// Aligns every observation to the first one and averages.
pub fn template_align_average(batch: &ObservationBatch) -> Result<Signal> {
    let first = batch.observations.first().ok_or(MraError::NoMeasurements)?;
    let ref_hat = fft(first);
    let aligned: Vec<Vec<C64>> = batch
        .observations
        .par_iter()
        .map(|o| shift_slice(o, -(best_alignment(&ref_hat, &fft(o)) as i64)))
        .collect();
    average(batch, aligned)
}

/// Averages the observations after undoing their true shifts.
pub fn oracle_average(batch: &ObservationBatch) -> Result<Signal> {
    let shifts = batch.true_shifts.as_ref().ok_or(MraError::MissingShifts)?;
    if batch.is_empty() {
        return Err(MraError::NoMeasurements);
    }
    if shifts.len() != batch.len() {
        return Err(MraError::LengthMismatch { expected: batch.len(), got: shifts.len() });
    }
    let aligned = batch.observations.iter().zip(shifts).map(|(o, &r)| shift_slice(o, -(r as i64))).collect();
    average(batch, aligned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observations::generate_observations;
    use crate::signal::{circular_shift, relative_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_template_is_exact_shift_of_first() {
        let x = Signal::gaussian(15, 1).unwrap();
        let batch = generate_observations(&x, 20, 0.0, 2).unwrap();
        let est = template_align_average(&batch).unwrap();
        let r1 = batch.true_shifts.as_ref().unwrap()[0] as i64;
        let want = circular_shift(&x, r1);
        assert!(est.values().iter().zip(want.values()).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn alignment_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = 11;
            let a: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let b: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let brute = (0..n)
                .map(|k| (0..n).map(|i| (a[i] * b[(i + k) % n].conj()).re).sum::<f64>())
                .collect::<Vec<_>>();
            let mut best = 0;
            for k in 1..n {
                if brute[k] > brute[best] {
                    best = k;
                }
            }
            assert_eq!(best_alignment(&fft(&a), &fft(&b)), best);
        }
    }

    #[test]
    fn oracle_exact_without_noise_and_requires_shifts() {
        let x = Signal::complex_gaussian(9, 4).unwrap();
        let mut batch = generate_observations(&x, 5, 0.0, 5).unwrap();
        assert!(relative_error(&x, &oracle_average(&batch).unwrap()).unwrap() < 1e-14);
        let est = oracle_average(&batch).unwrap();
        assert!(est.values().iter().zip(x.values()).all(|(a, b)| (a - b).norm() < 1e-12));
        batch.true_shifts = None;
        assert!(matches!(oracle_average(&batch), Err(MraError::MissingShifts)));
    }
}
