use num_complex::Complex64 as C64;

use crate::invariants::CMat;
use crate::signal::{phase_or_one, PhaseVec};

/// Recovers the Fourier phases one frequency at a time.
///
/// `ŷ[k]` is the SO(2) average of `ŷ[ℓ] ŷ[k−ℓ] conj(B̃[ℓ,k])` over
/// `ℓ = 1..⌊k/2⌋`; when that sum vanishes (for instance because every
/// entry of `B̃` involved is zero) `ŷ[k] = 1`.
pub fn frequency_marching(b_tilde: &CMat, y0: C64, y1: C64) -> PhaseVec {
    let n = b_tilde.nrows();
    let mut y = vec![C64::new(1.0, 0.0); n];
    if n == 0 {
        return PhaseVec::from_unit(y);
    }
    y[0] = phase_or_one(y0, 1);
    if n > 1 {
        y[1] = phase_or_one(y1, 1);
    }
    for k in 2..n {
        let half = k / 2;
        let s: C64 = (1..=half).map(|l| y[l] * y[k - l] * b_tilde[(l, k)].conj()).sum();
        y[k] = phase_or_one(s, half);
    }
    PhaseVec::from_unit(y)
}
