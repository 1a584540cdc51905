//! Signals, spectra, phases and the shift-aligned error metric.
//!
//! The forward DFT is unnormalized, `y[k] = Σ_n x[n] e^{-2πikn/N}`, so the
//! DC coefficient equals `N` times the mean of the signal.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::Deref;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use crate::error::{MraError, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalized forward FFT.
pub fn fft_in_place(buf: &mut [C64]) {
    if buf.len() <= 1 {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// In-place inverse FFT including the `1/N` factor.
pub fn ifft_in_place(buf: &mut [C64]) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
    plan.process(buf);
    let s = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= s;
    }
}

pub fn fft(x: &[C64]) -> Vec<C64> {
    let mut buf = x.to_vec();
    fft_in_place(&mut buf);
    buf
}

pub fn ifft(y: &[C64]) -> Vec<C64> {
    let mut buf = y.to_vec();
    ifft_in_place(&mut buf);
    buf
}

/// A length-N signal, real or complex.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    values: Vec<C64>,
    is_real: bool,
}

impl Signal {
    pub fn from_real(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(MraError::InvalidInput("signal must have N >= 1".into()));
        }
        Ok(Self {
            values: values.iter().map(|&v| C64::new(v, 0.0)).collect(),
            is_real: true,
        })
    }

    pub fn from_complex(values: Vec<C64>) -> Result<Self> {
        if values.is_empty() {
            return Err(MraError::InvalidInput("signal must have N >= 1".into()));
        }
        Ok(Self { values, is_real: false })
    }

    /// Build a signal with the given convention. For real signals the
    /// imaginary parts are dropped.
    pub fn new(values: Vec<C64>, is_real: bool) -> Result<Self> {
        if is_real {
            let re: Vec<f64> = values.iter().map(|v| v.re).collect();
            Self::from_real(&re)
        } else {
            Self::from_complex(values)
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.values)
    }

    pub fn mean(&self) -> C64 {
        self.values.iter().sum::<C64>() / self.len() as f64
    }

    /// Box of `width` samples of value `height` starting at index 0.
    pub fn window(n: usize, width: usize, height: f64) -> Result<Self> {
        if width > n {
            return Err(MraError::InvalidInput(format!(
                "window width {width} exceeds length {n}"
            )));
        }
        let v: Vec<f64> = (0..n).map(|i| if i < width { height } else { 0.0 }).collect();
        Self::from_real(&v)
    }

    /// I.i.d. standard normal real entries.
    pub fn gaussian(n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        Self::from_real(&v)
    }

    /// I.i.d. complex normal entries with unit variance per entry.
    pub fn complex_gaussian(n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = (0..n)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re * s, im * s)
            })
            .collect();
        Self::from_complex(v)
    }
}

/// DFT coefficients of a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<C64>,
}

impl Deref for Spectrum {
    type Target = [C64];
    fn deref(&self) -> &[C64] {
        &self.values
    }
}

/// Unit-modulus (or exactly zero) phase vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVec {
    values: Vec<C64>,
}

impl PhaseVec {
    /// Wraps values already known to have modulus 0 or 1.
    pub(crate) fn from_unit(values: Vec<C64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }
}

impl Deref for PhaseVec {
    type Target = [C64];
    fn deref(&self) -> &[C64] {
        &self.values
    }
}

pub fn dft(x: &Signal) -> Spectrum {
    Spectrum { values: fft(&x.values) }
}

/// Inverse DFT. `is_real` selects the convention of the output signal;
/// with `is_real` the imaginary parts are discarded.
pub fn idft(y: &Spectrum, is_real: bool) -> Signal {
    let v = ifft(&y.values);
    Signal::new(v, is_real).expect("spectrum is non-empty")
}

/// `out[n] = x[(n - r) mod N]`.
pub fn circular_shift(x: &Signal, r: i64) -> Signal {
    Signal { values: shift_slice(&x.values, r), is_real: x.is_real }
}

pub fn shift_slice(x: &[C64], r: i64) -> Vec<C64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let r = r.rem_euclid(n as i64) as usize;
    (0..n).map(|i| x[(i + n - r) % n]).collect()
}

/// Zero threshold for `phase_of`.
pub fn zero_threshold(v: &[C64]) -> f64 {
    let inf = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    1e-13 * inf.max(1.0)
}

#[inline]
pub(crate) fn unit(a: C64, tau: f64) -> C64 {
    let r = a.norm();
    if r > tau {
        a / r
    } else {
        C64::new(0.0, 0.0)
    }
}

pub fn phase_of(v: &[C64]) -> PhaseVec {
    let tau = zero_threshold(v);
    PhaseVec { values: v.iter().map(|&a| unit(a, tau)).collect() }
}

/// Phase of the sum of unit-modulus numbers; 1 when the sum vanishes.
pub fn so2_average(phases: &[C64]) -> Result<C64> {
    if phases.is_empty() {
        return Err(MraError::NoMeasurements);
    }
    let s: C64 = phases.iter().sum();
    Ok(phase_or_one(s, phases.len()))
}

/// Phase of `s`, or 1 when `s` is numerically zero relative to `count`
/// unit-modulus summands.
pub(crate) fn phase_or_one(s: C64, count: usize) -> C64 {
    let tau = 1e-13 * (count as f64).max(1.0);
    let r = s.norm();
    if r > tau {
        s / r
    } else {
        C64::new(1.0, 0.0)
    }
}

/// Angle in (−π, π]; an exact −π maps to +π.
pub fn angle(a: C64) -> f64 {
    let t = a.arg();
    if t <= -PI {
        PI
    } else {
        t
    }
}

pub(crate) fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Shift-aligned relative error `min_s ‖R_s x̂ − x‖ / ‖x‖`.
pub fn relative_error(x: &Signal, x_hat: &Signal) -> Result<f64> {
    relative_error_slices(x.values(), x_hat.values())
}

pub fn relative_error_slices(x: &[C64], x_hat: &[C64]) -> Result<f64> {
    let n = x.len();
    if x_hat.len() != n {
        return Err(MraError::LengthMismatch { expected: n, got: x_hat.len() });
    }
    let nx = norm2(x);
    if nx == 0.0 {
        return Err(MraError::ZeroNorm);
    }
    let mut best = f64::INFINITY;
    for s in 0..n {
        let mut acc = 0.0;
        for i in 0..n {
            acc += (x_hat[(i + n - s) % n] - x[i]).norm_sqr();
        }
        best = best.min(acc);
    }
    Ok(best.sqrt() / nx)
}
