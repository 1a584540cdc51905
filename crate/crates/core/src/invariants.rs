//! Shift-invariant features: mean, power spectrum and bispectrum.
//!
//! [`InvariantAccumulator`] keeps running sums so that estimation can be
//! streamed and sharded; [`InvariantAccumulator::finalize`] applies the
//! noise bias corrections.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{MraError, Result};
use crate::observations::ObservationBatch;
use crate::signal::{fft, phase_of, unit, zero_threshold, Signal};

pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

/// `B[k1,k2] = y[k1] conj(y[k2]) y[k2-k1]`.
pub fn bispectrum_from_spectrum(y: &[C64]) -> CMat {
    let n = y.len();
    let mut b = CMat::zeros(n, n);
    add_bispectrum(&mut b, y);
    b
}

fn add_bispectrum(b: &mut CMat, y: &[C64]) {
    let n = y.len();
    for k2 in 0..n {
        let cy2 = y[k2].conj();
        let col = b.column_mut(k2);
        for (k1, out) in col.into_iter().enumerate() {
            *out += y[k1] * cy2 * y[(k2 + n - k1) % n];
        }
    }
}

pub fn bispectrum_of(x: &Signal) -> CMat {
    bispectrum_from_spectrum(&fft(x.values()))
}

pub fn power_spectrum_of(x: &Signal) -> Vec<f64> {
    fft(x.values()).iter().map(|v| v.norm_sqr()).collect()
}

/// Expected bias pattern of the raw bispectrum average, in units of
/// `σ² N² μ`.
pub fn bias_matrix(n: usize, is_real: bool) -> RMat {
    let mut a = RMat::zeros(n, n);
    for k in 0..n {
        a[(k, k)] = 1.0;
        a[(0, k)] = 1.0;
        if is_real {
            a[(k, 0)] = 1.0;
        }
    }
    if n > 0 {
        a[(0, 0)] = if is_real { 3.0 } else { 2.0 };
    }
    a
}

/// Running sums over observations.
///
/// With a `center`, each observation has `center` subtracted before its
/// bispectrum is taken; the power and mean sums always use the raw data.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantAccumulator {
    n: usize,
    count: u64,
    sum_mean: C64,
    sum_power: Vec<f64>,
    sum_bispec: CMat,
    sigma: f64,
    is_real: bool,
    center: Option<C64>,
}

impl InvariantAccumulator {
    pub fn new(n: usize, sigma: f64, is_real: bool) -> Self {
        Self {
            n,
            count: 0,
            sum_mean: C64::new(0.0, 0.0),
            sum_power: vec![0.0; n],
            sum_bispec: CMat::zeros(n, n),
            sigma,
            is_real,
            center: None,
        }
    }

    /// Accumulator for the second pass of the two-pass estimator, which
    /// takes the bispectrum of `ξ − center`.
    pub fn centered(n: usize, sigma: f64, is_real: bool, center: C64) -> Self {
        Self { center: Some(center), ..Self::new(n, sigma, is_real) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn sum_mean(&self) -> C64 {
        self.sum_mean
    }

    pub fn sum_power(&self) -> &[f64] {
        &self.sum_power
    }

    pub fn sum_bispec(&self) -> &CMat {
        &self.sum_bispec
    }

    pub fn accumulate(&mut self, xi: &[C64]) -> Result<()> {
        if xi.len() != self.n {
            return Err(MraError::LengthMismatch { expected: self.n, got: xi.len() });
        }
        let n = self.n as f64;
        self.count += 1;
        self.sum_mean += xi.iter().sum::<C64>() / n;
        let mut y = fft(xi);
        for (p, v) in self.sum_power.iter_mut().zip(&y) {
            *p += v.norm_sqr();
        }
        if let Some(c) = self.center {
            // Subtracting a constant only moves the DC coefficient.
            y[0] -= c * n;
        }
        add_bispectrum(&mut self.sum_bispec, &y);
        Ok(())
    }

    pub fn accumulate_batch(&mut self, batch: &ObservationBatch) -> Result<()> {
        for xi in &batch.observations {
            self.accumulate(xi)?;
        }
        Ok(())
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(MraError::LengthMismatch { expected: self.n, got: other.n });
        }
        if self.sigma != other.sigma || self.is_real != other.is_real || self.center != other.center {
            return Err(MraError::InvalidInput(
                "accumulators differ in sigma, kind or centering".into(),
            ));
        }
        let mut out = self.clone();
        out.count += other.count;
        out.sum_mean += other.sum_mean;
        for (a, b) in out.sum_power.iter_mut().zip(&other.sum_power) {
            *a += b;
        }
        out.sum_bispec += &other.sum_bispec;
        Ok(out)
    }

    /// Bias-corrected estimates.
    ///
    /// `E[B_{ξ−c}] = B_{x−c} + σ² N² (μ − c) A`, so the correction uses
    /// `μ̂ − c`; for the one-pass estimator `c = 0`, and for the two-pass
    /// estimator with `c = μ̂` the correction vanishes.
    pub fn finalize(&self) -> Result<InvariantEstimates> {
        if self.count == 0 {
            return Err(MraError::NoMeasurements);
        }
        let m = self.count as f64;
        let n = self.n;
        let nf = n as f64;
        let s2 = self.sigma * self.sigma;
        let mu_hat = self.sum_mean / m;
        let mut power_hat: Vec<f64> = self.sum_power.iter().map(|p| p / m - nf * s2).collect();
        let shift = mu_hat - self.center.unwrap_or_default();
        let a = bias_matrix(n, self.is_real);
        let mut b = self.sum_bispec.map(|v| v / m);
        if s2 > 0.0 {
            let scale = shift * (s2 * nf * nf);
            for (v, w) in b.iter_mut().zip(a.iter()) {
                if *w != 0.0 {
                    *v -= scale * *w;
                }
            }
        }
        if self.is_real {
            let sym = (&b + b.adjoint()) * C64::new(0.5, 0.0);
            b = sym;
            let p = power_hat.clone();
            for k in 0..n {
                power_hat[k] = 0.5 * (p[k] + p[(n - k) % n]);
            }
        }
        Ok(InvariantEstimates {
            n,
            count: self.count,
            sigma: self.sigma,
            is_real: self.is_real,
            mu_hat: if self.is_real { C64::new(mu_hat.re, 0.0) } else { mu_hat },
            power_hat,
            bispec_hat: b,
        })
    }
}

/// Which bispectrum estimator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BispectrumEstimator {
    /// Streaming average with the analytic bias removed.
    #[default]
    OnePass,
    /// Average of bispectra of mean-subtracted observations.
    TwoPass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantEstimates {
    pub n: usize,
    pub count: u64,
    pub sigma: f64,
    pub is_real: bool,
    pub mu_hat: C64,
    pub power_hat: Vec<f64>,
    pub bispec_hat: CMat,
}

/// Estimates from a stored batch with the chosen bispectrum estimator.
pub fn estimate_invariants(
    batch: &ObservationBatch,
    sigma: f64,
    kind: BispectrumEstimator,
) -> Result<InvariantEstimates> {
    let mut acc = InvariantAccumulator::new(batch.n, sigma, batch.is_real);
    acc.accumulate_batch(batch)?;
    match kind {
        BispectrumEstimator::OnePass => acc.finalize(),
        BispectrumEstimator::TwoPass => {
            let first = acc.finalize()?;
            let mut second =
                InvariantAccumulator::centered(batch.n, sigma, batch.is_real, first.mu_hat);
            second.accumulate_batch(batch)?;
            second.finalize()
        }
    }
}

/// Entrywise phase of a bispectrum estimate.
pub fn normalized_bispectrum(b: &CMat) -> CMat {
    let tau = zero_threshold(b.as_slice());
    b.map(|v| unit(v, tau))
}

/// `sqrt(max(P̂, 0))`.
pub fn magnitudes_from_power_spectrum(p: &[f64]) -> Vec<f64> {
    p.iter().map(|&v| if v > 0.0 { v.sqrt() } else { 0.0 }).collect()
}

/// `W = sqrt(|B̂|)`.
pub fn default_weights(b: &CMat) -> RMat {
    b.map(|v| v.norm().sqrt())
}

/// Noise level from the spread of the per-observation sums, which do not
/// depend on the shift. Uses the unbiased `1/(M−1)` sample variance; for
/// complex data the variance is `E|s − E s|²`.
pub fn estimate_sigma(batch: &ObservationBatch) -> Result<f64> {
    let m = batch.len();
    if m < 2 {
        return Err(MraError::InvalidInput("estimate_sigma needs M >= 2".into()));
    }
    let sums: Vec<C64> = batch.observations.iter().map(|o| o.iter().sum()).collect();
    let mean: C64 = sums.iter().sum::<C64>() / m as f64;
    let var = sums.iter().map(|s| (s - mean).norm_sqr()).sum::<f64>() / (m - 1) as f64;
    Ok((var / batch.n as f64).sqrt())
}

/// The N candidate values of `phase(y[1])`, i.e. the N-th roots of the
/// phase of `B[N−1,1] B[1,2] Π_{k=2}^{N−1} B[1,k]`.
pub fn estimate_y1(b: &CMat) -> Result<Vec<C64>> {
    let n = b.nrows();
    if n < 3 {
        return Err(MraError::InvalidInput("estimate_y1 needs N >= 3".into()));
    }
    let tau = zero_threshold(b.as_slice());
    let mut factors = vec![(n - 1, 1, n - 1), (1, 2, 2)];
    factors.extend((2..n).map(|k| (1, k, k)));
    let mut prod = C64::new(1.0, 0.0);
    for (k1, k2, freq) in factors {
        let p = unit(b[(k1, k2)], tau);
        if p.norm() == 0.0 {
            return Err(MraError::VanishingDft { frequency: freq });
        }
        prod *= p;
    }
    let base = prod.arg() / n as f64;
    Ok((0..n)
        .map(|m| C64::from_polar(1.0, base + 2.0 * PI * m as f64 / n as f64))
        .collect())
}

/// Phases of a spectrum under the `phase_of` rule.
pub fn spectrum_phases(y: &[C64]) -> Vec<C64> {
    phase_of(y).into_values()
}
