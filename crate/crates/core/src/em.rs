//! Expectation maximization over the unknown shifts.
//!
//! With `x_k` the current estimate, observation `ξ_j` has shift posterior
//! `w_ℓ ∝ exp(−‖R_ℓ x_k − ξ_j‖²/(2σ²))`, and the update averages all
//! back-shifted observations with those weights. Both the N distances and
//! the weighted back-shift are circular correlations, done with FFTs.
//!
//! For complex batches the noise has variance σ²/2 per component, so the
//! likelihood uses `σ/√2` in place of σ.

use num_complex::Complex64 as C64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{MraError, Result};
use crate::observations::ObservationBatch;
use crate::signal::{fft, ifft, relative_error_slices, Signal};

/// Observations per parallel work item; fixed so the reduction order, and
/// hence the result, does not depend on the number of threads.
const CHUNK: usize = 256;

/// `c[ℓ] = Σ_n ξ[n] conj(x[n−ℓ])`, from the DFTs of both.
fn correlation(x_hat: &[C64], xi_hat: &[C64]) -> Vec<f64> {
    let prod: Vec<C64> = x_hat.iter().zip(xi_hat).map(|(a, b)| a.conj() * b).collect();
    ifft(&prod).into_iter().map(|v| v.re).collect()
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Posterior from `Re c[ℓ]`; the terms `‖x‖²` and `‖ξ‖²` cancel.
fn posteriors_from_correlation(c: &[f64], sigma: f64) -> Vec<f64> {
    let n = c.len();
    if sigma == 0.0 {
        let mut w = vec![0.0; n];
        w[argmax_first(c)] = 1.0;
        return w;
    }
    let s2 = sigma * sigma;
    let mx = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = c.iter().map(|v| ((v - mx) / s2).exp()).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Posterior probabilities of the N shifts of `xi` relative to `x`.
///
/// `σ = 0` gives a one-hot vector at the best-correlated shift (smallest
/// index on ties), the limit of the soft weights.
pub fn shift_posteriors(x: &[C64], xi: &[C64], sigma: f64) -> Result<Vec<f64>> {
    if x.len() != xi.len() {
        return Err(MraError::LengthMismatch { expected: x.len(), got: xi.len() });
    }
    if !(sigma >= 0.0) {
        return Err(MraError::InvalidInput(format!("sigma must be >= 0, got {sigma}")));
    }
    Ok(posteriors_from_correlation(&correlation(&fft(x), &fft(xi)), sigma))
}

/// Batch with cached DFTs.
struct Prepared<'a> {
    batch: &'a ObservationBatch,
    spectra: Vec<Vec<C64>>,
    sigma_eff: f64,
}

impl<'a> Prepared<'a> {
    fn new(batch: &'a ObservationBatch, sigma: f64) -> Result<Self> {
        if batch.is_empty() {
            return Err(MraError::NoMeasurements);
        }
        if !(sigma >= 0.0) {
            return Err(MraError::InvalidInput(format!("sigma must be >= 0, got {sigma}")));
        }
        let spectra = batch.observations.par_iter().map(|o| fft(o)).collect();
        let sigma_eff = if batch.is_real { sigma } else { sigma / 2f64.sqrt() };
        Ok(Self { batch, spectra, sigma_eff })
    }

    /// One update using the observations listed in `idx`.
    fn step(&self, x: &[C64], idx: &[usize]) -> Vec<C64> {
        let n = x.len();
        let x_hat = fft(x);
        let partial: Vec<Vec<C64>> = idx
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = vec![C64::new(0.0, 0.0); n];
                for &j in chunk {
                    let xi_hat = &self.spectra[j];
                    let w = posteriors_from_correlation(&correlation(&x_hat, xi_hat), self.sigma_eff);
                    let w_hat = fft(&w.iter().map(|v| C64::new(*v, 0.0)).collect::<Vec<_>>());
                    // Σ_ℓ w_ℓ ξ[n+ℓ] has DFT Ξ[k]·conj(W[k]).
                    for ((a, xh), wh) in acc.iter_mut().zip(xi_hat).zip(&w_hat) {
                        *a += xh * wh.conj();
                    }
                }
                acc
            })
            .collect();
        let mut total = vec![C64::new(0.0, 0.0); n];
        for p in partial {
            for (t, v) in total.iter_mut().zip(p) {
                *t += v;
            }
        }
        let m = idx.len() as f64;
        let mut out = ifft(&total);
        for v in &mut out {
            *v /= m;
            if self.batch.is_real {
                v.im = 0.0;
            }
        }
        out
    }
}

/// One full-data update `x ← (1/M) Σ_j Σ_ℓ w^{ℓ,j} R_ℓ^{−1} ξ_j`.
pub fn em_step(x: &[C64], batch: &ObservationBatch, sigma: f64) -> Result<Vec<C64>> {
    if x.len() != batch.n {
        return Err(MraError::LengthMismatch { expected: batch.n, got: x.len() });
    }
    let prep = Prepared::new(batch, sigma)?;
    let idx: Vec<usize> = (0..batch.len()).collect();
    Ok(prep.step(x, &idx))
}

/// Log-likelihood of `x` up to an additive constant:
/// `Σ_j log((1/N) Σ_ℓ exp(−‖R_ℓ x − ξ_j‖²/(2σ_e²)))`.
pub fn log_likelihood(x: &[C64], batch: &ObservationBatch, sigma: f64) -> Result<f64> {
    let prep = Prepared::new(batch, sigma)?;
    if prep.sigma_eff == 0.0 {
        return Err(MraError::InvalidInput("likelihood needs sigma > 0".into()));
    }
    let s2 = prep.sigma_eff * prep.sigma_eff;
    let n = x.len() as f64;
    let x_hat = fft(x);
    let nx: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    let mut total = 0.0;
    for (o, xi_hat) in batch.observations.iter().zip(&prep.spectra) {
        let no: f64 = o.iter().map(|v| v.norm_sqr()).sum();
        let logs: Vec<f64> =
            correlation(&x_hat, xi_hat).iter().map(|c| -(nx + no - 2.0 * c) / (2.0 * s2)).collect();
        let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        total += mx + (logs.iter().map(|l| (l - mx).exp()).sum::<f64>() / n).ln();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy)]
pub struct EmOptions {
    /// Stop when the shift-aligned relative change drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Warm start runs when the batch has at least this many observations.
    pub warm_threshold: usize,
    pub batch_iters: usize,
    pub batch_size: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { tol: 1e-5, max_iter: 100_000, warm_threshold: 3000, batch_iters: 3000, batch_size: 1000 }
    }
}

/// Final estimate and stopping information.
#[derive(Debug, Clone)]
pub struct EmState {
    pub x_est: Signal,
    /// Full-data iterations.
    pub iteration: usize,
    pub warm_iterations: usize,
    /// Shift-aligned relative distance between the last two estimates.
    pub last_rel_change: f64,
    pub converged: bool,
}

/// Runs EM from `x_0 ~ N(0, I)` drawn with `seed`, with a mini-batch warm
/// start (a fresh random subset each iteration) on large batches.
pub fn em_run(batch: &ObservationBatch, sigma: f64, seed: u64, opts: &EmOptions) -> Result<EmState> {
    let prep = Prepared::new(batch, sigma)?;
    let n = batch.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<C64> = (0..n)
        .map(|_| {
            if batch.is_real {
                C64::new(StandardNormal.sample(&mut rng), 0.0)
            } else {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)) * s
            }
        })
        .collect();
    let m = batch.len();
    let mut warm = 0;
    if m >= opts.warm_threshold && opts.batch_size > 0 {
        let size = opts.batch_size.min(m);
        for _ in 0..opts.batch_iters {
            let mut idx = sample(&mut rng, m, size).into_vec();
            idx.sort_unstable();
            x = prep.step(&x, &idx);
            warm += 1;
        }
    }
    let all: Vec<usize> = (0..m).collect();
    let mut change = f64::INFINITY;
    let mut iteration = 0;
    let mut converged = false;
    while iteration < opts.max_iter {
        let next = prep.step(&x, &all);
        iteration += 1;
        change = match relative_error_slices(&x, &next) {
            Ok(v) => v,
            // A zero estimate: compare absolutely.
            Err(_) => next.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt(),
        };
        x = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(EmState {
        x_est: Signal::new(x, batch.is_real)?,
        iteration,
        warm_iterations: warm,
        last_rel_change: change,
        converged,
    })
}
