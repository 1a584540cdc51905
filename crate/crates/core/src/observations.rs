//! Synthetic MRA data: `ξ_j = R_{r_j} x + ε_j`.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`). Observation
//! `j` is drawn from its own stream (`set_stream(j)`) of the generator
//! seeded with the batch seed, so any contiguous range of observations can
//! be produced independently of the others.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{MraError, Result};
use crate::signal::Signal;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBatch {
    pub observations: Vec<Vec<C64>>,
    pub n: usize,
    pub sigma: f64,
    pub is_real: bool,
    /// Kept only for the oracle baseline.
    pub true_shifts: Option<Vec<usize>>,
    pub seed: u64,
}

impl ObservationBatch {
    /// Wraps externally supplied observations.
    pub fn new(observations: Vec<Vec<C64>>, sigma: f64, is_real: bool) -> Result<Self> {
        let n = observations.first().map(|o| o.len()).ok_or(MraError::NoMeasurements)?;
        if let Some(bad) = observations.iter().find(|o| o.len() != n) {
            return Err(MraError::LengthMismatch { expected: n, got: bad.len() });
        }
        if !(sigma >= 0.0) {
            return Err(MraError::InvalidInput(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { observations, n, sigma, is_real, true_shifts: None, seed: 0 })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Draws observations of `x` on demand.
#[derive(Debug, Clone)]
pub struct ObservationSource {
    x: Vec<C64>,
    is_real: bool,
    sigma: f64,
    seed: u64,
}

impl ObservationSource {
    pub fn new(x: &Signal, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(MraError::InvalidInput(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { x: x.values().to_vec(), is_real: x.is_real(), sigma, seed })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Observation `j` and its shift.
    pub fn draw(&self, j: u64) -> (usize, Vec<C64>) {
        let n = self.x.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(j);
        let r = rng.gen_range(0..n);
        let mut out: Vec<C64> = (0..n).map(|i| self.x[(i + n - r) % n]).collect();
        if self.sigma > 0.0 {
            if self.is_real {
                for v in out.iter_mut() {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    v.re += self.sigma * e;
                }
            } else {
                let s = self.sigma * std::f64::consts::FRAC_1_SQRT_2;
                for v in out.iter_mut() {
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    *v += C64::new(s * a, s * b);
                }
            }
        }
        (r, out)
    }
}

pub fn generate_observations(x: &Signal, m: usize, sigma: f64, seed: u64) -> Result<ObservationBatch> {
    if m == 0 {
        return Err(MraError::InvalidInput("M must be >= 1".into()));
    }
    let src = ObservationSource::new(x, sigma, seed)?;
    let mut observations = Vec::with_capacity(m);
    let mut shifts = Vec::with_capacity(m);
    for j in 0..m {
        let (r, obs) = src.draw(j as u64);
        shifts.push(r);
        observations.push(obs);
    }
    Ok(ObservationBatch {
        observations,
        n: x.len(),
        sigma,
        is_real: x.is_real(),
        true_shifts: Some(shifts),
        seed,
    })
}
