//! Shared fixtures for the benchmarks.

use mra_core::observations::{generate_observations, ObservationBatch};
use mra_core::signal::Signal;

/// The standard 41-sample window used across the sweeps.
pub fn window() -> Signal {
    Signal::window(41, 21, 1.0).expect("valid window")
}

pub fn batch(m: usize, sigma: f64, seed: u64) -> ObservationBatch {
    generate_observations(&window(), m, sigma, seed).expect("valid batch")
}
