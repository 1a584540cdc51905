//! Signal estimation in multireference alignment from shift-invariant
//! features, with several bispectrum inversion algorithms and alignment
//! based baselines.

pub mod baselines;
pub mod direct;
pub mod em;
pub mod error;
pub mod experiment;
pub mod invariants;
pub mod io;
pub mod manifold;
pub mod observations;
pub mod pipeline;
pub mod sdp;
pub mod signal;

pub use error::{MraError, Result};
pub use num_complex::Complex64 as C64;
