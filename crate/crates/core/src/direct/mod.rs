//! Initialization-free inverters of the bispectrum.

mod inversion;
mod irls;
mod lattice;
mod marching;
mod unwrap;

pub use inversion::direct_inversion;
pub use irls::{irls_l1, IrlsOptions, L1Fit};
pub use lattice::{lll_reduce, nearest_lattice_point, GramSchmidt, LatticeBasis};
pub use marching::frequency_marching;
pub use unwrap::{
    build_unwrap_system, l1_phase_fit, phase_unwrap, solve_integers, UnwrapOptions, UnwrapSystem,
};
