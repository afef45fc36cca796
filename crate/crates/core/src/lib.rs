//! Numerical laboratory for dispersive decay of Schrödinger evolutions with
//! small, possibly time-dependent potentials in three dimensions.
//!
//! The crate is organised leaf-first: closed-form free kernels, potentials
//! and their scale-invariant norms, oscillatory integrals with degenerate
//! phases, Born series kernels, and a spectral split-step propagator.

pub mod born;
pub mod error;
pub mod kernels;
pub mod mc;
pub mod norms;
pub mod oscillatory;
pub mod parallel;
pub mod potentials;
pub mod propagator;
pub mod quadrature;

pub use error::{Error, Result};
