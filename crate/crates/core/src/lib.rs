//! Endpoint work quasistatistics for shortcuts to adiabaticity.
//!
//! The crate propagates driven quantum systems, pulls the final reference
//! Hamiltonian back to the initial frame and compares two-point-measurement
//! statistics with their coherence-retaining counterparts: first moments,
//! characteristic functions and Kirkwood–Dirac quasiprobabilities. Two
//! benchmarks are provided, a parametric oscillator and a driven qubit.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod oscillator;
pub mod perturbation;
pub mod protocols;
pub mod quantum_core;
pub mod quasiprob;
pub mod qubit;

pub use error::{Error, Result};
pub use protocols::{ErrorKind, ErrorModel, ProtocolSpec, System};
pub use quantum_core::{DensityMatrix, HermitianOperator, SpectralDecomposition, UnitaryMatrix};
pub use quasiprob::{EndpointReport, KdMatrix};
