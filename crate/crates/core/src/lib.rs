//! Simulation and verification laboratory for self-repelling elastic
//! manifolds: a discrete Gaussian free field u: [-N,N]^d -> R^D penalized by
//! the squared local time of its range, sampled by Markov chain Monte Carlo
//! and checked against the model's exactly computable quantities.
//!
//! The numerical core is generic over the floating-point type via
//! [`scalar::Scalar`]; the aliases at the crate root fix f64, which is what
//! the CLI and the verification suite use.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod gff;
pub mod harness;
pub mod lattice;
pub mod localtime;
pub mod mcmc;
pub mod observables;
pub mod scalar;
pub mod seeds;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use lattice::LatticeShape;
pub use scalar::Scalar;

/// f64 instantiations used by the CLI and most tests.
pub type Spectrum1D64 = spectral::Spectrum1D<f64>;
pub type Params64 = gff::ModelParams<f64>;
pub type Coefficients64 = gff::SpectralCoefficients<f64>;
pub type Field64 = gff::FieldConfiguration<f64>;
