//! Simulation and certification toolkit for open quantum systems coupled to
//! Gaussian environments.
//!
//! The crate builds superoperator representations of system-environment
//! generators (unitary, Lindblad, and quasi-Lindblad), propagates reduced
//! system states, evaluates bath correlation functions in closed form, and
//! turns correlation-function distances into rigorous error bounds on the
//! reduced dynamics. A pseudomode fitting layer produces surrogate
//! environments together with machine-checkable error certificates.
//!
//! Conventions used throughout:
//! - vectorization is column-stacking: `vec(A X B) = (Bᵀ ⊗ A) vec(X)`;
//! - composite Hilbert spaces order the environment as the left (slow)
//!   Kronecker factor: `H = H_E ⊗ H_S`;
//! - all matrices are dense, double-precision complex.

// BLAS backend: referenced here so the link directive reaches every binary
// and test target even when no LAPACK routine is called directly.
use openblas_src as _;

pub mod bcf;
pub mod bounds;
#[cfg(test)]
pub(crate) mod fixtures;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod fock;
pub mod linalg;
pub mod models;
pub mod superop;
pub mod wick;

pub use error::CoreError;
