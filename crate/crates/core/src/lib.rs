//! Adversarially robust low-dimensional representations.
//!
//! This crate implements low-rank approximation under `q -> 2` operator-norm
//! ("robustness") constraints via convex relaxations with approximate
//! separation oracles, together with the downstream machinery built on top of
//! it: certify-or-solve algorithms under training-time data poisoning, robust
//! mean estimation, robust Lloyd-style clustering, and detection/recovery in
//! the spiked covariance model.
//!
//! Module map:
//! - [`matcore`]: matrices, orthonormal bases, projections, subspace distance
//! - [`opnorms`]: operator-norm estimation, brute-force oracles, separation
//! - [`sdpsolve`]: the convex-relaxation engine (production + reference)
//! - [`lowrank`]: rounding and the public worst-case approximation algorithms
//! - [`poisoning`]: corruption models, shrinkage, certify-or-solve
//! - [`meanest`]: robust mean estimation
//! - [`cluster`]: robust Lloyd clustering of spectrally stable instances
//! - [`spiked`]: spiked covariance sampling, detection and recovery

pub mod cluster;
pub mod error;
pub mod lowrank;
pub mod matcore;
pub mod meanest;
pub mod opnorms;
pub mod poisoning;
pub mod rng;
pub mod sdpsolve;
pub mod spiked;

pub use error::Error;
pub use matcore::{DataMatrix, Exponent, Projection, RobustnessBudget};
pub use poisoning::CertifyOutcome;
pub use sdpsolve::{PsdSolution, SolveParams};

/// Crate-wide `Result` with the shared error type.
pub type Result<T> = std::result::Result<T, Error>;
