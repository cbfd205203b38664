//! Optimal-precision bounds, probe-schedule synthesis and verification
//! simulators for photonic sensor networks that estimate a linear function
//! `q = α·θ` of local phase shifts or quadrature displacements.
//!
//! Module map:
//! - [`math`]: exact rationals, coefficient vectors, QFI matrices.
//! - [`bounds`]: closed-form MSE bounds, the dual vector β*, allocations.
//! - [`fock`]: fixed-photon-number state simulation and QFI.
//! - [`design`]: ω-set enumeration and the exact integer schedule search.
//! - [`gaussian`]: covariance-matrix simulation of displacement sensing.
//! - [`estimation`]: robust phase estimation and Monte-Carlo studies.
//!
//! Monte-Carlo loops run on rayon when the `parallel` feature is enabled
//! (the default) and sequentially otherwise; results are bit-identical.

pub mod bounds;
pub mod design;
pub mod error;
pub mod estimation;
pub mod fock;
pub mod gaussian;
pub mod math;
pub mod par;
pub mod stats;

pub use error::{Error, Result};
pub use math::{CoefficientVector, QfiMatrix, Rational};
