//! Identification of linear time-varying channels with bandlimited spreading
//! functions from their response to a periodically weighted delta train.
//!
//! The crate works in a fully discrete model where every infinite sum of the
//! continuum theory becomes a finite one:
//!
//! - [`gabor`]: finite Gabor matrices, spark, window generation.
//! - [`support`]: support geometry, identifiability, occupancy classes.
//! - [`channel`]: the forward model, Zak transform, the per-point linear system.
//! - [`reconstruct`]: left inverses and the explicit reconstruction formulas.
//! - [`sparse`]: unknown-support recovery by joint-sparse pursuit.
//! - [`rates`]: sampling-rate diagnostics.

pub mod channel;
pub mod error;
pub mod gabor;
pub mod io;
pub mod linalg;
pub mod par;
pub mod rates;
pub mod reconstruct;
pub mod sparse;
pub mod support;

pub use error::{Error, Result};
pub use num_complex::Complex64;
