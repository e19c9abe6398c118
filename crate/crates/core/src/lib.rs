// Parameter validation uses `!(x > 0.0)` so NaN is rejected along with
// non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Numerical laboratory for the power-law spectra of neural-tangent-kernel
//! evolution operators and the long-time training loss they generate.
//!
//! The pipeline: sample a data density ([`distributions`]), evaluate a kernel
//! family on it ([`kernels`]), diagonalize the discretized evolution operator
//! and simulate the linearized loss ([`spectral`]), expand an initial error
//! over the eigenbasis ([`targets`]), compare against closed-form exponent
//! and coefficient predictions ([`theory`]), and cross-check with actual
//! finite-width gradient-descent training ([`trainer`]).

pub mod distributions;
pub mod error;
pub mod kernels;
pub mod quad;
pub mod rng;
pub mod special;
pub mod spectral;
pub mod targets;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
