//! Numerical laboratory for uncertainty relations between non-Hermitian
//! operators.
//!
//! - [`qmath`]: states, operators, variances, polar decomposition and the
//!   Gram matrix `T`.
//! - [`uncertainty`]: product, normalized and real-case relations.
//! - [`optics`]: Jones elements and the waveplate/beam-displacer trains.
//! - [`curves`]: closed-form `|T_ij|(θ0)` reference curves.
//! - [`interferometer`]: Sagnac fringe simulation and `|T_ij|` extraction.
//! - [`noise`]: Poisson counts, variance propagation, Monte-Carlo error bars.
//! - [`entanglement`]: Kraus channels, channel fidelity and the variance
//!   separability test.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curves;
pub mod entanglement;
pub mod error;
pub mod format;
pub mod interferometer;
pub mod noise;
pub mod optics;
pub mod qmath;
pub mod random;
pub mod uncertainty;

pub use error::{Error, Result};
pub use qmath::{OperatorMatrix, StateVector, TMagnitudes, TMatrix, C64};
