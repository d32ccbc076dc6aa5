#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Numerical engine for quantum-illumination target detection.
//!
//! The crate computes quantum Fisher information (QFI), signal-to-noise
//! ratios and error-probability bounds for coherent, generalized-coherent,
//! two-mode squeezed vacuum (TMSV) and photon-added/subtracted TMSV probes
//! sent against a thermal background. Every closed form in [`metrics`] has an
//! independent counterpart in [`oracle`], which works directly in a truncated
//! Fock space, and the Gaussian decision rule is checked by the Monte Carlo
//! simulator in [`detection`].
//!
//! Module map:
//!
//! - [`fock`]: truncated-Fock linear algebra (ladder operators, thermal
//!   states, tensor products, partial traces, beam-splitter generator).
//! - [`probe`]: probe-state constructors and series normalizations.
//! - [`metrics`]: closed-form figures of merit.
//! - [`oracle`]: SLD-based numerical QFI and classical Fisher information.
//! - [`detection`]: M-copy Gaussian decision simulator.
//! - [`sweep`] and [`cli`]: parameter grids, CSV/JSON output, command line.

pub mod cli;
pub mod detection;
pub mod error;
pub mod fock;
pub mod metrics;
pub mod oracle;
pub mod probe;
pub mod series;
pub mod sweep;

pub use error::{Error, Result};
pub use num_complex::Complex64;
