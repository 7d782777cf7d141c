//! Sub-Nyquist wideband spectrum sensing toolkit.
//!
//! The crate covers the full pipeline for detecting occupied frequency bands
//! from aliased low-rate captures `Y = A X + noise`:
//!
//! - [`signal`]: synthetic sparse spectra, flat-fading channels, calibrated
//!   noise and seeded sub-Nyquist capture
//! - [`dataset`]: reproducible dataset generation and file persistence
//! - [`omp`]: orthogonal matching pursuit with known-sparsity and calibrated
//!   residual-threshold stopping
//! - [`preprocess`]: LU-based pseudo-inverse recovery feeding the classifier
//! - [`nn`]: a from-scratch 1-D CNN occupancy classifier with training
//! - [`quant`]: fixed-point word-length emulation of inference
//! - [`tiling`]: memory-tiled convolution with footprint and DDR-traffic
//!   cost models
//! - [`metrics`], [`complexity`], [`bench`]: detection metrics, operation
//!   counting and the end-to-end benchmark harness
//!
//! See the crate examples for one runnable entry point per capability; the
//! `snsense` binary exposes the same flows as CLI subcommands.

pub mod bench;
pub mod complexity;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod omp;
pub mod preprocess;
pub mod quant;
pub mod signal;
pub mod tiling;

pub use error::{Error, Result};
