//! Multi-representation, multi-scale convolutional classifiers for univariate
//! time series, together with the evaluation machinery used to compare them
//! across many datasets.
//!
//! The crate is `no_std` and only needs an allocator. Everything here is a
//! pure function of its inputs (plus an explicit seed where randomness is
//! involved); file formats, the benchmark journal and the command-line tool
//! live in the `multirep` companion crate.
//!
//! Modules:
//!
//! * [`representations`]: the eight series transforms and channel stacking.
//! * [`kernels`]: a small reverse-mode differentiation tape with exactly the
//!   layers the two networks need, plus Adam.
//! * [`models`]: MRMS-Net and the lightweight LMRMS-Net with early exit.
//! * [`data`]: datasets, stratified Monte-Carlo resampling, synthetic data.
//! * [`training`]: the training loop with train-loss early stopping.
//! * [`metrics`]: per-resample metrics and two-stage macro aggregation.
//! * [`stats`]: Friedman / Nemenyi ranking analysis and Pareto frontiers.

#![no_std]

extern crate alloc;

pub mod data;
mod error;
pub mod kernels;
mod math;
pub mod metrics;
pub mod models;
pub mod representations;
pub mod stats;
pub mod training;

pub use error::{Error, Result};
