//! Toolkit for designing GPU-efficient convolutional networks.
//!
//! - [`structure`]: the MasterNet structural space (XX / BL / DW blocks),
//!   canonical JSON documents, validation and layer expansion.
//! - [`cost`]: FLOPs and parameter accounting, trimmed-mean timing
//!   aggregation, and a benchmark-table latency model.
//! - [`rank`]: singular-value spectra of reshaped convolution kernels.
//! - [`nas`]: local-linear-regression search: trial planning,
//!   pseudo-gradient fitting, prediction and budgeted selection.
//! - [`cli`]: the `genet` command-line front end.
//!
//! The runnable programs under `examples/` walk through each capability.

pub mod cli;
pub mod cost;
pub mod linalg;
pub mod nas;
pub mod rank;
pub mod rng;
pub mod structure;
