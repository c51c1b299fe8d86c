//! Meta-forests: random forests trained under a meta-learning loop for
//! domain generalization.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`] holds multi-domain tabular datasets, CSV ingestion,
//!   sub-sampling and a synthetic domain-shift generator.
//! * [`tree`] and [`forest`] implement CART classification trees and
//!   bagged forests with per-tree seeds and restricted feature pools.
//! * [`mmd`] estimates the kernel maximum mean discrepancy between two
//!   sample sets.
//! * [`meta`] runs the meta-learning loop that produces a weighted
//!   ensemble of forests and handles model files.
//! * [`eval`] is the leave-one-domain-out benchmark harness.

pub mod data;
pub mod error;
pub mod eval;
pub mod forest;
pub mod meta;
pub mod mmd;
pub mod seed;
pub mod tree;

pub use error::{Error, Result};
