//! Sample-based property tests, feature learners and risk bounds for
//! deciding when unsupervised representation learning provably helps a
//! downstream classifier.
//!
//! The crate is `no_std` and only needs `alloc`. All logarithms are natural.
//!
//! Layout:
//! - [`grid`]: the hypercube partition of `[0,1]^n` shared by both tests.
//! - [`cluster`]: cluster property test, one-hot feature map and its kernel.
//! - [`manifold`]: one-dimensional manifold test (cell-path DFS) and the
//!   arc-length feature map.
//! - [`learners`]: exact 0/1-loss linear ERM and 1-nearest-neighbour.
//! - [`bounds`]: closed-form bound primitives (alpha, finite class, VC lower
//!   bound, epsilon terms, beta, binomial inversion, SSL sample size).
//! - [`synth`]: synthetic worlds with exact support oracles.
//! - [`theorem`]: composition into risk and risk-gap reports, and bound-driven
//!   feature-learner selection.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod cluster;
mod error;
pub mod grid;
pub mod learners;
pub mod manifold;
mod math;
pub mod synth;
pub mod theorem;
pub mod union_find;

pub use error::{Error, Result};
pub use grid::{CellIndex, GridSpec, Point};
