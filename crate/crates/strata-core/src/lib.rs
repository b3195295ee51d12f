//! Multi-task metric learning on structured labels.
//!
//! This crate trains a small fully connected network with two heads — a
//! classification head and an L2-normalized embedding head — against a
//! weighted sum of a softmax objective and a family of ranking losses
//! (triplet, quadruplet, and the general tuplet chain) whose margins are
//! derived from hierarchical class labels or shared-attribute overlap.
//! It also contains the matching tuplet samplers, a momentum SGD training
//! loop, retrieval metrics, synthetic dataset generators, and a
//! finite-difference gradient checker.
//!
//! Everything is deterministic: every source of randomness is an explicit
//! seed, and identical inputs produce bitwise-identical outputs. The crate
//! is `no_std` (with `alloc`) so the numeric core can be embedded anywhere;
//! file formats and the CLI live in the companion `strata` crate.

#![no_std]
#![deny(missing_docs)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod labelspace;
pub mod linalg;
pub mod losses;
pub mod net;
pub mod sampling;
pub mod trainer;

pub use error::{Error, Result};
