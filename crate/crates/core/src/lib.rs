//! Deterministic desk-scale simulator for synchronous distributed SGD under
//! practical data-access regimes, together with the verification machinery
//! needed to check its distributional behaviour exactly.
//!
//! The crate is organized around the lifecycle of one experiment:
//!
//! - [`data`] generates small synthetic datasets;
//! - [`objectives`] defines the three objective families (quadratic,
//!   L2-regularized logistic, tiny MLP) with per-sample losses and gradients;
//! - [`shuffling`] produces permutations via sufficient (Fisher-Yates) and
//!   insufficient (riffle, top-to-random) shuffles, with an exhaustive
//!   enumeration mode that computes exact permutation distributions;
//! - [`schedule`] turns a shuffler and a regime (global shuffle, local
//!   shuffle, i.i.d. sampling, without-replacement sampling) into the
//!   per-epoch, per-worker, per-iteration batch stream;
//! - [`engine`] executes the synchronous update over a stream and records a
//!   metrics trace against a reference optimum;
//! - [`analysis`] measures shuffling error, conditional-probability gaps,
//!   convergence-rate slopes, theoretical rate predictions, and speedups;
//! - [`verify`] bundles the exact checks into a self-contained battery.
//!
//! Everything is replayable: all randomness flows through [`rng`], and any
//! result is a pure function of its specification plus a 64-bit seed.

pub mod analysis;
pub mod data;
pub mod engine;
pub mod error;
pub mod objectives;
pub mod rng;
pub mod schedule;
pub mod shuffling;
pub mod verify;

pub use error::{Error, Result};
