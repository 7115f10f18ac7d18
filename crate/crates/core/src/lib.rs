//! Deterministic, seedable simulator of a dynamic pricing competition.
//!
//! The crate is organised bottom-up:
//!
//! - [`rng`] and [`stats`]: reproducible streams and numerical primitives;
//! - [`market`]: the ground-truth demand mechanism;
//! - [`engine`]: competitions, simulations, tournaments and scoring;
//! - [`strategies`]: the eight competing pricing algorithms;
//! - [`config`], [`persist`], [`report`] and [`pipeline`]: the run pipeline
//!   behind the `dpsim` binary.

// Numeric kernels index several parallel arrays by the same position.
#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod engine;
pub mod market;
pub mod persist;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod stats;
pub mod strategies;
