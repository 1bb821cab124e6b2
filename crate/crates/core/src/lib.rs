//! Deterministic simulation of anomalous (non-linear) branching dynamics
//! and outcome counting over the resulting sub-branches.
//!
//! The crate is organised bottom-up:
//!
//! - [`measure`]: split parameters, log-domain measures, branch times, counts.
//! - [`engine`]: the exact labeled-sub-branch engine, the aggregated class
//!   engine, and the literal state-vector form of the branching rule.
//! - [`stats`]: mean sub-branch measure, the stationary density, envelopes,
//!   decay fits and rational-ratio bin dynamics.
//! - [`scenarios`]: scenario constructors and closed-form regime calculators.

pub mod engine;
mod error;
pub mod measure;
pub mod scenarios;
pub mod stats;

pub use error::{Error, Result};
