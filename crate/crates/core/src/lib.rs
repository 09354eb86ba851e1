//! Bias auditing for multi-layer speech embeddings.
//!
//! The crate computes embedding association effect sizes between two target
//! groups and two attribute (valence) poles, permutation p-values, bootstrap
//! standard errors at varying sample sizes, and trains a small valence
//! regression head to measure whether the same bias shows up downstream.
//! A synthetic data generator with straight-line oracles backs the test suite.

pub mod aggregation;
pub mod association;
pub mod audit;
pub mod bootstrap;
pub mod dataset;
pub mod error;
pub mod probe;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
