//! Knowledge-data learning: granular knowledge landmarks built from
//! full-domain physics samples regularize a small neural model trained on
//! localized data.

// Negated comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod benchgen;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod granulation;
pub mod landmarks;
pub mod network;
pub mod objective;
pub mod seeds;
pub mod training;

pub use error::{Error, Result};
