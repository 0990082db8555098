//! Data pipeline for training step-by-step reasoners to self-improve.
//!
//! The pipeline turns a weak student's mistakes into supervision. For each
//! task instance the student produces an attempt; a feedback module locates
//! the earliest wrong step; an improvement module regenerates the attempt
//! from that step onward. The resulting interleaved trajectories are split
//! into improvement triplets and terminal pairs, filtered, rebalanced to a
//! target triplet proportion, and emitted as span-weighted training examples.
//! A simulated student closes the loop so the whole procedure can run
//! end-to-end at desk scale, deterministically.

pub mod arith_check;
pub mod arith_gold;
pub mod chain;
pub mod config;
pub mod driver;
pub mod editor;
pub mod emit;
pub mod error;
pub mod expr;
pub mod feedback;
pub mod improve;
pub mod lexicon;
pub mod metrics;
pub mod parse;
pub mod postprocess;
pub mod provider;
pub mod rng;
pub mod sort_check;
pub mod sort_gold;
pub mod step;
pub mod student;
pub mod task;

pub use error::{PipelineError, Result};
