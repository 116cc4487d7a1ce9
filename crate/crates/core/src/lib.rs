//! Answer span correction for extractive reading comprehension.
//!
//! A reader predicts an answer span; a corrector with the same architecture
//! sees the reader's span wrapped in delimiter tokens and predicts a new one.
//! The crate also covers the surrounding tooling: EM/F1 metrics, a taxonomy
//! of partial-match errors, corrector training-data generation, a paired
//! randomization test, analysis reports and a synthetic corpus with an
//! error-injecting reader simulator.

pub mod cli;
pub mod datagen;
pub mod error;
pub mod io;
pub mod model;
pub mod parallel;
pub mod pipeline;
pub mod reporting;
pub mod significance;
pub mod span;
pub mod synth;
pub mod taxonomy;

pub use error::{Error, Result};
