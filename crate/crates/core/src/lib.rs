//! Online neural-network change-point detection.
//!
//! Two detectors are provided: [`detect::Onnc`], which trains a classifier to
//! tell a lagged mini-batch from the current one and scores the pair with a
//! log-odds (KL-style) dissimilarity, and [`detect::Onnr`], which trains two
//! density-ratio regressors and scores with a Pearson chi-squared estimate.
//! Both process the series once, in time order, with state bounded by the
//! network size plus `l / n + 1` raw scores.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! the benchmark harness live in the `nncpd` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod datagen;
pub mod detect;
mod error;
pub mod metrics;
pub mod nn;
pub mod series;

pub use detect::{DetectionResult, DetectorConfig, Onnc, Onnr, PeakParams, ScoreSeries};
pub use error::CpdError;
pub use metrics::EvalReport;
pub use nn::{Head, NeuralNet};
pub use series::{Annotation, Embedding, MiniBatch, TimeSeries};
