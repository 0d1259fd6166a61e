//! Benchmark engine for supervised and unsupervised time-series anomaly
//! detection.
//!
//! The crate is organised bottom-up:
//!
//! - [`ndcore`]: dense f64 matrices, activation functions and a portable RNG.
//! - [`data`]: datasets, CSV ingestion, normalisation, windowing, the
//!   labeled-prefix split and a synthetic anomaly generator.
//! - [`stand`]: the STAND detector (embedding MLP, bidirectional LSTM,
//!   pointwise scorer) with an analytic backward pass and optimizers.
//! - [`baselines`]: random, PCA, KNN, KMeans and logistic-regression detectors.
//! - [`metrics`]: CCE, F1, Aff-F1, UAff-F1, AUC-ROC and VUS-PR.
//! - [`bench`]: config-driven experiment harness, sweeps and report emission.
//!
//! With the default `parallel` feature, batch work (window batches, KNN
//! queries, Monte-Carlo baselines, harness cells) runs on rayon. Every
//! parallel path collects results in input order, so outputs are bitwise
//! identical to the sequential build.

pub mod baselines;
pub mod bench;
pub mod data;
pub mod error;
pub mod metrics;
pub mod ndcore;
pub mod par;
pub mod stand;

pub use error::{Error, Result};
