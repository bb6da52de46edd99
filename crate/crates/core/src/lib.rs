//! Multicalibration toolkit.
//!
//! The crate is organised around the post-processing loop in [`mcgrad`]: a base
//! predictor's scores are appended to the feature matrix, a Newton-boosted tree
//! ensemble ([`gbdt`]) corrects the logits, the result is rescaled, and the loop
//! repeats while a held-out log loss keeps improving.
//!
//! [`metrics`] measures calibration (ECCE, the sigma-scaled ECCE) and
//! multicalibration (MCE over a set of possibly overlapping groups).
//! [`calibrators`] holds the baselines: a logistic base model, Platt scaling,
//! isotonic regression, HKRR bucket patching and a depth-2 boosted corrector.
//! [`bench`] generates synthetic data with known miscalibration and runs
//! method comparisons and ablations.

pub mod bench;
pub mod calibrators;
pub mod dataset;
pub mod error;
pub mod gbdt;
pub mod groups;
pub mod math;
pub mod mcgrad;
pub mod metrics;

pub use error::{Error, Result};
