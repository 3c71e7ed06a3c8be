//! Credit-default modeling on monthly checking-account panels.
//!
//! The crate covers the whole pipeline: panel ingestion and splitting
//! ([`panel`]), a deterministic synthetic panel generator with planted
//! default mechanisms ([`synthgen`]), feature construction ([`features`]),
//! Gini classification trees ([`cart`]), random and balanced random forests
//! ([`ensemble`]), gradient-boosted trees ([`boost`]), logistic regression
//! with stepwise AIC and lasso selection ([`glm`]), and AUC-based evaluation
//! ([`eval`]).
//!
//! Data-parallel loops (tree fitting, per-row feature extraction, folds) run
//! on rayon when the `parallel` feature is enabled, which it is by default.
//! Every parallel path derives its per-task seed as `seed + ordinal`, so
//! results are identical with or without the feature.

pub mod boost;
pub mod cart;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod features;
pub mod glm;
pub mod panel;
pub mod par;
pub mod rng;
pub mod synthgen;

pub use error::{Error, Result};
pub use features::FeatureMatrix;
