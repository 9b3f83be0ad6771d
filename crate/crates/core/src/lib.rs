//! Glass-box wind power forecasting.
//!
//! The central model is an additive predictor
//! `y = intercept + Σ f_i(x_i) + Σ f_ij(x_i, x_j)` whose one- and
//! two-dimensional terms are lookup tables learned by cyclic gradient
//! boosting of shallow regression trees over binned features. Every forecast
//! decomposes exactly into its term contributions.
//!
//! Module map:
//!
//! - [`data`]: CSV ingestion, lag / exogenous feature construction,
//!   min-max normalization, chronological splits, quantile binning, Pearson
//!   correlation.
//! - [`metrics`]: NRMSE, NMAE and R² plus the [`metrics::EvalReport`] bundle.
//! - [`trees`]: CART regression trees over binned features.
//! - [`glassbox`]: training, inference and breakdowns of the additive model.
//! - [`baselines`]: persistence, least-squares linear and regression-tree
//!   baselines.
//! - [`explain`]: global importances, shape exports, PDP, PFI and ranking
//!   agreement.
//! - [`persist`]: the versioned, checksummed model file.
//! - [`benchmark`]: the models × horizons evaluation grid.

pub mod baselines;
pub mod benchmark;
pub mod data;
pub mod error;
pub mod explain;
pub mod glassbox;
pub mod matrix;
pub mod metrics;
pub mod persist;
pub mod pipeline;
pub mod predictor;
pub mod trees;

pub use error::{Error, Result};
pub use glassbox::{GlassBoxModel, TrainConfig};
pub use matrix::Matrix;
pub use predictor::Predictor;
