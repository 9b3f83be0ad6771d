//! The additive glass-box forecaster.
//!
//! A model is `intercept + Σ f_i(x_i) + Σ f_ij(x_i, x_j)` where each `f_i` is
//! a lookup table over the feature's quantile bins and each `f_ij` a table
//! over a coarse grid of the pair's bins. Training is cyclic gradient
//! boosting: every cycle visits each term in order, fits a shallow
//! squared-error tree restricted to that term's feature(s) on the current
//! residuals, and adds a learning-rate-scaled copy of the tree's bin table.
//! Main effects are boosted to convergence first; pair terms are then boosted
//! on what is left.

mod config;
mod interactions;
mod model;
mod train;

pub use config::{InteractionBudget, TrainConfig};
pub use interactions::{rank_interaction_pairs, PairStrength};
pub use model::{
    Breakdown, GlassBoxModel, PairShapeFunction, ShapeFunction, TermId, TrainingSummary,
};
pub use train::{train_interactions, train_main_effects, MainEffectsFit};
