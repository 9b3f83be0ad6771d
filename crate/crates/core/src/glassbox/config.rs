use serde::{Deserialize, Serialize};

use crate::data::DEFAULT_MAX_BINS;
use crate::error::{Error, Result};

/// Which feature pairs receive interaction terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionBudget {
    /// Every pair when there are at most 12 features, else the 10 strongest.
    Auto,
    All,
    /// The `k` strongest pairs; `Top(0)` disables interactions.
    Top(usize),
}

impl InteractionBudget {
    pub const AUTO_ALL_PAIRS_MAX_FEATURES: usize = 12;
    pub const AUTO_TOP_K: usize = 10;

    /// Number of pairs to keep for `n_features` features.
    pub fn resolve(&self, n_features: usize) -> usize {
        let all = n_features * n_features.saturating_sub(1) / 2;
        match *self {
            InteractionBudget::All => all,
            InteractionBudget::Top(k) => k.min(all),
            InteractionBudget::Auto if n_features <= Self::AUTO_ALL_PAIRS_MAX_FEATURES => all,
            InteractionBudget::Auto => Self::AUTO_TOP_K.min(all),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Maximum full cycles over the terms, per stage.
    pub max_rounds: usize,
    /// Relative validation-NRMSE improvement that resets the patience counter.
    pub early_stop_tol: f64,
    /// Cycles without sufficient improvement before stopping; 0 disables
    /// early stopping.
    pub early_stop_patience: usize,
    pub min_samples_split: usize,
    pub main_depth: usize,
    pub pair_depth: usize,
    pub max_bins: usize,
    /// Coarse bins per axis for pair grids.
    pub pair_bins: usize,
    pub interactions: InteractionBudget,
    /// Outer bags averaged into the final model; 0 or 1 means no bagging.
    pub bagging_count: usize,
    /// Share of training rows drawn (without replacement) into each bag.
    pub bag_fraction: f64,
    pub seed: u64,
    /// Record training MSE after every boosting step.
    #[serde(default)]
    pub record_loss_trace: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            max_rounds: 5000,
            early_stop_tol: 1e-4,
            early_stop_patience: 50,
            min_samples_split: 5,
            main_depth: 2,
            pair_depth: 3,
            max_bins: DEFAULT_MAX_BINS,
            pair_bins: 32,
            interactions: InteractionBudget::Auto,
            bagging_count: 0,
            bag_fraction: 0.85,
            seed: 0,
            record_loss_trace: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::param("learning_rate must be in (0, 1]"));
        }
        if self.max_rounds == 0 {
            return Err(Error::param("max_rounds must be at least 1"));
        }
        if self.early_stop_tol.is_nan() || self.early_stop_tol < 0.0 {
            return Err(Error::param("early_stop_tol must be non-negative"));
        }
        if self.min_samples_split < 2 {
            return Err(Error::param("min_samples_split must be at least 2"));
        }
        if self.max_bins < 2 || self.pair_bins < 2 || self.max_bins > 65536 || self.pair_bins > 65536 {
            return Err(Error::param("max_bins and pair_bins must be at least 2"));
        }
        if self.bagging_count > 1 && !(self.bag_fraction > 0.0 && self.bag_fraction <= 1.0) {
            return Err(Error::param("bag_fraction must be in (0, 1]"));
        }
        Ok(())
    }

    pub fn without_interactions(mut self) -> Self {
        self.interactions = InteractionBudget::Top(0);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_budget() {
        assert_eq!(InteractionBudget::Auto.resolve(4), 6);
        assert_eq!(InteractionBudget::Auto.resolve(12), 66);
        assert_eq!(InteractionBudget::Auto.resolve(48), 10);
        assert_eq!(InteractionBudget::Top(3).resolve(2), 1);
        assert_eq!(InteractionBudget::All.resolve(1), 0);
    }

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
