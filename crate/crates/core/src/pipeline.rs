//! Frame → supervised matrix → split → normalization, the sequence every
//! training and evaluation path shares.

use crate::data::{
    build_exogenous_features, build_lag_features, chronological_split, normalize_apply,
    normalize_fit_apply, DataSplit, FeatureKind, NormParams, SplitFractions, SupervisedMatrix,
    TimeSeriesFrame,
};
use crate::error::Result;

/// A dataset ready for training: raw and normalized matrices over the same
/// rows, and the chronological split.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub raw: SupervisedMatrix,
    pub data: SupervisedMatrix,
    pub split: DataSplit,
}

pub fn build_features(frame: &TimeSeriesFrame, kind: FeatureKind) -> Result<SupervisedMatrix> {
    match kind {
        FeatureKind::Lags {
            n_lags,
            horizon_steps,
        } => build_lag_features(frame, n_lags, horizon_steps),
        FeatureKind::Exogenous => build_exogenous_features(frame),
    }
}

/// Builds features, splits chronologically and normalizes with parameters
/// fitted on the training rows only.
pub fn prepare(frame: &TimeSeriesFrame, kind: FeatureKind, fractions: SplitFractions) -> Result<PreparedData> {
    let raw = build_features(frame, kind)?;
    let split = chronological_split(raw.rows(), fractions)?;
    let data = normalize_fit_apply(&raw, split.train.clone())?;
    Ok(PreparedData { raw, data, split })
}

/// Builds features and normalizes them with a stored model's parameters;
/// without parameters the raw matrix is returned.
pub fn prepare_for_model(
    frame: &TimeSeriesFrame,
    kind: FeatureKind,
    norm: Option<&NormParams>,
) -> Result<SupervisedMatrix> {
    let raw = build_features(frame, kind)?;
    match norm {
        Some(params) => normalize_apply(&raw, params),
        None => Ok(raw),
    }
}
