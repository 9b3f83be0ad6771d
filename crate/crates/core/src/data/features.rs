use serde::{Deserialize, Serialize};

use super::frame::TimeSeriesFrame;
use super::normalize::NormParams;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// How the feature columns of a [`SupervisedMatrix`] were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FeatureKind {
    /// Columns are `y(t-n_lags+1) … y(t)`; the target is `y(t+horizon_steps)`.
    Lags { n_lags: usize, horizon_steps: usize },
    /// Columns are exogenous (NWP) values aligned with the same-row target.
    Exogenous,
}

impl FeatureKind {
    /// Column holding the most recent observed target, if any.
    pub fn latest_lag_column(&self) -> Option<usize> {
        match *self {
            FeatureKind::Lags { n_lags, .. } => Some(n_lags - 1),
            FeatureKind::Exogenous => None,
        }
    }
}

/// Feature matrix and targets for supervised training.
///
/// Built un-normalized by the feature constructors; [`super::normalize_fit_apply`]
/// returns the normalized copy with `norm` populated.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedMatrix {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    /// Timestamp of each row's target.
    pub timestamps: Vec<i64>,
    pub kind: FeatureKind,
    pub norm: Option<NormParams>,
}

impl SupervisedMatrix {
    pub fn new(
        x: Matrix,
        y: Vec<f64>,
        feature_names: Vec<String>,
        timestamps: Vec<i64>,
        kind: FeatureKind,
    ) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::LengthMismatch {
                expected: x.rows(),
                got: y.len(),
            });
        }
        if timestamps.len() != y.len() {
            return Err(Error::LengthMismatch {
                expected: y.len(),
                got: timestamps.len(),
            });
        }
        if feature_names.len() != x.cols() {
            return Err(Error::LengthMismatch {
                expected: x.cols(),
                got: feature_names.len(),
            });
        }
        if x.cols() == 0 {
            return Err(Error::Empty("feature columns"));
        }
        if x.rows() == 0 {
            return Err(Error::Empty("rows"));
        }
        let mut sorted = feature_names.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("feature names must be unique"));
        }
        Ok(Self {
            x,
            y,
            feature_names,
            timestamps,
            kind,
            norm: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownFeature {
                name: name.to_string(),
                valid: self.feature_names.clone(),
            })
    }
}

/// Name of the lag column `k` steps before the newest observation
/// (`lag1` is the most recent).
pub fn lag_name(k: usize) -> String {
    format!("lag{k}")
}

/// Sliding-window lag features over the target series.
pub fn build_lag_features(
    frame: &TimeSeriesFrame,
    n_lags: usize,
    horizon_steps: usize,
) -> Result<SupervisedMatrix> {
    if n_lags == 0 {
        return Err(Error::param("n_lags must be at least 1"));
    }
    if horizon_steps == 0 {
        return Err(Error::param("horizon_steps must be at least 1"));
    }
    let len = frame.len();
    let needed = n_lags + horizon_steps;
    if len < needed {
        return Err(Error::InsufficientLength { needed, got: len });
    }
    let rows = len - n_lags - horizon_steps + 1;
    let series = &frame.target;
    let mut data = Vec::with_capacity(rows * n_lags);
    let mut y = Vec::with_capacity(rows);
    let mut timestamps = Vec::with_capacity(rows);
    for r in 0..rows {
        let t = r + n_lags - 1;
        data.extend_from_slice(&series[t + 1 - n_lags..=t]);
        y.push(series[t + horizon_steps]);
        timestamps.push(frame.timestamps[t + horizon_steps]);
    }
    let names = (1..=n_lags).rev().map(lag_name).collect();
    SupervisedMatrix::new(
        Matrix::new(rows, n_lags, data)?,
        y,
        names,
        timestamps,
        FeatureKind::Lags {
            n_lags,
            horizon_steps,
        },
    )
}

/// Exogenous columns as features for the same-row target.
pub fn build_exogenous_features(frame: &TimeSeriesFrame) -> Result<SupervisedMatrix> {
    if frame.exogenous.is_empty() {
        return Err(Error::NoExogenousColumns);
    }
    let columns: Vec<&[f64]> = frame.exogenous.iter().map(|(_, c)| c.as_slice()).collect();
    SupervisedMatrix::new(
        Matrix::from_columns(&columns)?,
        frame.target.clone(),
        frame.exogenous_names(),
        frame.timestamps.clone(),
        FeatureKind::Exogenous,
    )
}
