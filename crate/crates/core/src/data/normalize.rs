use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::features::{FeatureKind, SupervisedMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Min-max scaling parameters for one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut it = values.into_iter();
        let first = it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Some(Self { min, max })
    }

    pub fn is_constant(&self) -> bool {
        self.max <= self.min
    }

    /// Scales into `[0, 1]`, clamping out-of-range values. Constant columns
    /// map to 0.5.
    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        if self.is_constant() {
            0.5
        } else {
            ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        }
    }

    #[inline]
    pub fn invert(&self, u: f64) -> f64 {
        if self.is_constant() {
            self.min
        } else {
            self.min + u * (self.max - self.min)
        }
    }
}

/// Per-column scaling for features and target, fitted on a training range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub features: Vec<MinMax>,
    pub target: MinMax,
}

impl NormParams {
    /// Fits on `fit_range` rows. Lag matrices share one scale across all lag
    /// columns and the target, since they are the same series.
    pub fn fit(matrix: &SupervisedMatrix, fit_range: Range<usize>) -> Result<Self> {
        if fit_range.is_empty() || fit_range.end > matrix.rows() {
            return Err(Error::Empty("normalization fit range"));
        }
        let target = MinMax::fit(matrix.y[fit_range.clone()].iter().copied())
            .ok_or(Error::Empty("normalization fit range"))?;
        match matrix.kind {
            FeatureKind::Lags { .. } => {
                let all = fit_range
                    .clone()
                    .flat_map(|i| matrix.x.row(i).iter().copied())
                    .chain(matrix.y[fit_range].iter().copied());
                let shared = MinMax::fit(all).ok_or(Error::Empty("normalization fit range"))?;
                Ok(Self {
                    features: vec![shared; matrix.n_features()],
                    target: shared,
                })
            }
            FeatureKind::Exogenous => {
                let features = (0..matrix.n_features())
                    .map(|j| {
                        MinMax::fit(fit_range.clone().map(|i| matrix.x.get(i, j)))
                            .ok_or(Error::Empty("normalization fit range"))
                    })
                    .collect::<Result<_>>()?;
                Ok(Self { features, target })
            }
        }
    }

    pub fn apply_features(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.features.len() {
            return Err(Error::DimensionMismatch {
                expected: self.features.len(),
                got: x.cols(),
            });
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (v, mm) in out.row_mut(i).iter_mut().zip(&self.features) {
                *v = mm.apply(*v);
            }
        }
        Ok(out)
    }

    pub fn apply_target(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&v| self.target.apply(v)).collect()
    }

    pub fn invert_target(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&v| self.target.invert(v)).collect()
    }
}

/// Applies already-fitted parameters to a raw matrix.
pub fn normalize_apply(matrix: &SupervisedMatrix, params: &NormParams) -> Result<SupervisedMatrix> {
    let mut out = matrix.clone();
    out.x = params.apply_features(&matrix.x)?;
    out.y = params.apply_target(&matrix.y);
    out.norm = Some(params.clone());
    Ok(out)
}

/// Fits min-max parameters on `fit_range` and applies them to every row.
pub fn normalize_fit_apply(
    matrix: &SupervisedMatrix,
    fit_range: Range<usize>,
) -> Result<SupervisedMatrix> {
    let params = NormParams::fit(matrix, fit_range)?;
    normalize_apply(matrix, &params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exo(columns: Vec<Vec<f64>>, y: Vec<f64>) -> SupervisedMatrix {
        let names = (0..columns.len()).map(|j| format!("f{j}")).collect();
        let ts = (0..y.len() as i64).collect();
        SupervisedMatrix::new(Matrix::from_columns(&columns).unwrap(), y, names, ts, FeatureKind::Exogenous)
            .unwrap()
    }

    #[test]
    fn direct_formula() {
        let m = exo(vec![vec![0.0, 5.0, 10.0]], vec![1.0, 2.0, 3.0]);
        let n = normalize_fit_apply(&m, 0..3).unwrap();
        assert_eq!(n.x.column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(n.y, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_half() {
        let m = exo(vec![vec![3.0, 3.0, 3.0]], vec![1.0, 2.0, 3.0]);
        let n = normalize_fit_apply(&m, 0..3).unwrap();
        assert_eq!(n.x.column(0), vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn out_of_range_clamps() {
        let m = exo(vec![vec![0.0, 10.0, 12.0, -1.0]], vec![0.0, 1.0, 2.0, 3.0]);
        let n = normalize_fit_apply(&m, 0..2).unwrap();
        assert_eq!(n.x.get(2, 0), 1.0);
        assert_eq!(n.x.get(3, 0), 0.0);
    }

    #[test]
    fn empty_fit_range() {
        let m = exo(vec![vec![0.0, 1.0]], vec![0.0, 1.0]);
        assert!(normalize_fit_apply(&m, 0..0).is_err());
    }

    #[test]
    fn lags_share_one_scale() {
        let ts = (0..6).collect();
        let frame =
            super::super::TimeSeriesFrame::new(ts, "y", vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0], vec![]).unwrap();
        let m = super::super::build_lag_features(&frame, 2, 1).unwrap();
        let n = normalize_fit_apply(&m, 0..4).unwrap();
        let p = n.norm.as_ref().unwrap();
        assert_eq!(p.features[0], p.target);
        assert_eq!(p.target, MinMax { min: 0.0, max: 10.0 });
        // latest lag and target stay on the same scale
        assert_eq!(n.x.get(1, 1), 0.4);
    }

    proptest! {
        #[test]
        fn refitting_normalized_data_is_identity(
            a in proptest::collection::vec(-100.0f64..100.0, 12),
            b in proptest::collection::vec(-1.0f64..1.0, 12),
            y in proptest::collection::vec(0.0f64..50.0, 12),
        ) {
            let m = exo(vec![a, b], y);
            let once = normalize_fit_apply(&m, 0..9).unwrap();
            let twice = normalize_fit_apply(&once, 0..9).unwrap();
            prop_assert_eq!(once.x, twice.x);
            prop_assert_eq!(once.y, twice.y);
        }
    }
}
