//! The paper's glass-box reference models: persistence, ordinary least
//! squares and a CART regression tree.

use std::ops::Range;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{apply_bins, fit_bins, BinningMap, FeatureKind, NormParams, SupervisedMatrix, DEFAULT_MAX_BINS};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::predictor::Predictor;
use crate::trees::{fit_cart, RegressionTree, TreeParams};

/// `y = intercept + Σ weights_i x_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub feature_names: Vec<String>,
    pub normalization: Option<NormParams>,
    /// The design was rank deficient and the minimum-norm solution was used.
    pub rank_deficient: bool,
}

impl Predictor for LinearModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }
}

fn check_range(data: &SupervisedMatrix, range: &Range<usize>) -> Result<()> {
    if range.is_empty() {
        return Err(Error::Empty("training range"));
    }
    if range.end > data.rows() {
        return Err(Error::InsufficientLength {
            needed: range.end,
            got: data.rows(),
        });
    }
    Ok(())
}

/// Least squares on the rows in `train`. Columns and target are centered so
/// the intercept is exact and, on rank deficiency, only the weights take the
/// minimum norm.
pub fn fit_ols(data: &SupervisedMatrix, train: Range<usize>) -> Result<LinearModel> {
    check_range(data, &train)?;
    let n = train.len();
    let p = data.n_features();
    let means: Vec<f64> = (0..p)
        .map(|j| train.clone().map(|r| data.x.get(r, j)).sum::<f64>() / n as f64)
        .collect();
    let y_mean = data.y[train.clone()].iter().sum::<f64>() / n as f64;
    let x = DMatrix::from_fn(n, p, |r, j| data.x.get(train.start + r, j) - means[j]);
    let y = DVector::from_fn(n, |r, _| data.y[train.start + r] - y_mean);

    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = f64::EPSILON * (n.max(p) as f64) * scale.max(f64::MIN_POSITIVE);
    let mut rank_deficient = n < p;
    let mut weights = None;
    if !rank_deficient && p > 0 {
        let qr = x.clone().qr();
        let r = qr.r();
        let r_max = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if (0..p).all(|i| r[(i, i)].abs() > tol.max(r_max * f64::EPSILON * n as f64)) {
            let qty = qr.q().transpose() * &y;
            weights = r.solve_upper_triangular(&qty.rows(0, p).into_owned());
        }
        rank_deficient = weights.is_none();
    }
    let weights = match weights {
        Some(w) => w,
        None if p == 0 => DVector::zeros(0),
        None => {
            let svd = x.svd(true, true);
            let s_max = svd.singular_values.max();
            let eps = (s_max * f64::EPSILON * n.max(p) as f64).max(f64::MIN_POSITIVE);
            svd.solve(&y, eps).map_err(|e| Error::param(format!("least squares failed: {e}")))?
        }
    };
    if rank_deficient {
        warn!("rank-deficient design; using the minimum-norm least-squares solution");
    }
    let weights: Vec<f64> = weights.iter().copied().collect();
    let intercept = y_mean - weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>();
    if !intercept.is_finite() || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::param("least squares produced non-finite weights"));
    }
    Ok(LinearModel {
        intercept,
        weights,
        feature_names: data.feature_names.clone(),
        normalization: data.norm.clone(),
        rank_deficient,
    })
}

pub fn predict_lr(model: &LinearModel, x: &Matrix) -> Result<Vec<f64>> {
    model.predict(x)
}

/// Forecast = most recent observed target. Stateless apart from knowing
/// which column holds that value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceModel {
    pub feature_names: Vec<String>,
    pub latest_lag: usize,
    pub horizon_steps: usize,
    pub normalization: Option<NormParams>,
}

impl PersistenceModel {
    pub fn for_matrix(data: &SupervisedMatrix) -> Result<Self> {
        let latest_lag = data.kind.latest_lag_column().ok_or(Error::PersistenceUndefined)?;
        let horizon_steps = match data.kind {
            FeatureKind::Lags { horizon_steps, .. } => horizon_steps,
            FeatureKind::Exogenous => unreachable!("exogenous matrices have no lag column"),
        };
        Ok(Self {
            feature_names: data.feature_names.clone(),
            latest_lag,
            horizon_steps,
            normalization: data.norm.clone(),
        })
    }
}

impl Predictor for PersistenceModel {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        row[self.latest_lag]
    }
}

/// Persistence forecasts for every row of a lag matrix.
pub fn persistence_forecast(data: &SupervisedMatrix) -> Result<Vec<f64>> {
    let model = PersistenceModel::for_matrix(data)?;
    Ok(data.x.iter_rows().map(|r| model.predict_row(r)).collect())
}

/// Regression tree on quantile-binned features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeBaseline {
    pub tree: RegressionTree,
    pub bins: BinningMap,
    pub feature_names: Vec<String>,
    pub normalization: Option<NormParams>,
}

impl Predictor for TreeBaseline {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        self.tree.predict_with(|f| self.bins.features[f].bin_of(row[f]))
    }
}

/// CART baseline; `params` defaults to [`TreeParams::rt_baseline`].
pub fn fit_rt_baseline(
    data: &SupervisedMatrix,
    train: Range<usize>,
    params: Option<TreeParams>,
) -> Result<TreeBaseline> {
    check_range(data, &train)?;
    let params = params.unwrap_or_else(TreeParams::rt_baseline);
    let bins = fit_bins(&data.x, train.clone(), DEFAULT_MAX_BINS)?;
    let binned = apply_bins(&bins, &data.x.slice_rows(train.clone()))?;
    let tree = fit_cart(&binned, &data.y[train], &params)?;
    Ok(TreeBaseline {
        tree,
        bins,
        feature_names: data.feature_names.clone(),
        normalization: data.norm.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(rows: &[Vec<f64>], y: Vec<f64>, kind: FeatureKind) -> SupervisedMatrix {
        let names = (0..rows[0].len()).map(|j| format!("x{j}")).collect();
        let ts = (0..y.len() as i64).collect();
        SupervisedMatrix::new(Matrix::from_rows(rows).unwrap(), y, names, ts, kind).unwrap()
    }

    #[test]
    fn exact_line_is_recovered() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0]).collect();
        let y = rows.iter().map(|r| 2.0 * r[0] + 0.1).collect();
        let m = fit_ols(&matrix(&rows, y, FeatureKind::Exogenous), 0..20).unwrap();
        assert!((m.weights[0] - 2.0).abs() < 1e-10);
        assert!((m.intercept - 0.1).abs() < 1e-10);
        assert!(!m.rank_deficient);
    }

    #[test]
    fn constant_target_gives_zero_weights() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let m = fit_ols(&matrix(&rows, vec![0.3; 10], FeatureKind::Exogenous), 0..10).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-12));
        assert!((m.intercept - 0.3).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_uses_minimum_norm() {
        let rows: Vec<Vec<f64>> = (0..15).map(|i| vec![i as f64 * 0.1, i as f64 * 0.1]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] + 1.0).collect();
        let data = matrix(&rows, y.clone(), FeatureKind::Exogenous);
        let m = fit_ols(&data, 0..15).unwrap();
        assert!(m.rank_deficient);
        // minimum norm splits the weight evenly between identical columns
        assert!((m.weights[0] - 1.5).abs() < 1e-9 && (m.weights[1] - 1.5).abs() < 1e-9);
        let pred = predict_lr(&m, &data.x).unwrap();
        for (p, t) in pred.iter().zip(&y) {
            assert!((p - t).abs() < 1e-9);
        }
    }

    #[test]
    fn hand_weights_match_dot_products() {
        let m = LinearModel {
            intercept: 0.5,
            weights: vec![1.0, -2.0],
            feature_names: vec!["a".into(), "b".into()],
            normalization: None,
            rank_deficient: false,
        };
        let x = Matrix::from_rows(&[[1.0, 1.0], [0.0, 0.25], [2.0, 0.0]]).unwrap();
        assert_eq!(predict_lr(&m, &x).unwrap(), vec![-0.5, 0.0, 2.5]);
    }

    #[test]
    fn persistence_takes_latest_lag() {
        let kind = FeatureKind::Lags {
            n_lags: 2,
            horizon_steps: 1,
        };
        let data = matrix(&[vec![0.1, 0.7], vec![0.7, 0.2]], vec![0.0, 0.0], kind);
        assert_eq!(persistence_forecast(&data).unwrap(), vec![0.7, 0.2]);
        assert_eq!(persistence_forecast(&data).unwrap(), persistence_forecast(&data).unwrap());
    }

    #[test]
    fn persistence_needs_lags() {
        let data = matrix(&[vec![0.1], vec![0.2]], vec![0.0, 1.0], FeatureKind::Exogenous);
        let err = persistence_forecast(&data).unwrap_err();
        assert_eq!(err.to_string(), "persistence requires historical target lags");
    }

    #[test]
    fn rt_baseline_fits_a_step() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let y = (0..40).map(|i| if i < 20 { 0.0 } else { 1.0 }).collect();
        let data = matrix(&rows, y, FeatureKind::Exogenous);
        let rt = fit_rt_baseline(&data, 0..40, None).unwrap();
        assert_eq!(rt.predict_row(&[3.0]), 0.0);
        assert_eq!(rt.predict_row(&[35.0]), 1.0);
        assert!(rt.tree.depth() <= 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn residuals_are_orthogonal_to_columns(
            cells in proptest::collection::vec(-1.0f64..1.0, 3 * 30),
            noise in proptest::collection::vec(-1.0f64..1.0, 30),
        ) {
            let rows: Vec<Vec<f64>> = cells.chunks(3).map(|c| c.to_vec()).collect();
            let y: Vec<f64> = rows
                .iter()
                .zip(&noise)
                .map(|(r, e)| 0.3 * r[0] - r[2] + e)
                .collect();
            let data = matrix(&rows, y.clone(), FeatureKind::Exogenous);
            let m = fit_ols(&data, 0..30).unwrap();
            let pred = predict_lr(&m, &data.x).unwrap();
            let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
            prop_assert!(resid.iter().sum::<f64>().abs() < 1e-8);
            for j in 0..3 {
                let dot: f64 = resid.iter().zip(&rows).map(|(e, r)| e * r[j]).sum();
                prop_assert!(dot.abs() < 1e-8, "column {j}: {dot}");
            }
        }
    }
}
