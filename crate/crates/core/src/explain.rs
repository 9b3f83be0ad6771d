//! Global and per-forecast interpretation: term importances, shape and
//! heatmap exports, partial dependence, permutation importance and ranking
//! agreement between methods.

use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glassbox::{GlassBoxModel, TermId};
use crate::matrix::Matrix;
use crate::metrics;
use crate::predictor::Predictor;

/// One term's mean absolute contribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermImportance {
    pub term: TermId,
    pub label: String,
    pub score: f64,
}

/// Terms in descending importance; ties ordered by term id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportanceReport {
    pub entries: Vec<TermImportance>,
}

impl GlobalImportanceReport {
    /// Single-feature terms only, most important first.
    pub fn feature_ordering(&self) -> Vec<usize> {
        self.entries
            .iter()
            .filter_map(|e| match e.term {
                TermId::Feature(i) => Some(i),
                TermId::Pair(..) => None,
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,term,score\n");
        for (k, e) in self.entries.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", k + 1, csv_field(&e.label), e.score);
        }
        out
    }
}

impl fmt::Display for GlobalImportanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.entries.iter().map(|e| e.label.len()).max().unwrap_or(4).max(4);
        writeln!(f, "{:>4}  {:<width$}  {:>10}", "rank", "term", "importance")?;
        for (k, e) in self.entries.iter().enumerate() {
            writeln!(f, "{:>4}  {:<width$}  {:>10.6}", k + 1, e.label, e.score)?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn sort_desc<T: Ord>(items: &mut [(T, f64)]) {
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

/// Mean absolute contribution of every term over `reference`.
pub fn global_importance(model: &GlassBoxModel, reference: &Matrix) -> Result<GlobalImportanceReport> {
    if reference.rows() == 0 {
        return Err(Error::Empty("reference set"));
    }
    let mut scores: Vec<(TermId, f64)> = model
        .terms()
        .into_par_iter()
        .map(|term| {
            let mut abs: Vec<f64> = model
                .term_contributions(reference, term)?
                .into_iter()
                .map(f64::abs)
                .collect();
            // summing in sorted order makes the score independent of row order
            abs.sort_by(f64::total_cmp);
            Ok((term, abs.iter().sum::<f64>() / abs.len() as f64))
        })
        .collect::<Result<_>>()?;
    sort_desc(&mut scores);
    Ok(GlobalImportanceReport {
        entries: scores
            .into_iter()
            .map(|(term, score)| TermImportance {
                term,
                label: model.term_label(term),
                score,
            })
            .collect(),
    })
}

/// A forecast broken down into its term contributions, largest magnitude
/// first.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalExplanation {
    pub intercept: f64,
    pub forecast: f64,
    pub actual: Option<f64>,
    pub contributions: Vec<(TermId, String, f64)>,
}

impl LocalExplanation {
    /// `Actual(0.994), Forecasts(0.877) = 0.455 + 0.506 - 0.001`.
    pub fn summary_line(&self) -> String {
        let mut s = String::new();
        if let Some(a) = self.actual {
            let _ = write!(s, "Actual({a:.3}), ");
        }
        let _ = write!(s, "Forecasts({:.3}) = {:.3}", self.forecast, self.intercept);
        for (_, _, c) in &self.contributions {
            let sign = if c.is_sign_negative() { '-' } else { '+' };
            let _ = write!(s, " {sign} {:.3}", c.abs());
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("term,contribution,running_sum\n");
        let mut running = self.intercept;
        let _ = writeln!(out, "intercept,{},{}", self.intercept, running);
        for (_, label, c) in &self.contributions {
            running += c;
            let _ = writeln!(out, "{},{},{}", csv_field(label), c, running);
        }
        out
    }
}

impl fmt::Display for LocalExplanation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.summary_line())?;
        let width = self.contributions.iter().map(|c| c.1.len()).max().unwrap_or(9).max(9);
        writeln!(f, "{:<width$}  {:>12}  {:>12}", "term", "contribution", "running sum")?;
        let mut running = self.intercept;
        writeln!(f, "{:<width$}  {:>12.6}  {:>12.6}", "intercept", self.intercept, running)?;
        for (_, label, c) in &self.contributions {
            running += c;
            writeln!(f, "{label:<width$}  {c:>12.6}  {running:>12.6}")?;
        }
        Ok(())
    }
}

pub fn local_explanation(model: &GlassBoxModel, row: &[f64], actual: Option<f64>) -> Result<LocalExplanation> {
    let b = model.predict_with_breakdown(row)?;
    let mut contributions: Vec<(TermId, String, f64)> = b
        .contributions
        .into_iter()
        .map(|(t, c)| (t, model.term_label(t), c))
        .collect();
    contributions.sort_by(|x, y| y.2.abs().total_cmp(&x.2.abs()).then_with(|| x.0.cmp(&y.0)));
    Ok(LocalExplanation {
        intercept: b.intercept,
        forecast: b.forecast,
        actual,
        contributions,
    })
}

/// A term's lookup table with its axes.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveExport {
    Shape {
        feature: usize,
        label: String,
        centers: Vec<f64>,
        values: Vec<f64>,
    },
    Heatmap {
        features: (usize, usize),
        label: String,
        row_centers: Vec<f64>,
        col_centers: Vec<f64>,
        /// `values[row][col]`.
        values: Vec<Vec<f64>>,
    },
}

impl CurveExport {
    /// `bin_center,value` for curves; `row,col,value` for heatmaps.
    pub fn to_csv(&self) -> String {
        match self {
            CurveExport::Shape { centers, values, .. } => {
                let mut out = String::from("bin_center,value\n");
                for (c, v) in centers.iter().zip(values) {
                    let _ = writeln!(out, "{c},{v}");
                }
                out
            }
            CurveExport::Heatmap { values, .. } => {
                let mut out = String::from("row,col,value\n");
                for (r, row) in values.iter().enumerate() {
                    for (c, v) in row.iter().enumerate() {
                        let _ = writeln!(out, "{r},{c},{v}");
                    }
                }
                out
            }
        }
    }

    /// Axis centers of a heatmap as `axis,index,center`; empty for curves.
    pub fn axes_csv(&self) -> String {
        let mut out = String::from("axis,index,center\n");
        if let CurveExport::Heatmap {
            row_centers,
            col_centers,
            ..
        } = self
        {
            for (axis, centers) in [("row", row_centers), ("col", col_centers)] {
                for (k, c) in centers.iter().enumerate() {
                    let _ = writeln!(out, "{axis},{k},{c}");
                }
            }
        }
        out
    }
}

fn denormalizer(model: &GlassBoxModel, feature: usize, denormalize: bool) -> impl Fn(f64) -> f64 + '_ {
    let mm = model
        .normalization
        .as_ref()
        .filter(|_| denormalize)
        .map(|n| n.features[feature]);
    move |v| mm.map_or(v, |m| m.invert(v))
}

fn check_feature(model: &GlassBoxModel, feature: usize) -> Result<()> {
    if feature >= model.n_features() {
        return Err(Error::UnknownTerm(TermId::Feature(feature).to_string()));
    }
    Ok(())
}

/// The shape function of `feature` at its bin centers; with `denormalize`
/// the centers are mapped back to raw units.
pub fn export_shape(model: &GlassBoxModel, feature: usize, denormalize: bool) -> Result<CurveExport> {
    check_feature(model, feature)?;
    let shape = model
        .shape(feature)
        .ok_or_else(|| Error::UnknownTerm(TermId::Feature(feature).to_string()))?;
    let back = denormalizer(model, feature, denormalize);
    Ok(CurveExport::Shape {
        feature,
        label: model.feature_names[feature].clone(),
        centers: model.bin_edges.features[feature].centers().into_iter().map(back).collect(),
        values: shape.values.clone(),
    })
}

/// Center of each coarse group: midpoint of its members' fitted range.
fn coarse_centers(model: &GlassBoxModel, feature: usize) -> Vec<f64> {
    let fb = &model.bin_edges.features[feature];
    let map = &model.coarse_maps[feature];
    let groups = map.iter().map(|&g| g as usize + 1).max().unwrap_or(0);
    let mut lo = vec![f64::INFINITY; groups];
    let mut hi = vec![f64::NEG_INFINITY; groups];
    for (b, &g) in map.iter().enumerate() {
        lo[g as usize] = lo[g as usize].min(fb.lower[b]);
        hi[g as usize] = hi[g as usize].max(fb.upper[b]);
    }
    lo.iter().zip(&hi).map(|(l, h)| l + (h - l) / 2.0).collect()
}

pub fn export_pair_heatmap(model: &GlassBoxModel, pair: (usize, usize), denormalize: bool) -> Result<CurveExport> {
    let (i, j) = (pair.0.min(pair.1), pair.0.max(pair.1));
    let term = model
        .pair(i, j)
        .ok_or_else(|| Error::UnknownTerm(TermId::Pair(i, j).to_string()))?;
    let values = term
        .values
        .chunks(term.dims.1)
        .map(<[f64]>::to_vec)
        .collect();
    Ok(CurveExport::Heatmap {
        features: (i, j),
        label: model.term_label(TermId::Pair(i, j)),
        row_centers: coarse_centers(model, i).into_iter().map(denormalizer(model, i, denormalize)).collect(),
        col_centers: coarse_centers(model, j).into_iter().map(denormalizer(model, j, denormalize)).collect(),
        values,
    })
}

/// The model's bin centers for `feature`, the default PDP grid.
pub fn pdp_grid(model: &GlassBoxModel, feature: usize) -> Result<Vec<f64>> {
    check_feature(model, feature)?;
    Ok(model.bin_edges.features[feature].centers())
}

/// Partial dependence: for each grid value, the mean prediction with
/// `feature` set to that value in every row of `x`.
pub fn pdp<P: Predictor + ?Sized>(predictor: &P, x: &Matrix, feature: usize, grid: &[f64]) -> Result<Vec<f64>> {
    if x.rows() == 0 {
        return Err(Error::Empty("PDP rows"));
    }
    if grid.is_empty() {
        return Err(Error::Empty("PDP grid"));
    }
    if x.cols() != predictor.n_features() {
        return Err(Error::DimensionMismatch {
            expected: predictor.n_features(),
            got: x.cols(),
        });
    }
    if feature >= x.cols() {
        return Err(Error::UnknownTerm(TermId::Feature(feature).to_string()));
    }
    Ok(grid
        .par_iter()
        .map(|&v| {
            let mut row = vec![0.0; x.cols()];
            let mut total = 0.0;
            for r in x.iter_rows() {
                row.copy_from_slice(r);
                row[feature] = v;
                total += predictor.predict_row(&row);
            }
            total / x.rows() as f64
        })
        .collect())
}

/// Importance scalar of a PDP curve: its range.
pub fn pdp_importance(curve: &[f64]) -> f64 {
    let lo = curve.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if curve.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Metric whose degradation measures permutation importance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Nrmse,
    Nmae,
    R2,
}

impl Metric {
    /// Loss-oriented value: higher is worse (R² is negated).
    fn loss(self, forecast: &[f64], actual: &[f64]) -> Result<f64> {
        match self {
            Metric::Nrmse => metrics::nrmse(forecast, actual),
            Metric::Nmae => metrics::nmae(forecast, actual),
            Metric::R2 => metrics::r2(forecast, actual).map(|r| -r),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nrmse" => Ok(Metric::Nrmse),
            "nmae" => Ok(Metric::Nmae),
            "r2" => Ok(Metric::R2),
            other => Err(Error::param(format!("unknown metric `{other}` (nrmse, nmae, r2)"))),
        }
    }
}

/// Permutation importance of one feature across repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfiEntry {
    pub feature: usize,
    pub mean: f64,
    pub std: f64,
    pub repeats: Vec<f64>,
}

/// Per-feature permutation importances in feature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfiReport {
    pub metric: Metric,
    pub baseline: f64,
    pub entries: Vec<PfiEntry>,
}

impl PfiReport {
    /// Features by descending mean importance, ties by index.
    pub fn feature_ordering(&self) -> Vec<usize> {
        let mut scored: Vec<(usize, f64)> = self.entries.iter().map(|e| (e.feature, e.mean)).collect();
        sort_desc(&mut scored);
        scored.into_iter().map(|(f, _)| f).collect()
    }

    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("feature,mean_increase,std\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{}", csv_field(&names[e.feature]), e.mean, e.std);
        }
        out
    }
}

/// The permutation applied to `feature` on `repeat`: a function of the seed
/// and the pair only, so results do not depend on scheduling.
fn permutation(seed: u64, feature: usize, repeat: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((feature as u64) << 32) | repeat as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

/// Mean metric degradation when each column of `x` is permuted.
pub fn pfi<P: Predictor + ?Sized>(
    predictor: &P,
    x: &Matrix,
    y: &[f64],
    metric: Metric,
    n_repeats: usize,
    seed: u64,
) -> Result<PfiReport> {
    if n_repeats == 0 {
        return Err(Error::param("n_repeats must be at least 1"));
    }
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    let base_pred = predictor.predict(x)?;
    let baseline = metric.loss(&base_pred, y)?;
    let p = x.cols();
    let jobs: Vec<(usize, usize)> = (0..p).flat_map(|f| (0..n_repeats).map(move |r| (f, r))).collect();
    let deltas: Vec<f64> = jobs
        .par_iter()
        .map(|&(feature, repeat)| {
            let perm = permutation(seed, feature, repeat, x.rows());
            let mut row = vec![0.0; p];
            let pred: Vec<f64> = (0..x.rows())
                .map(|r| {
                    row.copy_from_slice(x.row(r));
                    row[feature] = x.get(perm[r], feature);
                    predictor.predict_row(&row)
                })
                .collect();
            Ok(metric.loss(&pred, y)? - baseline)
        })
        .collect::<Result<_>>()?;
    let entries = deltas
        .chunks(n_repeats)
        .enumerate()
        .map(|(feature, d)| {
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            let var = if d.len() > 1 {
                d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64
            } else {
                0.0
            };
            PfiEntry {
                feature,
                mean,
                std: var.sqrt(),
                repeats: d.to_vec(),
            }
        })
        .collect();
    Ok(PfiReport {
        metric,
        baseline,
        entries,
    })
}

/// Items ordered by descending score, ties by item.
pub fn ordering_by_score<T: Ord + Clone>(scores: &[(T, f64)]) -> Vec<T> {
    let mut s = scores.to_vec();
    sort_desc(&mut s);
    s.into_iter().map(|(t, _)| t).collect()
}

/// Agreement between two orderings of the same items.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankAgreement {
    pub exact_match: bool,
    /// Spearman rank correlation in `[-1, 1]`.
    pub spearman: f64,
}

pub fn ranking_consistency<T: Ord + Clone>(a: &[T], b: &[T]) -> Result<RankAgreement> {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort();
    sb.sort();
    let distinct = sa.windows(2).all(|w| w[0] != w[1]);
    if sa != sb || !distinct || a.is_empty() {
        return Err(Error::MismatchedUniverse);
    }
    let n = a.len();
    if n == 1 {
        return Ok(RankAgreement {
            exact_match: true,
            spearman: 1.0,
        });
    }
    let d2: f64 = a
        .iter()
        .enumerate()
        .map(|(ra, item)| {
            let rb = b.iter().position(|x| x == item).expect("same universe");
            let d = ra as f64 - rb as f64;
            d * d
        })
        .sum();
    let nf = n as f64;
    Ok(RankAgreement {
        exact_match: a == b,
        spearman: 1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{BinningMap, FeatureBins};
    use crate::glassbox::{PairShapeFunction, ShapeFunction, TrainConfig, TrainingSummary};
    use crate::predictor::FnPredictor;
    use proptest::prelude::*;

    /// Two features, four bins each (cuts 0.25/0.5/0.75), one pair term.
    fn toy_model(f0: [f64; 4], f1: [f64; 4], pair: Option<[f64; 4]>) -> GlassBoxModel {
        let fb = FeatureBins {
            cuts: vec![0.25, 0.5, 0.75],
            counts: vec![1; 4],
            lower: vec![0.0, 0.25, 0.5, 0.75],
            upper: vec![0.2, 0.45, 0.7, 1.0],
        };
        GlassBoxModel {
            intercept: 0.5,
            feature_names: vec!["u".into(), "v".into()],
            normalization: None,
            bin_edges: BinningMap {
                max_bins: 256,
                features: vec![fb.clone(), fb],
            },
            coarse_maps: vec![vec![0, 0, 1, 1], vec![0, 0, 1, 1]],
            shape_functions: vec![
                ShapeFunction {
                    feature: 0,
                    values: f0.to_vec(),
                },
                ShapeFunction {
                    feature: 1,
                    values: f1.to_vec(),
                },
            ],
            pair_terms: pair
                .map(|p| PairShapeFunction {
                    features: (0, 1),
                    dims: (2, 2),
                    values: p.to_vec(),
                })
                .into_iter()
                .collect(),
            metadata: TrainingSummary {
                config: TrainConfig::default(),
                feature_kind: None,
                n_train: 4,
                n_val: 0,
                main_rounds: 0,
                pair_rounds: 0,
                main_val_curve: vec![],
                pair_val_curve: vec![],
                pair_ranking: vec![],
                loss_trace: vec![],
            },
        }
    }

    fn grid_rows() -> Matrix {
        let pts = [0.1, 0.3, 0.6, 0.9];
        let rows: Vec<[f64; 2]> = pts.iter().flat_map(|&a| pts.iter().map(move |&b| [a, b])).collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn constructed_tables_give_exact_scores() {
        let m = toy_model([0.2, -0.2, 0.2, -0.2], [0.1, -0.1, -0.1, 0.1], None);
        let r = global_importance(&m, &grid_rows()).unwrap();
        assert_eq!(r.entries[0].term, TermId::Feature(0));
        assert!((r.entries[0].score - 0.2).abs() < 1e-15);
        assert!((r.entries[1].score - 0.1).abs() < 1e-15);
        assert_eq!(r.feature_ordering(), vec![0, 1]);
    }

    #[test]
    fn single_nonzero_term_ranks_first() {
        let m = toy_model([0.0; 4], [0.0; 4], Some([0.0, 0.3, -0.3, 0.0]));
        let r = global_importance(&m, &grid_rows()).unwrap();
        assert_eq!(r.entries[0].term, TermId::Pair(0, 1));
        assert_eq!(r.entries[0].label, "u & v");
        assert!(r.entries[1..].iter().all(|e| e.score == 0.0));
        assert!(global_importance(&m, &Matrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn local_explanation_is_sorted_and_exact() {
        let m = toy_model([0.2, -0.05, 0.1, 0.0], [0.3, -0.4, 0.0, 0.01], Some([0.02, 0.0, 0.0, -0.1]));
        let e = local_explanation(&m, &[0.1, 0.3], Some(0.6)).unwrap();
        let mags: Vec<f64> = e.contributions.iter().map(|c| c.2.abs()).collect();
        assert!(mags.windows(2).all(|w| w[0] >= w[1]));
        let sum = e.intercept + e.contributions.iter().map(|c| c.2).sum::<f64>();
        assert!((sum - e.forecast).abs() <= 1e-12);
        assert_eq!(e.summary_line(), "Actual(0.600), Forecasts(0.320) = 0.500 - 0.400 + 0.200 + 0.020");
    }

    #[test]
    fn shape_export_is_the_table() {
        let m = toy_model([0.2, -0.05, 0.1, 0.0], [0.0; 4], Some([1.0, 2.0, 3.0, 4.0]));
        let CurveExport::Shape { centers, values, .. } = export_shape(&m, 0, false).unwrap() else {
            panic!("expected a curve")
        };
        assert_eq!(values, m.shape(0).unwrap().values);
        for (b, c) in centers.iter().enumerate() {
            assert_eq!(m.bin_edges.features[0].bin_of(*c) as usize, b);
        }
        let h = export_pair_heatmap(&m, (1, 0), false).unwrap();
        let CurveExport::Heatmap { values, row_centers, .. } = &h else {
            panic!("expected a heatmap")
        };
        assert_eq!(values, &vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(row_centers.len(), 2);
        assert!(h.to_csv().starts_with("row,col,value\n0,0,1\n0,1,2\n"));
        assert!(matches!(export_shape(&m, 5, false), Err(Error::UnknownTerm(_))));
    }

    #[test]
    fn denormalized_axis_inverts_min_max() {
        use crate::data::{MinMax, NormParams};
        let mut m = toy_model([0.0; 4], [0.0; 4], None);
        let mm = MinMax { min: 10.0, max: 30.0 };
        m.normalization = Some(NormParams {
            features: vec![mm, mm],
            target: mm,
        });
        let CurveExport::Shape { centers, .. } = export_shape(&m, 1, true).unwrap() else {
            panic!()
        };
        let raw = m.bin_edges.features[1].centers();
        for (c, r) in centers.iter().zip(raw) {
            assert!((c - (10.0 + 20.0 * r)).abs() < 1e-12);
        }
    }

    #[test]
    fn pdp_of_constant_and_linear_predictors() {
        let x = grid_rows();
        let flat = pdp(&FnPredictor::new(2, |_: &[f64]| 0.7), &x, 0, &[0.0, 0.5, 1.0]).unwrap();
        assert!(flat.iter().all(|&v| (v - 0.7).abs() < 1e-15));
        let line = pdp(&FnPredictor::new(2, |r: &[f64]| 2.0 * r[0]), &x, 0, &[0.0, 0.25, 1.0]).unwrap();
        assert_eq!(line, vec![0.0, 0.5, 2.0]);
        assert!((pdp_importance(&line) - 2.0).abs() < 1e-15);
        assert!(pdp(&FnPredictor::new(2, |_: &[f64]| 0.0), &x, 0, &[]).is_err());
    }

    #[test]
    fn pdp_of_additive_model_is_shifted_shape() {
        let m = toy_model([0.2, -0.05, 0.1, 0.0], [0.3, -0.4, 0.0, 0.01], None);
        let grid = pdp_grid(&m, 0).unwrap();
        let curve = pdp(&m, &grid_rows(), 0, &grid).unwrap();
        let shift = curve[0] - 0.2;
        for (c, s) in curve.iter().zip(&m.shape(0).unwrap().values) {
            assert!((c - s - shift).abs() < 1e-12);
        }
    }

    fn pfi_fixture() -> (Matrix, Vec<f64>) {
        let rows: Vec<[f64; 2]> = (0..200)
            .map(|i| [i as f64 / 199.0, ((i * 37) % 200) as f64 / 199.0])
            .collect();
        let y = rows.iter().map(|r| r[0]).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn pfi_detects_the_used_feature_only() {
        let (x, y) = pfi_fixture();
        let p = FnPredictor::new(2, |r: &[f64]| r[0]);
        let rep = pfi(&p, &x, &y, Metric::Nrmse, 5, 9).unwrap();
        assert!(rep.entries[0].mean > 0.1);
        assert_eq!(rep.entries[1].mean, 0.0);
        assert_eq!(rep.feature_ordering(), vec![0, 1]);
        assert_eq!(rep, pfi(&p, &x, &y, Metric::Nrmse, 5, 9).unwrap());
        assert!(pfi(&p, &x, &y, Metric::Nrmse, 0, 9).is_err());
    }

    #[test]
    fn pfi_r2_fails_on_constant_target() {
        let (x, _) = pfi_fixture();
        let p = FnPredictor::new(2, |r: &[f64]| r[0]);
        assert!(matches!(
            pfi(&p, &x, &[0.5; 200], Metric::R2, 2, 0),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn ranking_agreement_extremes() {
        let a = ranking_consistency(&[1, 2, 3, 4], &[1, 2, 3, 4]).unwrap();
        assert!(a.exact_match && a.spearman == 1.0);
        let r = ranking_consistency(&[1, 2, 3, 4], &[4, 3, 2, 1]).unwrap();
        assert!(!r.exact_match && r.spearman == -1.0);
        assert!(matches!(
            ranking_consistency(&[1, 2], &[1, 3]),
            Err(Error::MismatchedUniverse)
        ));
    }

    proptest! {
        #[test]
        fn spearman_matches_pearson_of_ranks(perm in Just((0..7).collect::<Vec<usize>>()).prop_shuffle()) {
            let base: Vec<usize> = (0..7).collect();
            let got = ranking_consistency(&base, &perm).unwrap().spearman;
            let ranks_b: Vec<f64> = base.iter().map(|i| perm.iter().position(|p| p == i).unwrap() as f64).collect();
            let ranks_a: Vec<f64> = (0..7).map(|i| i as f64).collect();
            let expected = crate::data::pearson_correlation(&ranks_a, &ranks_b).unwrap();
            prop_assert!((got - expected).abs() < 1e-12);
        }

        #[test]
        fn importance_ignores_row_order(perm in Just((0..16).collect::<Vec<usize>>()).prop_shuffle()) {
            let m = toy_model([0.2, -0.05, 0.1, 0.0], [0.3, -0.4, 0.0, 0.01], Some([0.02, 0.0, 0.0, -0.1]));
            let x = grid_rows();
            prop_assert_eq!(
                global_importance(&m, &x).unwrap(),
                global_importance(&m, &x.select_rows(&perm)).unwrap()
            );
        }
    }
}
