use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::interactions::PairStrength;
use crate::data::{BinningMap, FeatureKind, NormParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::predictor::Predictor;

/// Per-bin contributions of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFunction {
    pub feature: usize,
    pub values: Vec<f64>,
}

/// Contributions of a feature pair over its coarse bin grid, row-major with
/// the first feature on rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairShapeFunction {
    pub features: (usize, usize),
    pub dims: (usize, usize),
    pub values: Vec<f64>,
}

impl PairShapeFunction {
    #[inline]
    pub fn at(&self, a: u16, b: u16) -> f64 {
        self.values[a as usize * self.dims.1 + b as usize]
    }
}

/// Identifies one additive term. Features order before pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TermId {
    Feature(usize),
    Pair(usize, usize),
}

impl TermId {
    pub fn label(&self, names: &[String]) -> String {
        match *self {
            TermId::Feature(i) => names[i].clone(),
            TermId::Pair(i, j) => format!("{} & {}", names[i], names[j]),
        }
    }
}

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermId::Feature(i) => write!(f, "f{i}"),
            TermId::Pair(i, j) => write!(f, "f{i}xf{j}"),
        }
    }
}

/// What training did, stored with the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub config: TrainConfig,
    pub feature_kind: Option<FeatureKind>,
    pub n_train: usize,
    pub n_val: usize,
    pub main_rounds: usize,
    pub pair_rounds: usize,
    /// Validation NRMSE after each main-effect cycle.
    pub main_val_curve: Vec<f64>,
    /// Validation NRMSE after each interaction cycle.
    pub pair_val_curve: Vec<f64>,
    /// Strongest candidate pairs by interaction strength.
    pub pair_ranking: Vec<PairStrength>,
    /// Training MSE before the first step and after every boosting step,
    /// when requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_trace: Vec<f64>,
}

/// Forecast with its exact additive decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Breakdown {
    pub forecast: f64,
    pub intercept: f64,
    pub contributions: Vec<(TermId, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlassBoxModel {
    pub intercept: f64,
    pub feature_names: Vec<String>,
    pub normalization: Option<NormParams>,
    pub bin_edges: BinningMap,
    /// For every feature, the coarse pair-grid bin of each main bin.
    pub coarse_maps: Vec<Vec<u16>>,
    pub shape_functions: Vec<ShapeFunction>,
    pub pair_terms: Vec<PairShapeFunction>,
    pub metadata: TrainingSummary,
}

impl GlassBoxModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn terms(&self) -> Vec<TermId> {
        self.shape_functions
            .iter()
            .map(|s| TermId::Feature(s.feature))
            .chain(
                self.pair_terms
                    .iter()
                    .map(|p| TermId::Pair(p.features.0, p.features.1)),
            )
            .collect()
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

    pub fn term_label(&self, term: TermId) -> String {
        term.label(&self.feature_names)
    }

    /// Calls `visit` with every term's contribution for `row`, in term order.
    #[inline]
    fn for_each_term(&self, row: &[f64], mut visit: impl FnMut(TermId, f64)) {
        let mut bins = [0u16; 64];
        let mut heap;
        let bins: &mut [u16] = if row.len() <= bins.len() {
            &mut bins[..row.len()]
        } else {
            heap = vec![0u16; row.len()];
            &mut heap
        };
        for (j, fb) in self.bin_edges.features.iter().enumerate() {
            bins[j] = fb.bin_of(row[j]);
        }
        for s in &self.shape_functions {
            visit(TermId::Feature(s.feature), s.values[bins[s.feature] as usize]);
        }
        for p in &self.pair_terms {
            let (i, j) = p.features;
            let a = self.coarse_maps[i][bins[i] as usize];
            let b = self.coarse_maps[j][bins[j] as usize];
            visit(TermId::Pair(i, j), p.at(a, b));
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        Predictor::predict(self, x)
    }

    /// The forecast and every term's contribution; `intercept + Σ
    /// contributions` reproduces `forecast` bit for bit.
    pub fn predict_with_breakdown(&self, row: &[f64]) -> Result<Breakdown> {
        self.check_row(row)?;
        let mut forecast = self.intercept;
        let mut contributions = Vec::with_capacity(self.shape_functions.len() + self.pair_terms.len());
        self.for_each_term(row, |t, c| {
            forecast += c;
            contributions.push((t, c));
        });
        Ok(Breakdown {
            forecast,
            intercept: self.intercept,
            contributions,
        })
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        Ok(())
    }

    pub fn shape(&self, feature: usize) -> Option<&ShapeFunction> {
        self.shape_functions.iter().find(|s| s.feature == feature)
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<&PairShapeFunction> {
        let key = (i.min(j), i.max(j));
        self.pair_terms.iter().find(|p| p.features == key)
    }

    /// Contribution of `term` for every row of `x`.
    pub fn term_contributions(&self, x: &Matrix, term: TermId) -> Result<Vec<f64>> {
        if x.cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.cols(),
            });
        }
        match term {
            TermId::Feature(i) => {
                let s = self.shape(i).ok_or_else(|| Error::UnknownTerm(term.to_string()))?;
                let fb = &self.bin_edges.features[i];
                Ok(x.iter_rows().map(|r| s.values[fb.bin_of(r[i]) as usize]).collect())
            }
            TermId::Pair(i, j) => {
                let p = self.pair(i, j).ok_or_else(|| Error::UnknownTerm(term.to_string()))?;
                let (fi, fj) = (&self.bin_edges.features[i], &self.bin_edges.features[j]);
                Ok(x.iter_rows()
                    .map(|r| {
                        let a = self.coarse_maps[i][fi.bin_of(r[i]) as usize];
                        let b = self.coarse_maps[j][fj.bin_of(r[j]) as usize];
                        p.at(a, b)
                    })
                    .collect())
            }
        }
    }
}

impl Predictor for GlassBoxModel {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    #[inline]
    fn predict_row(&self, row: &[f64]) -> f64 {
        let mut acc = self.intercept;
        self.for_each_term(row, |_, c| acc += c);
        acc
    }
}
