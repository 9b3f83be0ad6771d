//! The models × horizons evaluation grid behind the results tables.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_ols, fit_rt_baseline, PersistenceModel};
use crate::data::{FeatureKind, SplitFractions, SupervisedMatrix, DataSplit, TimeSeriesFrame};
use crate::error::{Error, Result};
use crate::glassbox::{GlassBoxModel, TrainConfig};
use crate::metrics::{evaluate, EvalReport};
use crate::persist::SavedModel;
use crate::pipeline::{prepare, PreparedData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Windebm,
    WindebmNoInteractions,
    Lr,
    Rt,
    Pm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Windebm,
        ModelKind::WindebmNoInteractions,
        ModelKind::Lr,
        ModelKind::Rt,
        ModelKind::Pm,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Windebm => "windebm",
            ModelKind::WindebmNoInteractions => "windebm-no-interactions",
            ModelKind::Lr => "lr",
            ModelKind::Rt => "rt",
            ModelKind::Pm => "pm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = Self::ALL.iter().map(ModelKind::as_str).collect();
                Error::param(format!("unknown model `{s}` (valid: {})", valid.join(", ")))
            })
    }
}

/// Trains one model of `kind` on `data`'s training range.
pub fn train_model(
    kind: ModelKind,
    data: &SupervisedMatrix,
    split: &DataSplit,
    cfg: &TrainConfig,
) -> Result<SavedModel> {
    Ok(match kind {
        ModelKind::Windebm => SavedModel::Windebm(GlassBoxModel::fit(data, split, cfg)?),
        ModelKind::WindebmNoInteractions => {
            SavedModel::Windebm(GlassBoxModel::fit(data, split, &cfg.clone().without_interactions())?)
        }
        ModelKind::Lr => SavedModel::Linear(fit_ols(data, split.train.clone())?),
        ModelKind::Rt => SavedModel::Tree(fit_rt_baseline(data, split.train.clone(), None)?),
        ModelKind::Pm => SavedModel::Persistence(PersistenceModel::for_matrix(data)?),
    })
}

/// Forecasts clipped to the normalized power range.
pub fn clamp_unit(forecast: &mut [f64]) {
    forecast.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
}

/// Which feature matrix the grid uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureMode {
    Lags { n_lags: usize },
    Exogenous,
}

impl FeatureMode {
    fn kind(&self, horizon_steps: usize) -> FeatureKind {
        match *self {
            FeatureMode::Lags { n_lags } => FeatureKind::Lags {
                n_lags,
                horizon_steps,
            },
            FeatureMode::Exogenous => FeatureKind::Exogenous,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub models: Vec<ModelKind>,
    pub features: FeatureMode,
    /// Forecast horizons in time steps; ignored for exogenous features.
    pub horizons: Vec<usize>,
    pub fractions: SplitFractions,
    pub train: TrainConfig,
    pub repeats: usize,
    /// Repeat `r` trains with seed `seed + r`.
    pub seed: u64,
}

/// One model × horizon × repeat evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkCell {
    pub model: ModelKind,
    pub horizon_steps: usize,
    pub repeat: usize,
    pub report: EvalReport,
    pub train_secs: f64,
    pub infer_secs: f64,
}

/// Mean and sample standard deviation over repeats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub model: ModelKind,
    pub horizon_steps: usize,
    pub repeats: usize,
    pub nrmse: Summary,
    pub nmae: Summary,
    pub r2: Summary,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    /// Ordered by horizon, then by the model order of the spec.
    pub rows: Vec<BenchmarkRow>,
    pub cells: Vec<BenchmarkCell>,
}

impl BenchmarkResult {
    /// Metric table; free of timings so identical runs give identical bytes.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("model,horizon_steps,repeats,nrmse_mean,nrmse_std,nmae_mean,nmae_std,r2_mean,r2_std,m\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                r.model, r.horizon_steps, r.repeats, r.nrmse.mean, r.nrmse.std, r.nmae.mean, r.nmae.std, r.r2.mean,
                r.r2.std, r.m
            );
        }
        out
    }

    /// Wall-clock seconds per cell.
    pub fn timing_csv(&self) -> String {
        let mut out = String::from("model,horizon_steps,repeat,train_secs,infer_secs\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6}",
                c.model, c.horizon_steps, c.repeat, c.train_secs, c.infer_secs
            );
        }
        out
    }

    pub fn get(&self, model: ModelKind, horizon_steps: usize) -> Option<&BenchmarkRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.horizon_steps == horizon_steps)
    }
}

impl fmt::Display for BenchmarkResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.model.as_str().len()).max().unwrap_or(5).max(5);
        writeln!(
            f,
            "{:<width$}  {:>7}  {:>17}  {:>17}  {:>17}",
            "model", "horizon", "NRMSE", "NMAE", "R2"
        )?;
        for r in &self.rows {
            let cell = |s: Summary| {
                if r.repeats > 1 {
                    format!("{:.3} ± {:.3}", s.mean, s.std)
                } else {
                    format!("{:.3}", s.mean)
                }
            };
            writeln!(
                f,
                "{:<width$}  {:>7}  {:>17}  {:>17}  {:>17}",
                r.model.as_str(),
                r.horizon_steps,
                cell(r.nrmse),
                cell(r.nmae),
                cell(r.r2)
            )?;
        }
        Ok(())
    }
}

fn run_cell(kind: ModelKind, prepared: &PreparedData, horizon_steps: usize, repeat: usize, spec: &BenchmarkSpec) -> Result<BenchmarkCell> {
    let cfg = TrainConfig {
        seed: spec.seed.wrapping_add(repeat as u64),
        ..spec.train.clone()
    };
    let data = &prepared.data;
    let start = Instant::now();
    let model = train_model(kind, data, &prepared.split, &cfg)?;
    let train_secs = if kind == ModelKind::Pm { 0.0 } else { start.elapsed().as_secs_f64() };
    let test = data.x.slice_rows(prepared.split.test.clone());
    let start = Instant::now();
    let mut forecast = model.predict(&test)?;
    let infer_secs = start.elapsed().as_secs_f64();
    clamp_unit(&mut forecast);
    let report = evaluate(&forecast, &data.y[prepared.split.test.clone()])?;
    info!("{kind} h={horizon_steps} repeat={repeat}: {report}");
    Ok(BenchmarkCell {
        model: kind,
        horizon_steps,
        repeat,
        report,
        train_secs,
        infer_secs,
    })
}

/// Evaluates every model at every horizon. Persistence is skipped for
/// exogenous features, where it is undefined.
pub fn run_benchmark(frame: &TimeSeriesFrame, spec: &BenchmarkSpec) -> Result<BenchmarkResult> {
    if spec.models.is_empty() {
        return Err(Error::param("benchmark needs at least one model"));
    }
    if spec.repeats == 0 {
        return Err(Error::param("repeats must be at least 1"));
    }
    let horizons: Vec<usize> = match spec.features {
        FeatureMode::Lags { .. } if spec.horizons.is_empty() => {
            return Err(Error::param("lag benchmarks need at least one horizon"))
        }
        FeatureMode::Lags { .. } => spec.horizons.clone(),
        FeatureMode::Exogenous => vec![0],
    };
    let models: Vec<ModelKind> = spec
        .models
        .iter()
        .copied()
        .filter(|m| *m != ModelKind::Pm || matches!(spec.features, FeatureMode::Lags { .. }))
        .collect();
    if models.len() < spec.models.len() {
        info!("persistence skipped: no target lags in exogenous mode");
    }
    let prepared: Vec<PreparedData> = horizons
        .iter()
        .map(|&h| prepare(frame, spec.features.kind(h), spec.fractions))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, ModelKind, usize)> = (0..horizons.len())
        .flat_map(|h| models.iter().flat_map(move |&m| (0..spec.repeats).map(move |r| (h, m, r))))
        .collect();
    let cells: Vec<BenchmarkCell> = jobs
        .par_iter()
        .map(|&(h, m, r)| run_cell(m, &prepared[h], horizons[h], r, spec))
        .collect::<Result<_>>()?;
    let rows = cells
        .chunks(spec.repeats)
        .map(|group| {
            let pick = |f: fn(&EvalReport) -> f64| Summary::of(&group.iter().map(|c| f(&c.report)).collect::<Vec<_>>());
            BenchmarkRow {
                model: group[0].model,
                horizon_steps: group[0].horizon_steps,
                repeats: group.len(),
                nrmse: pick(|r| r.nrmse),
                nmae: pick(|r| r.nmae),
                r2: pick(|r| r.r2),
                m: group[0].report.m,
            }
        })
        .collect();
    Ok(BenchmarkResult { rows, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> TimeSeriesFrame {
        let n = 400;
        let ts = (0..n as i64).map(|t| t * 1800).collect();
        let target: Vec<f64> = (0..n).map(|t| (t as f64 / 15.0).sin() + 0.1 * (t as f64 / 3.0).cos()).collect();
        let u = (0..n).map(|t| (t as f64 / 15.0).sin() * 4.0 + 5.0).collect();
        TimeSeriesFrame::new(ts, "power", target, vec![("u".into(), u)]).unwrap()
    }

    fn spec(models: Vec<ModelKind>, features: FeatureMode, horizons: Vec<usize>) -> BenchmarkSpec {
        BenchmarkSpec {
            models,
            features,
            horizons,
            fractions: SplitFractions::default(),
            train: TrainConfig {
                max_rounds: 30,
                learning_rate: 0.1,
                ..TrainConfig::default()
            },
            repeats: 1,
            seed: 3,
        }
    }

    #[test]
    fn model_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
        }
        assert!("xgboost".parse::<ModelKind>().is_err());
    }

    #[test]
    fn single_cell_is_one_row() {
        let r = run_benchmark(&frame(), &spec(vec![ModelKind::Lr], FeatureMode::Lags { n_lags: 4 }, vec![1])).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.to_csv().lines().count(), 2);
    }

    #[test]
    fn persistence_only_for_lags() {
        let models = vec![ModelKind::Lr, ModelKind::Pm];
        let exo = run_benchmark(&frame(), &spec(models.clone(), FeatureMode::Exogenous, vec![])).unwrap();
        assert!(exo.rows.iter().all(|r| r.model != ModelKind::Pm));
        let lags = run_benchmark(&frame(), &spec(models, FeatureMode::Lags { n_lags: 4 }, vec![1, 4])).unwrap();
        assert_eq!(lags.rows.len(), 4);
        let order: Vec<(usize, ModelKind)> = lags.rows.iter().map(|r| (r.horizon_steps, r.model)).collect();
        assert_eq!(
            order,
            vec![(1, ModelKind::Lr), (1, ModelKind::Pm), (4, ModelKind::Lr), (4, ModelKind::Pm)]
        );
    }

    #[test]
    fn csv_is_reproducible() {
        let s = spec(
            vec![ModelKind::Windebm, ModelKind::Rt, ModelKind::Pm],
            FeatureMode::Lags { n_lags: 3 },
            vec![1, 2],
        );
        assert_eq!(run_benchmark(&frame(), &s).unwrap().to_csv(), run_benchmark(&frame(), &s).unwrap().to_csv());
    }
}
