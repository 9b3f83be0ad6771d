use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::TrainConfig;
use super::interactions::{rank_interaction_pairs, PairStrength};
use super::model::{GlassBoxModel, PairShapeFunction, ShapeFunction, TrainingSummary};
use crate::data::{apply_bins, fit_bins, BinnedMatrix, BinningMap, DataSplit, SupervisedMatrix};
use crate::error::{Error, Result};
use crate::trees::{tree_as_bin_table, CellHistogram, TreeParams};

/// Main-effect model plus the training residuals left for interactions.
#[derive(Debug, Clone)]
pub struct MainEffectsFit {
    pub model: GlassBoxModel,
    /// Training targets minus the main-effect forecast.
    pub residuals: Vec<f64>,
}

struct Prepared {
    train: BinnedMatrix,
    y_train: Vec<f64>,
    val: Option<(BinnedMatrix, Vec<f64>)>,
}

fn prepare(
    data: &SupervisedMatrix,
    split: &DataSplit,
    bins: &BinningMap,
    cfg: &TrainConfig,
) -> Result<Prepared> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::Empty("training range"));
    }
    if split.train.end > data.rows() || split.val.end > data.rows() {
        return Err(Error::InsufficientLength {
            needed: split.train.end.max(split.val.end),
            got: data.rows(),
        });
    }
    if bins.n_features() != data.n_features() {
        return Err(Error::DimensionMismatch {
            expected: data.n_features(),
            got: bins.n_features(),
        });
    }
    if cfg.early_stop_patience > 0 && split.val.is_empty() {
        return Err(Error::Empty("validation range (required for early stopping)"));
    }
    let train = apply_bins(bins, &data.x.slice_rows(split.train.clone()))?;
    let y_train = data.y[split.train.clone()].to_vec();
    let val = if split.val.is_empty() {
        None
    } else {
        Some((
            apply_bins(bins, &data.x.slice_rows(split.val.clone()))?,
            data.y[split.val.clone()].to_vec(),
        ))
    };
    Ok(Prepared {
        train,
        y_train,
        val,
    })
}

/// Patience-based early stopping on validation NRMSE.
///
/// A cycle counts as progress when it beats the last progress value by the
/// relative tolerance; the best value seen is tracked separately so training
/// can roll back to it.
struct EarlyStop {
    tol: f64,
    patience: usize,
    reference: f64,
    stall: usize,
    best: f64,
    best_round: Option<usize>,
}

impl EarlyStop {
    fn new(initial: f64, cfg: &TrainConfig) -> Self {
        Self {
            tol: cfg.early_stop_tol,
            patience: cfg.early_stop_patience,
            reference: initial,
            stall: 0,
            best: initial,
            best_round: None,
        }
    }

    /// Returns `(new_best, stop)`.
    fn observe(&mut self, round: usize, value: f64) -> (bool, bool) {
        let new_best = value < self.best;
        if new_best {
            self.best = value;
            self.best_round = Some(round);
        }
        if value < self.reference * (1.0 - self.tol) {
            self.reference = value;
            self.stall = 0;
        } else {
            self.stall += 1;
        }
        (new_best, self.patience > 0 && self.stall >= self.patience)
    }
}

fn rms(r: &[f64]) -> f64 {
    (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt()
}

fn mse(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64
}

struct StageResult {
    tables: Vec<Vec<f64>>,
    rounds: usize,
    curve: Vec<f64>,
    trace: Vec<f64>,
}

/// One boosting term: the feature(s) a weak learner may split on and the
/// bin coordinates of every training/validation row.
struct Term<'a> {
    features: Vec<usize>,
    dims: (usize, usize),
    train: (&'a [u16], Option<&'a [u16]>),
    val: Option<(&'a [u16], Option<&'a [u16]>)>,
}

impl Term<'_> {
    #[inline]
    fn cell(cols: (&[u16], Option<&[u16]>), dims: (usize, usize), row: usize) -> usize {
        match cols.1 {
            None => cols.0[row] as usize,
            Some(b) => cols.0[row] as usize * dims.1 + b[row] as usize,
        }
    }

    fn histogram(&self, residuals: &[f64]) -> CellHistogram {
        match self.train.1 {
            None => CellHistogram::single(self.features[0], self.dims.0, self.train.0, residuals),
            Some(b) => CellHistogram::pair(
                (self.features[0], self.features[1]),
                self.dims,
                self.train.0,
                b,
                residuals,
            ),
        }
    }

    fn table_spec(&self) -> Vec<(usize, usize)> {
        match self.train.1 {
            None => vec![(self.features[0], self.dims.0)],
            Some(_) => vec![(self.features[0], self.dims.0), (self.features[1], self.dims.1)],
        }
    }
}

/// Cyclic boosting of `terms` on `residuals` (updated in place). Validation
/// residuals drive early stopping; the returned tables are those of the best
/// validation cycle.
fn boost(
    terms: &[Term<'_>],
    residuals: &mut [f64],
    mut val_residuals: Option<Vec<f64>>,
    params: &TreeParams,
    cfg: &TrainConfig,
) -> Result<StageResult> {
    let lr = cfg.learning_rate;
    let mut tables: Vec<Vec<f64>> = terms.iter().map(|t| vec![0.0; t.dims.0 * t.dims.1]).collect();
    let mut best_tables = tables.clone();
    let mut curve = Vec::new();
    let mut trace = Vec::new();
    if cfg.record_loss_trace {
        trace.push(mse(residuals));
    }
    let mut stopper = val_residuals.as_deref().map(|v| EarlyStop::new(rms(v), cfg));
    let mut rounds = 0;
    let mut increment = Vec::new();
    for round in 0..cfg.max_rounds {
        for (term, table) in terms.iter().zip(tables.iter_mut()) {
            let tree = term.histogram(residuals).fit(params)?;
            let step = tree_as_bin_table(&tree, &term.table_spec())?;
            increment.clear();
            increment.extend(step.iter().map(|v| lr * v));
            if increment.iter().all(|&v| v == 0.0) {
                if cfg.record_loss_trace {
                    trace.push(mse(residuals));
                }
                continue;
            }
            for (t, d) in table.iter_mut().zip(&increment) {
                *t += d;
            }
            for (row, r) in residuals.iter_mut().enumerate() {
                *r -= increment[Term::cell(term.train, term.dims, row)];
            }
            if let (Some(vr), Some(cols)) = (val_residuals.as_mut(), term.val) {
                for (row, r) in vr.iter_mut().enumerate() {
                    *r -= increment[Term::cell(cols, term.dims, row)];
                }
            }
            if cfg.record_loss_trace {
                trace.push(mse(residuals));
            }
        }
        rounds = round + 1;
        if let (Some(stop), Some(vr)) = (stopper.as_mut(), val_residuals.as_ref()) {
            let score = rms(vr);
            curve.push(score);
            let (new_best, halt) = stop.observe(round, score);
            if new_best && cfg.early_stop_patience > 0 {
                best_tables.clone_from(&tables);
            }
            if halt {
                break;
            }
        }
    }
    // with early stopping on, keep the best validation cycle and the part of
    // the loss trace that leads to it
    if let Some(stop) = stopper.filter(|_| cfg.early_stop_patience > 0) {
        tables = best_tables;
        rounds = stop.best_round.map_or(0, |r| r + 1);
        if cfg.record_loss_trace {
            trace.truncate(1 + rounds * terms.len());
        }
    }
    Ok(StageResult {
        tables,
        rounds,
        curve,
        trace,
    })
}

/// Row subsets for outer bagging; a single full set when bagging is off.
fn bags(n_train: usize, cfg: &TrainConfig) -> Vec<Option<Vec<usize>>> {
    if cfg.bagging_count <= 1 {
        return vec![None];
    }
    let take = ((n_train as f64 * cfg.bag_fraction).floor() as usize).clamp(1, n_train);
    (0..cfg.bagging_count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64);
            let mut idx: Vec<usize> = (0..n_train).collect();
            idx.shuffle(&mut rng);
            idx.truncate(take);
            idx.sort_unstable();
            Some(idx)
        })
        .collect()
}

fn average(tables: Vec<Vec<Vec<f64>>>) -> Vec<Vec<f64>> {
    let k = tables.len() as f64;
    let mut it = tables.into_iter();
    let mut acc = it.next().unwrap_or_default();
    for t in it {
        for (a, b) in acc.iter_mut().zip(t) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
    if k > 1.0 {
        acc.iter_mut().flatten().for_each(|v| *v /= k);
    }
    acc
}

/// Shifts `table` to zero weighted mean, returning the removed offset.
fn center(table: &mut [f64], weights: &[usize]) -> f64 {
    let total: usize = weights.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let offset = table
        .iter()
        .zip(weights)
        .map(|(v, &w)| v * w as f64)
        .sum::<f64>()
        / total as f64;
    table.iter_mut().for_each(|v| *v -= offset);
    offset
}

fn bin_counts(column: &[u16], n: usize) -> Vec<usize> {
    let mut c = vec![0usize; n];
    for &b in column {
        c[b as usize] += 1;
    }
    c
}

fn coarse_matrix(main: &BinnedMatrix, maps: &[Vec<u16>]) -> BinnedMatrix {
    let columns: Vec<Vec<u16>> = main
        .columns
        .iter()
        .zip(maps)
        .map(|(col, map)| col.iter().map(|&b| map[b as usize]).collect())
        .collect();
    let n_bins = maps
        .iter()
        .map(|m| m.iter().map(|&g| g as usize + 1).max().unwrap_or(1))
        .collect();
    BinnedMatrix {
        rows: main.rows,
        columns,
        n_bins,
    }
}

fn main_residuals(model: &GlassBoxModel, binned: &BinnedMatrix, y: &[f64]) -> Vec<f64> {
    (0..binned.rows)
        .map(|row| {
            let mut pred = model.intercept;
            for s in &model.shape_functions {
                pred += s.values[binned.columns[s.feature][row] as usize];
            }
            y[row] - pred
        })
        .collect()
}

/// Boosts one shape function per feature on `data`'s training range.
pub fn train_main_effects(
    data: &SupervisedMatrix,
    split: &DataSplit,
    bins: &BinningMap,
    cfg: &TrainConfig,
) -> Result<MainEffectsFit> {
    let prep = prepare(data, split, bins, cfg)?;
    let n_bins = prep.train.n_bins.clone();
    let params = TreeParams::weak_learner(cfg.main_depth, cfg.min_samples_split);
    let bag_rows = bags(prep.train.rows, cfg);

    let fits: Vec<(f64, StageResult)> = bag_rows
        .par_iter()
        .map(|rows| {
            let owned;
            let (train, y): (&BinnedMatrix, Vec<f64>) = match rows {
                None => (&prep.train, prep.y_train.clone()),
                Some(rows) => {
                    owned = prep.train.select_rows(rows);
                    (&owned, rows.iter().map(|&r| prep.y_train[r]).collect())
                }
            };
            let intercept = y.iter().sum::<f64>() / y.len() as f64;
            let mut residuals: Vec<f64> = y.iter().map(|v| v - intercept).collect();
            let val_residuals = prep
                .val
                .as_ref()
                .map(|(_, yv)| yv.iter().map(|v| v - intercept).collect());
            let terms: Vec<Term<'_>> = (0..n_bins.len())
                .map(|f| Term {
                    features: vec![f],
                    dims: (n_bins[f], 1),
                    train: (&train.columns[f], None),
                    val: prep.val.as_ref().map(|(v, _)| (v.columns[f].as_slice(), None)),
                })
                .collect();
            let stage = boost(&terms, &mut residuals, val_residuals, &params, cfg)?;
            Ok((intercept, stage))
        })
        .collect::<Result<_>>()?;

    let n_bags = fits.len() as f64;
    let mut intercept = fits.iter().map(|(a, _)| a).sum::<f64>() / n_bags;
    let main_rounds = fits.iter().map(|(_, s)| s.rounds).max().unwrap_or(0);
    let (curve, trace) = fits
        .first()
        .map(|(_, s)| (s.curve.clone(), s.trace.clone()))
        .unwrap_or_default();
    let mut tables = average(fits.into_iter().map(|(_, s)| s.tables).collect());
    for (f, table) in tables.iter_mut().enumerate() {
        intercept += center(table, &bin_counts(&prep.train.columns[f], n_bins[f]));
    }

    let model = GlassBoxModel {
        intercept,
        feature_names: data.feature_names.clone(),
        normalization: data.norm.clone(),
        bin_edges: bins.clone(),
        coarse_maps: bins.features.iter().map(|fb| fb.coarsen(cfg.pair_bins)).collect(),
        shape_functions: tables
            .into_iter()
            .enumerate()
            .map(|(feature, values)| ShapeFunction { feature, values })
            .collect(),
        pair_terms: Vec::new(),
        metadata: TrainingSummary {
            config: cfg.clone(),
            feature_kind: Some(data.kind),
            n_train: split.train.len(),
            n_val: split.val.len(),
            main_rounds,
            pair_rounds: 0,
            main_val_curve: curve,
            pair_val_curve: Vec::new(),
            pair_ranking: Vec::new(),
            loss_trace: trace,
        },
    };
    let residuals = main_residuals(&model, &prep.train, &prep.y_train);
    Ok(MainEffectsFit { model, residuals })
}

/// Boosts pair terms on the main-effect residuals. An empty `pairs` list
/// returns the main-effect model unchanged.
pub fn train_interactions(
    fit: MainEffectsFit,
    data: &SupervisedMatrix,
    split: &DataSplit,
    pairs: &[(usize, usize)],
    cfg: &TrainConfig,
) -> Result<GlassBoxModel> {
    let MainEffectsFit {
        mut model,
        residuals,
    } = fit;
    let n = model.n_features();
    let mut pairs: Vec<(usize, usize)> = pairs.iter().map(|&(i, j)| (i.min(j), i.max(j))).collect();
    pairs.sort_unstable();
    pairs.dedup();
    for &(i, j) in &pairs {
        if j >= n || i == j {
            return Err(Error::UnknownTerm(format!("pair ({i}, {j})")));
        }
    }
    if pairs.is_empty() {
        return Ok(model);
    }
    let prep = prepare(data, split, &model.bin_edges, cfg)?;
    if residuals.len() != prep.train.rows {
        return Err(Error::LengthMismatch {
            expected: prep.train.rows,
            got: residuals.len(),
        });
    }
    let coarse = coarse_matrix(&prep.train, &model.coarse_maps);
    let val = prep.val.as_ref().map(|(vb, yv)| {
        (
            coarse_matrix(vb, &model.coarse_maps),
            main_residuals(&model, vb, yv),
        )
    });
    let params = TreeParams::weak_learner(cfg.pair_depth, cfg.min_samples_split);
    let bag_rows = bags(prep.train.rows, cfg);

    let fits: Vec<StageResult> = bag_rows
        .par_iter()
        .map(|rows| {
            let owned;
            let (train, mut r): (&BinnedMatrix, Vec<f64>) = match rows {
                None => (&coarse, residuals.clone()),
                Some(rows) => {
                    owned = coarse.select_rows(rows);
                    (&owned, rows.iter().map(|&k| residuals[k]).collect())
                }
            };
            let terms: Vec<Term<'_>> = pairs
                .iter()
                .map(|&(i, j)| Term {
                    features: vec![i, j],
                    dims: (train.n_bins[i], train.n_bins[j]),
                    train: (&train.columns[i], Some(&train.columns[j])),
                    val: val
                        .as_ref()
                        .map(|(v, _)| (v.columns[i].as_slice(), Some(v.columns[j].as_slice()))),
                })
                .collect();
            boost(&terms, &mut r, val.as_ref().map(|(_, vr)| vr.clone()), &params, cfg)
        })
        .collect::<Result<_>>()?;

    let pair_rounds = fits.iter().map(|s| s.rounds).max().unwrap_or(0);
    let curve = fits.first().map(|s| s.curve.clone()).unwrap_or_default();
    let trace = fits.first().map(|s| s.trace.clone()).unwrap_or_default();
    let grids = average(fits.into_iter().map(|s| s.tables).collect());
    for (&(i, j), mut values) in pairs.iter().zip(grids) {
        let dims = (coarse.n_bins[i], coarse.n_bins[j]);
        let mut weights = vec![0usize; dims.0 * dims.1];
        for row in 0..coarse.rows {
            weights[coarse.columns[i][row] as usize * dims.1 + coarse.columns[j][row] as usize] += 1;
        }
        model.intercept += center(&mut values, &weights);
        model.pair_terms.push(PairShapeFunction {
            features: (i, j),
            dims,
            values,
        });
    }
    model.metadata.pair_rounds = pair_rounds;
    model.metadata.pair_val_curve = curve;
    if cfg.record_loss_trace {
        model.metadata.loss_trace.extend(trace.into_iter().skip(1));
    }
    Ok(model)
}

impl GlassBoxModel {
    /// Full two-stage training: quantile bins on the training range, main
    /// effects, pair ranking and selection, then interaction terms.
    pub fn fit(data: &SupervisedMatrix, split: &DataSplit, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let bins = fit_bins(&data.x, split.train.clone(), cfg.max_bins)?;
        let main = train_main_effects(data, split, &bins, cfg)?;
        let n = data.n_features();
        let budget = cfg.interactions.resolve(n);
        if budget == 0 {
            return Ok(main.model);
        }
        let train = apply_bins(&bins, &data.x.slice_rows(split.train.clone()))?;
        let coarse = coarse_matrix(&train, &main.model.coarse_maps);
        let ranking = rank_interaction_pairs(&coarse, &main.residuals)?;
        let selected: Vec<(usize, usize)> = ranking.iter().take(budget).map(|p| p.features).collect();
        let stored: Vec<PairStrength> = ranking.iter().take(budget.max(32)).cloned().collect();
        let mut model = train_interactions(main, data, split, &selected, cfg)?;
        model.metadata.pair_ranking = stored;
        Ok(model)
    }
}
