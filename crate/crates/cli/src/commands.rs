//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use log::info;
use windebm_core::benchmark::{clamp_unit, run_benchmark, train_model, BenchmarkSpec};
use windebm_core::data::{
    chronological_split, correlation_matrix, load_csv, normalize_apply, DataSplit, SupervisedMatrix, TimeSeriesFrame,
};
use windebm_core::explain::{
    export_pair_heatmap, export_shape, global_importance, local_explanation, pdp, pdp_grid, pdp_importance, pfi,
};
use windebm_core::glassbox::GlassBoxModel;
use windebm_core::metrics::evaluate as score;
use windebm_core::persist::{self, SavedModel};
use windebm_core::pipeline::{build_features, prepare};
use windebm_core::{Error, Matrix};

use crate::config::RunConfig;
use crate::{exit, Classified, ExplainMode, SplitChoice};

fn classify(code: u8) -> impl FnOnce(anyhow::Error) -> anyhow::Error {
    move |source| Classified { code, source }.into()
}

fn load_frame(config: &RunConfig) -> Result<TimeSeriesFrame> {
    let path = config.data_path()?;
    let frame = load_csv(path, &config.schema)
        .with_context(|| format!("loading {}", path.display()))
        .map_err(classify(exit::DATA))?;
    if frame.dropped_rows > 0 {
        info!("dropped {} rows with missing values", frame.dropped_rows);
    }
    Ok(frame)
}

fn load_saved(path: &Path) -> Result<SavedModel> {
    persist::load(path)
        .with_context(|| format!("loading model {}", path.display()))
        .map_err(classify(exit::MODEL))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn output(config: &RunConfig, name: &str) -> PathBuf {
    config.output_dir.join(name)
}

fn range(split: &DataSplit, choice: SplitChoice, rows: usize) -> Range<usize> {
    match choice {
        SplitChoice::Train => split.train.clone(),
        SplitChoice::Val => split.val.clone(),
        SplitChoice::Test => split.test.clone(),
        SplitChoice::All => 0..rows,
    }
}

/// Features of the configured data normalized with the model's parameters,
/// checked against the model's feature names.
fn model_data(config: &RunConfig, model: &SavedModel) -> Result<(SupervisedMatrix, DataSplit)> {
    let frame = load_frame(config)?;
    let raw = build_features(&frame, config.feature_kind()).map_err(|e| classify(exit::DATA)(e.into()))?;
    if raw.feature_names != model.feature_names() {
        let detail = format!(
            "model features [{}] do not match data features [{}]",
            model.feature_names().join(", "),
            raw.feature_names.join(", ")
        );
        let err = Error::DimensionMismatch {
            expected: model.feature_names().len(),
            got: raw.n_features(),
        };
        return Err(anyhow::Error::from(err).context(detail)).map_err(classify(exit::MODEL));
    }
    let data = match model.normalization() {
        Some(params) => normalize_apply(&raw, params)?,
        None => raw,
    };
    let split = chronological_split(data.rows(), config.fractions)?;
    Ok((data, split))
}

fn glassbox(model: &SavedModel) -> Result<&GlassBoxModel> {
    match model {
        SavedModel::Windebm(m) => Ok(m),
        other => Err(classify(exit::USAGE)(anyhow::anyhow!(
            "this explanation needs a windebm model, found `{}`",
            other.kind()
        ))),
    }
}

pub fn train(config: &RunConfig, out: Option<PathBuf>) -> Result<()> {
    let frame = load_frame(config)?;
    let prepared = prepare(&frame, config.feature_kind(), config.fractions)?;
    let start = Instant::now();
    let model = train_model(config.model, &prepared.data, &prepared.split, &config.train)?;
    let train_secs = start.elapsed().as_secs_f64();
    let path = out.unwrap_or_else(|| output(config, "model.json"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    persist::save(&model, &path)?;

    let mut log = String::new();
    let _ = writeln!(log, "model={}", config.model);
    let _ = writeln!(log, "model_file={}", path.display());
    let _ = writeln!(log, "checksum={}", persist::model_checksum(&model)?);
    let _ = writeln!(log, "features={}", prepared.data.feature_names.join(","));
    let _ = writeln!(log, "rows_train={}", prepared.split.train.len());
    let _ = writeln!(log, "rows_val={}", prepared.split.val.len());
    let _ = writeln!(log, "rows_test={}", prepared.split.test.len());
    if let SavedModel::Windebm(m) = &model {
        let md = &m.metadata;
        let _ = writeln!(log, "main_rounds={}", md.main_rounds);
        let _ = writeln!(log, "pair_rounds={}", md.pair_rounds);
        let pairs: Vec<String> = m
            .pair_terms
            .iter()
            .map(|p| m.term_label(windebm_core::glassbox::TermId::Pair(p.features.0, p.features.1)))
            .collect();
        let _ = writeln!(log, "pairs={}", pairs.join(";"));
        let curve = |c: &[f64]| c.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(log, "main_val_nrmse={}", curve(&md.main_val_curve));
        let _ = writeln!(log, "pair_val_nrmse={}", curve(&md.pair_val_curve));
    }
    let _ = writeln!(log, "train_secs={train_secs:.3}");
    let log_path = output(config, "train_log.txt");
    write(&log_path, &log)?;
    println!("trained {} in {train_secs:.2}s -> {}", config.model, path.display());
    println!("training log -> {}", log_path.display());
    Ok(())
}

pub fn evaluate(config: &RunConfig, model_path: &Path, split: SplitChoice) -> Result<()> {
    let model = load_saved(model_path)?;
    let (data, ds) = model_data(config, &model)?;
    let rows = range(&ds, split, data.rows());
    let x = data.x.slice_rows(rows.clone());
    let start = Instant::now();
    let mut forecast = model.predict(&x)?;
    let infer_secs = start.elapsed().as_secs_f64();
    clamp_unit(&mut forecast);
    let report = score(&forecast, &data.y[rows]).map_err(|e| classify(exit::DATA)(e.into()))?;
    let csv = format!(
        "model,split,nrmse,nmae,r2,m,infer_secs\n{},{:?},{:.6},{:.6},{:.6},{},{:.6}\n",
        model.kind(),
        split,
        report.nrmse,
        report.nmae,
        report.r2,
        report.m,
        infer_secs
    )
    .to_lowercase();
    write(&output(config, "evaluation.csv"), &csv)?;
    println!("{:<12} {:>8} {:>8} {:>8} {:>8} {:>10}", "model", "NRMSE", "NMAE", "R2", "m", "infer(s)");
    println!(
        "{:<12} {:>8.3} {:>8.3} {:>8.3} {:>8} {:>10.4}",
        model.kind(),
        report.nrmse,
        report.nmae,
        report.r2,
        report.m,
        infer_secs
    );
    Ok(())
}

pub fn predict(config: &RunConfig, model_path: &Path, split: SplitChoice, out: Option<PathBuf>) -> Result<()> {
    let model = load_saved(model_path)?;
    let (data, ds) = model_data(config, &model)?;
    let rows = range(&ds, split, data.rows());
    let mut forecast = model.predict(&data.x.slice_rows(rows.clone()))?;
    clamp_unit(&mut forecast);
    let raw = model.normalization().map(|n| n.invert_target(&forecast));
    let mut csv = String::from(if raw.is_some() {
        "timestamp,forecast,forecast_raw,actual\n"
    } else {
        "timestamp,forecast,actual\n"
    });
    for (k, row) in rows.clone().enumerate() {
        let _ = write!(csv, "{},{}", data.timestamps[row], forecast[k]);
        if let Some(raw) = &raw {
            let _ = write!(csv, ",{}", raw[k]);
        }
        let _ = writeln!(csv, ",{}", data.y[row]);
    }
    let path = out.unwrap_or_else(|| output(config, "predictions.csv"));
    write(&path, &csv)?;
    println!("{} forecasts -> {}", forecast.len(), path.display());
    Ok(())
}

pub fn benchmark(config: &RunConfig) -> Result<()> {
    let frame = load_frame(config)?;
    let spec = BenchmarkSpec {
        models: config.models.clone(),
        features: config.features,
        horizons: config.horizons.clone(),
        fractions: config.fractions,
        train: config.train.clone(),
        repeats: config.repeats,
        seed: config.seed,
    };
    let result = run_benchmark(&frame, &spec)?;
    write(&output(config, "benchmark.csv"), &result.to_csv())?;
    write(&output(config, "benchmark.txt"), &result.to_string())?;
    write(&output(config, "benchmark_timing.csv"), &result.timing_csv())?;
    print!("{result}");
    println!("tables -> {}", config.output_dir.display());
    Ok(())
}

fn feature(model: &GlassBoxModel, name: &str) -> Result<usize> {
    Ok(model.feature_index(name)?)
}

pub fn explain(config: &RunConfig, model_path: &Path, mode: ExplainMode) -> Result<()> {
    let saved = load_saved(model_path)?;
    match mode {
        ExplainMode::Global { split } => {
            let model = glassbox(&saved)?;
            let (data, ds) = model_data(config, &saved)?;
            let rows = range(&ds, split, data.rows());
            let report = global_importance(model, &data.x.slice_rows(rows))?;
            write(&output(config, "global_importance.csv"), &report.to_csv())?;
            print!("{report}");
        }
        ExplainMode::Local { row, split } => {
            let model = glassbox(&saved)?;
            let (data, ds) = model_data(config, &saved)?;
            let rows = range(&ds, split, data.rows());
            if row >= rows.len() {
                return Err(classify(exit::USAGE)(anyhow::anyhow!(
                    "row {row} is outside the {} split ({} rows)",
                    format!("{split:?}").to_lowercase(),
                    rows.len()
                )));
            }
            let r = rows.start + row;
            let e = local_explanation(model, data.x.row(r), Some(data.y[r]))?;
            write(&output(config, &format!("local_{row}.csv")), &e.to_csv())?;
            print!("{e}");
        }
        ExplainMode::Shape { feature: name } => {
            let model = glassbox(&saved)?;
            let f = feature(model, &name)?;
            let export = export_shape(model, f, config.denormalize)?;
            let path = output(config, &format!("shape_{name}.csv"));
            write(&path, &export.to_csv())?;
            println!("shape of {name} -> {}", path.display());
        }
        ExplainMode::Heatmap { pair } => {
            let model = glassbox(&saved)?;
            let (a, b) = (feature(model, &pair[0])?, feature(model, &pair[1])?);
            let export = export_pair_heatmap(model, (a, b), config.denormalize)?;
            let stem = format!("heatmap_{}_{}", pair[0], pair[1]);
            let path = output(config, &format!("{stem}.csv"));
            write(&path, &export.to_csv())?;
            write(&output(config, &format!("{stem}_axes.csv")), &export.axes_csv())?;
            println!("heatmap of {} & {} -> {}", pair[0], pair[1], path.display());
        }
        ExplainMode::Pdp { feature: name, split } => {
            let (data, ds) = model_data(config, &saved)?;
            let f = data.feature_index(&name)?;
            let grid = match &saved {
                SavedModel::Windebm(m) => pdp_grid(m, f)?,
                _ => (0..=20).map(|k| k as f64 / 20.0).collect(),
            };
            let rows = range(&ds, split, data.rows());
            let curve = pdp(saved.as_predictor(), &data.x.slice_rows(rows), f, &grid)?;
            let mut csv = String::from("bin_center,value\n");
            for (g, v) in grid.iter().zip(&curve) {
                let _ = writeln!(csv, "{g},{v}");
            }
            let path = output(config, &format!("pdp_{name}.csv"));
            write(&path, &csv)?;
            println!("pdp of {name} (range {:.6}) -> {}", pdp_importance(&curve), path.display());
        }
        ExplainMode::Pfi { split } => {
            let (data, ds) = model_data(config, &saved)?;
            let rows = range(&ds, split, data.rows());
            let x: Matrix = data.x.slice_rows(rows.clone());
            let report = pfi(
                saved.as_predictor(),
                &x,
                &data.y[rows],
                config.pfi_metric,
                config.pfi_repeats,
                config.seed,
            )?;
            write(&output(config, "pfi.csv"), &report.to_csv(&data.feature_names))?;
            println!("{:>4}  {:<12} {:>12} {:>10}", "rank", "feature", "increase", "std");
            for (k, f) in report.feature_ordering().into_iter().enumerate() {
                let e = &report.entries[f];
                println!("{:>4}  {:<12} {:>12.6} {:>10.6}", k + 1, data.feature_names[f], e.mean, e.std);
            }
        }
        ExplainMode::Correlations => {
            let (data, ds) = model_data(config, &saved)?;
            let train = data.x.slice_rows(ds.train.clone());
            let mut columns: Vec<Vec<f64>> = (0..train.cols()).map(|j| train.column(j)).collect();
            columns.push(data.y[ds.train.clone()].to_vec());
            let mut names = data.feature_names.clone();
            names.push("target".into());
            let m = correlation_matrix(&Matrix::from_columns(&columns)?);
            let mut csv = format!("variable,{}\n", names.join(","));
            for (name, row) in names.iter().zip(&m) {
                let cells: Vec<String> = row
                    .iter()
                    .map(|c| c.map_or_else(String::new, |v| format!("{v:.6}")))
                    .collect();
                let _ = writeln!(csv, "{name},{}", cells.join(","));
            }
            write(&output(config, "correlations.csv"), &csv)?;
            print!("{csv}");
        }
    }
    Ok(())
}
