//! Run configuration: an INI-style file of `[section]` headers and
//! `key = value` lines, overridden by `--set section.key=value` flags.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use windebm_core::benchmark::{FeatureMode, ModelKind};
use windebm_core::data::{CsvSchema, ExogenousColumns, FeatureKind, SplitFractions, TimestampFormat};
use windebm_core::glassbox::{InteractionBudget, TrainConfig};

/// Every accepted key with its default; `None` means required when used.
const KEYS: &[(&str, Option<&str>)] = &[
    ("data.path", None),
    ("data.timestamp_column", Some("timestamp")),
    ("data.target_column", Some("power")),
    ("data.exogenous", Some("all")),
    ("data.timestamp_format", Some("iso8601")),
    ("data.delimiter", Some(",")),
    ("features.mode", Some("exogenous")),
    ("features.n_lags", Some("24")),
    ("features.horizon_steps", Some("1")),
    ("features.horizons", Some("")),
    ("split.train", Some("0.8")),
    ("split.val", Some("0.1")),
    ("split.test", Some("0.1")),
    ("model.kind", Some("windebm")),
    ("train.learning_rate", Some("0.001")),
    ("train.max_rounds", Some("5000")),
    ("train.early_stop_tol", Some("0.0001")),
    ("train.early_stop_patience", Some("50")),
    ("train.min_samples_split", Some("5")),
    ("train.main_depth", Some("2")),
    ("train.pair_depth", Some("3")),
    ("train.max_bins", Some("256")),
    ("train.pair_bins", Some("32")),
    ("train.interactions", Some("auto")),
    ("train.bagging_count", Some("0")),
    ("train.bag_fraction", Some("0.85")),
    ("run.seed", Some("0")),
    ("run.output_dir", Some("out")),
    ("run.repeats", Some("1")),
    ("run.models", Some("windebm,windebm-no-interactions,lr,rt,pm")),
    ("explain.pfi_repeats", Some("5")),
    ("explain.pfi_metric", Some("nrmse")),
    ("explain.denormalize", Some("false")),
];

/// A malformed or inconsistent configuration.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

fn check_key(key: &str) -> Result<()> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        err(format!("unknown key `{key}`"))
    }
}

/// Raw key/value settings after merging file and overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Parses config text. `base` resolves a relative `data.path`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    return err(format!("line {}: unterminated section header", n + 1));
                };
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`", n + 1));
            };
            let key = key.trim();
            let full = if section.is_empty() || key.contains('.') {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            check_key(&full).map_err(|e| ConfigError(format!("line {}: {}", n + 1, e.0)))?;
            let mut value = value.trim().to_string();
            if full == "data.path" {
                if let Some(base) = base {
                    let p = Path::new(&value);
                    if p.is_relative() {
                        value = base.join(p).to_string_lossy().into_owned();
                    }
                }
            }
            values.insert(full, value);
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    /// Applies one `section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let Some((key, value)) = assignment.split_once('=') else {
            return err(format!("override `{assignment}` is not `section.key=value`"));
        };
        let key = key.trim();
        check_key(key)?;
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        debug_assert!(KEYS.iter().any(|(k, _)| *k == key), "undeclared key {key}");
        self.values
            .get(key)
            .map(String::as_str)
            .or_else(|| KEYS.iter().find(|(k, _)| *k == key).and_then(|(_, d)| *d))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let raw = self.get(key).ok_or_else(|| ConfigError(format!("`{key}` is required")))?;
        raw.parse()
            .map_err(|e| ConfigError(format!("`{key}` = `{raw}`: {e}")))
    }

    fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .unwrap_or("")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()
    }
}

/// Typed run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_path: Option<PathBuf>,
    pub schema: CsvSchema,
    pub features: FeatureMode,
    pub horizon_steps: usize,
    pub horizons: Vec<usize>,
    pub fractions: SplitFractions,
    pub model: ModelKind,
    pub train: TrainConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub repeats: usize,
    pub models: Vec<ModelKind>,
    pub pfi_repeats: usize,
    pub pfi_metric: windebm_core::explain::Metric,
    pub denormalize: bool,
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let timestamp_format = match s.get("data.timestamp_format").unwrap_or("iso8601") {
            "iso8601" => TimestampFormat::Iso8601,
            "epoch" | "epoch_seconds" => TimestampFormat::EpochSeconds,
            other => match other.strip_prefix("pattern:") {
                Some(p) => TimestampFormat::Pattern(p.to_string()),
                None => return err(format!("`data.timestamp_format` = `{other}`: use iso8601, epoch or pattern:<strftime>")),
            },
        };
        let delimiter = match s.get("data.delimiter").unwrap_or(",") {
            "tab" | "\\t" => b'\t',
            d if d.len() == 1 => d.as_bytes()[0],
            d => return err(format!("`data.delimiter` = `{d}` must be one character")),
        };
        let exogenous = match s.get("data.exogenous").unwrap_or("all") {
            "all" => ExogenousColumns::All,
            _ => ExogenousColumns::Named(s.list("data.exogenous")),
        };
        let schema = CsvSchema::new(
            s.get("data.timestamp_column").unwrap_or("timestamp"),
            s.get("data.target_column").unwrap_or("power"),
        )
        .with_exogenous(exogenous)
        .with_timestamp_format(timestamp_format)
        .with_delimiter(delimiter);

        let features = match s.get("features.mode").unwrap_or("exogenous") {
            "lags" => FeatureMode::Lags {
                n_lags: s.parsed("features.n_lags")?,
            },
            "exogenous" => FeatureMode::Exogenous,
            other => return err(format!("`features.mode` = `{other}`: use lags or exogenous")),
        };
        let horizon_steps: usize = s.parsed("features.horizon_steps")?;
        let mut horizons = Vec::new();
        for h in s.list("features.horizons") {
            horizons.push(h.parse().map_err(|e| ConfigError(format!("`features.horizons` entry `{h}`: {e}")))?);
        }
        if horizons.is_empty() {
            horizons.push(horizon_steps);
        }

        let interactions = match s.get("train.interactions").unwrap_or("auto") {
            "auto" => InteractionBudget::Auto,
            "all" => InteractionBudget::All,
            "none" => InteractionBudget::Top(0),
            k => InteractionBudget::Top(
                k.parse()
                    .map_err(|_| ConfigError(format!("`train.interactions` = `{k}`: use auto, all, none or a count")))?,
            ),
        };
        let seed: u64 = s.parsed("run.seed")?;
        let train = TrainConfig {
            learning_rate: s.parsed("train.learning_rate")?,
            max_rounds: s.parsed("train.max_rounds")?,
            early_stop_tol: s.parsed("train.early_stop_tol")?,
            early_stop_patience: s.parsed("train.early_stop_patience")?,
            min_samples_split: s.parsed("train.min_samples_split")?,
            main_depth: s.parsed("train.main_depth")?,
            pair_depth: s.parsed("train.pair_depth")?,
            max_bins: s.parsed("train.max_bins")?,
            pair_bins: s.parsed("train.pair_bins")?,
            interactions,
            bagging_count: s.parsed("train.bagging_count")?,
            bag_fraction: s.parsed("train.bag_fraction")?,
            seed,
            record_loss_trace: false,
        };
        train.validate().map_err(|e| ConfigError(e.to_string()))?;

        let model: ModelKind = s.parsed("model.kind")?;
        let mut models = Vec::new();
        for m in s.list("run.models") {
            models.push(m.parse::<ModelKind>().map_err(|e| ConfigError(format!("`run.models`: {e}")))?);
        }
        let lag_mode = matches!(features, FeatureMode::Lags { .. });
        if model == ModelKind::Pm && !lag_mode {
            return err("model `pm` requires `features.mode = lags`");
        }
        let repeats: usize = s.parsed("run.repeats")?;
        if repeats == 0 {
            return err("`run.repeats` must be at least 1");
        }
        let config = Self {
            data_path: s.get("data.path").map(PathBuf::from),
            schema,
            features,
            horizon_steps,
            horizons,
            fractions: SplitFractions {
                train: s.parsed("split.train")?,
                val: s.parsed("split.val")?,
                test: s.parsed("split.test")?,
            },
            model,
            train,
            seed,
            output_dir: PathBuf::from(s.get("run.output_dir").unwrap_or("out")),
            repeats,
            models,
            pfi_repeats: s.parsed("explain.pfi_repeats")?,
            pfi_metric: s.parsed("explain.pfi_metric")?,
            denormalize: s.parsed("explain.denormalize")?,
        };
        Ok(config)
    }

    /// The feature layout for the single-horizon commands.
    pub fn feature_kind(&self) -> FeatureKind {
        match self.features {
            FeatureMode::Lags { n_lags } => FeatureKind::Lags {
                n_lags,
                horizon_steps: self.horizon_steps,
            },
            FeatureMode::Exogenous => FeatureKind::Exogenous,
        }
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data_path
            .as_deref()
            .ok_or_else(|| ConfigError("`data.path` is required".into()))
    }
}
