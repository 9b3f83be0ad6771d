//! Time-series ingestion and the supervised-learning data pipeline.

mod binning;
mod features;
mod frame;
mod normalize;
mod split;
mod stats;

pub use binning::{apply_bins, fit_bins, BinnedMatrix, BinningMap, FeatureBins, DEFAULT_MAX_BINS};
pub use features::{build_exogenous_features, build_lag_features, FeatureKind, SupervisedMatrix};
pub use frame::{load_csv, read_csv, CsvSchema, ExogenousColumns, TimeSeriesFrame, TimestampFormat};
pub use normalize::{normalize_apply, normalize_fit_apply, MinMax, NormParams};
pub use split::{chronological_split, DataSplit, SplitFractions};
pub use stats::{correlation_matrix, pearson_correlation};
