use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_MAX_BINS: usize = 256;

/// Quantile bins for one feature.
///
/// `cuts` are strictly increasing thresholds; a value `v` falls in bin
/// `#{c in cuts : c <= v}`, so anything below the first cut is bin 0 and
/// anything above the last is the final bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBins {
    pub cuts: Vec<f64>,
    /// Fitting-data population of each bin.
    pub counts: Vec<usize>,
    /// Smallest fitting value in each bin.
    pub lower: Vec<f64>,
    /// Largest fitting value in each bin.
    pub upper: Vec<f64>,
}

impl FeatureBins {
    pub fn n_bins(&self) -> usize {
        self.cuts.len() + 1
    }

    #[inline]
    pub fn bin_of(&self, v: f64) -> u16 {
        self.cuts.partition_point(|&c| c <= v) as u16
    }

    /// Midpoint of each bin's fitted value range.
    pub fn centers(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo + (hi - lo) / 2.0)
            .collect()
    }

    /// Groups consecutive bins into at most `max_groups` groups of roughly
    /// equal population. Returns the group index of every bin.
    pub fn coarsen(&self, max_groups: usize) -> Vec<u16> {
        let n = self.n_bins();
        if n <= max_groups {
            return (0..n as u16).collect();
        }
        let total: usize = self.counts.iter().sum();
        let mut map = Vec::with_capacity(n);
        let mut group = 0usize;
        let mut cum = 0usize;
        for (b, &c) in self.counts.iter().enumerate() {
            map.push(group as u16);
            cum += c;
            // close the group once its share of the population is reached,
            // keeping enough bins for the remaining groups
            let target = (group + 1) * total / max_groups;
            if cum >= target && group + 1 < max_groups && b + 1 < n {
                group += 1;
            }
        }
        map
    }
}

/// Per-feature quantile binning fitted on a training range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningMap {
    pub max_bins: usize,
    pub features: Vec<FeatureBins>,
}

impl BinningMap {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_bins(&self) -> Vec<usize> {
        self.features.iter().map(FeatureBins::n_bins).collect()
    }
}

/// Column-major matrix of bin indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedMatrix {
    pub rows: usize,
    pub columns: Vec<Vec<u16>>,
    pub n_bins: Vec<usize>,
}

impl BinnedMatrix {
    pub fn new(columns: Vec<Vec<u16>>, n_bins: Vec<usize>) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.len() != n_bins.len() {
            return Err(Error::LengthMismatch {
                expected: columns.len(),
                got: n_bins.len(),
            });
        }
        for c in &columns {
            if c.len() != rows {
                return Err(Error::LengthMismatch {
                    expected: rows,
                    got: c.len(),
                });
            }
        }
        Ok(Self {
            rows,
            columns,
            n_bins,
        })
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn select_rows(&self, rows: &[usize]) -> BinnedMatrix {
        BinnedMatrix {
            rows: rows.len(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            n_bins: self.n_bins.clone(),
        }
    }

    pub fn slice_rows(&self, range: Range<usize>) -> BinnedMatrix {
        BinnedMatrix {
            rows: range.len(),
            columns: self.columns.iter().map(|c| c[range.clone()].to_vec()).collect(),
            n_bins: self.n_bins.clone(),
        }
    }
}

fn fit_feature(values: &mut [f64], max_bins: usize) -> FeatureBins {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    let mut cuts: Vec<f64> = Vec::new();
    let mut push_cut = |a: f64, b: f64| {
        let c = a + (b - a) / 2.0;
        if cuts.last().is_none_or(|&last| c > last) {
            cuts.push(c);
        }
    };
    let distinct = 1 + values.windows(2).filter(|w| w[0] < w[1]).count();
    if distinct <= max_bins {
        for w in values.windows(2) {
            if w[0] < w[1] {
                push_cut(w[0], w[1]);
            }
        }
    } else {
        for k in 1..max_bins {
            // first distinct boundary at or after the k-th quantile position
            let mut idx = (k * m / max_bins).max(1);
            while idx < m && values[idx - 1] >= values[idx] {
                idx += 1;
            }
            if idx < m {
                push_cut(values[idx - 1], values[idx]);
            }
        }
    }
    let n_bins = cuts.len() + 1;
    let mut counts = vec![0usize; n_bins];
    let mut lower = vec![f64::INFINITY; n_bins];
    let mut upper = vec![f64::NEG_INFINITY; n_bins];
    for &v in values.iter() {
        let b = cuts.partition_point(|&c| c <= v);
        counts[b] += 1;
        lower[b] = lower[b].min(v);
        upper[b] = upper[b].max(v);
    }
    FeatureBins {
        cuts,
        counts,
        lower,
        upper,
    }
}

/// Fits quantile bins on `range` rows of every column of `x`.
pub fn fit_bins(x: &Matrix, range: Range<usize>, max_bins: usize) -> Result<BinningMap> {
    if max_bins < 2 {
        return Err(Error::param("max_bins must be at least 2"));
    }
    if max_bins > u16::MAX as usize + 1 {
        return Err(Error::param("max_bins must not exceed 65536"));
    }
    if range.is_empty() || range.end > x.rows() {
        return Err(Error::Empty("binning fit range"));
    }
    let features = (0..x.cols())
        .map(|j| {
            let mut values: Vec<f64> = range.clone().map(|i| x.get(i, j)).collect();
            fit_feature(&mut values, max_bins)
        })
        .collect();
    Ok(BinningMap { max_bins, features })
}

/// Maps every value of `x` to its bin index.
pub fn apply_bins(map: &BinningMap, x: &Matrix) -> Result<BinnedMatrix> {
    if x.cols() != map.n_features() {
        return Err(Error::DimensionMismatch {
            expected: map.n_features(),
            got: x.cols(),
        });
    }
    let columns = map
        .features
        .iter()
        .enumerate()
        .map(|(j, fb)| (0..x.rows()).map(|i| fb.bin_of(x.get(i, j))).collect())
        .collect();
    BinnedMatrix::new(columns, map.n_bins())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_values_fill_quartiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let col: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>()).collect();
        let x = Matrix::from_columns(&[col]).unwrap();
        let map = fit_bins(&x, 0..1000, 4).unwrap();
        let b = &map.features[0];
        assert_eq!(b.n_bins(), 4);
        for &c in &b.counts {
            assert!((c as f64 - 250.0).abs() <= 5.0, "count {c}");
        }
        let binned = apply_bins(&map, &x).unwrap();
        let mut recount = [0usize; 4];
        for &v in &binned.columns[0] {
            recount[v as usize] += 1;
        }
        assert_eq!(recount.to_vec(), b.counts);
    }

    #[test]
    fn constant_column_single_bin() {
        let x = Matrix::from_columns(&[vec![2.0; 50]]).unwrap();
        let map = fit_bins(&x, 0..50, 16).unwrap();
        assert_eq!(map.features[0].n_bins(), 1);
        assert!(apply_bins(&map, &x).unwrap().columns[0].iter().all(|&b| b == 0));
    }

    #[test]
    fn out_of_range_clamps_to_extremes() {
        let x = Matrix::from_columns(&[(0..100).map(f64::from).collect::<Vec<_>>()]).unwrap();
        let map = fit_bins(&x, 0..100, 8).unwrap();
        let fb = &map.features[0];
        assert_eq!(fb.bin_of(-5.0), 0);
        assert_eq!(fb.bin_of(1e9) as usize, fb.n_bins() - 1);
    }

    #[test]
    fn max_bins_below_two_rejected() {
        let x = Matrix::from_columns(&[vec![1.0, 2.0]]).unwrap();
        assert!(fit_bins(&x, 0..2, 1).is_err());
    }

    #[test]
    fn few_distinct_values_get_own_bins() {
        let x = Matrix::from_columns(&[vec![1.0, 1.0, 2.0, 3.0, 3.0, 3.0]]).unwrap();
        let map = fit_bins(&x, 0..6, 256).unwrap();
        assert_eq!(map.features[0].counts, vec![2, 1, 3]);
        assert_eq!(map.features[0].centers(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn coarsen_groups_evenly() {
        let x = Matrix::from_columns(&[(0..1024).map(f64::from).collect::<Vec<_>>()]).unwrap();
        let map = fit_bins(&x, 0..1024, 256).unwrap();
        let groups = map.features[0].coarsen(32);
        assert_eq!(groups.len(), 256);
        assert_eq!(*groups.last().unwrap(), 31);
        assert!(groups.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
        let mut sizes = [0usize; 32];
        for &g in &groups {
            sizes[g as usize] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 8));
    }

    proptest! {
        #[test]
        fn binning_is_total_and_monotone(
            values in proptest::collection::vec(-1e3f64..1e3, 1..300),
            probes in proptest::collection::vec(-2e3f64..2e3, 1..50),
            max_bins in 2usize..40,
        ) {
            let n = values.len();
            let x = Matrix::from_columns(&[values]).unwrap();
            let map = fit_bins(&x, 0..n, max_bins).unwrap();
            let fb = &map.features[0];
            prop_assert!(fb.cuts.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(fb.n_bins() <= max_bins);
            prop_assert!(fb.counts.iter().all(|&c| c > 0));
            let mut sorted = probes.clone();
            sorted.sort_by(f64::total_cmp);
            let bins: Vec<u16> = sorted.iter().map(|&v| fb.bin_of(v)).collect();
            prop_assert!(bins.iter().all(|&b| (b as usize) < fb.n_bins()));
            prop_assert!(bins.windows(2).all(|w| w[0] <= w[1]));
            for (b, c) in fb.centers().iter().enumerate() {
                prop_assert_eq!(fb.bin_of(*c) as usize, b);
            }
        }
    }
}
