use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Train/validation/test fractions; must be positive and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

/// Contiguous, ordered row ranges. Train precedes validation precedes test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplit {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl DataSplit {
    pub fn len(&self) -> usize {
        self.test.end
    }

    pub fn is_empty(&self) -> bool {
        self.test.end == 0
    }
}

/// Splits `m` rows chronologically. Train and validation get
/// `floor(m * fraction)` rows; the remainder goes to test.
pub fn chronological_split(m: usize, fractions: SplitFractions) -> Result<DataSplit> {
    let SplitFractions { train, val, test } = fractions;
    if [train, val, test].iter().any(|f| !f.is_finite() || *f <= 0.0) {
        return Err(Error::param("split fractions must be positive"));
    }
    if ((train + val + test) - 1.0).abs() > 1e-9 {
        return Err(Error::param("split fractions must sum to 1"));
    }
    // guard against 0.8 * 10 landing at 7.999…
    let floor = |f: f64| ((m as f64) * f + 1e-9).floor() as usize;
    let n_train = floor(train);
    let n_val = floor(val);
    if n_train == 0 || n_val == 0 || n_train + n_val >= m {
        return Err(Error::InsufficientLength {
            needed: 10.max(m + 1),
            got: m,
        });
    }
    Ok(DataSplit {
        train: 0..n_train,
        val: n_train..n_train + n_val,
        test: n_train + n_val..m,
    })
}
