use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Sample Pearson correlation coefficient.
pub fn pearson_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InsufficientLength {
            needed: 2,
            got: a.len(),
        });
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ConstantInput("pearson correlation of a constant sequence"));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Correlations between every pair of `columns` (features, then optionally
/// the target appended by the caller). Constant columns yield `None`.
pub fn correlation_matrix(columns: &Matrix) -> Vec<Vec<Option<f64>>> {
    let cols: Vec<Vec<f64>> = (0..columns.cols()).map(|j| columns.column(j)).collect();
    cols.iter()
        .map(|a| cols.iter().map(|b| pearson_correlation(a, b).ok()).collect())
        .collect()
}
