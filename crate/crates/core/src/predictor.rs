use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Anything that maps a normalized feature row to a normalized forecast.
///
/// Model-agnostic explanation tools (PDP, PFI) accept any implementor.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;

    /// Forecast for one row. Callers guarantee `row.len() == n_features()`.
    fn predict_row(&self, row: &[f64]) -> f64;

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.cols(),
            });
        }
        Ok(x.iter_rows().map(|r| self.predict_row(r)).collect())
    }
}

/// Wraps a closure as a [`Predictor`].
pub struct FnPredictor<F> {
    n_features: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnPredictor<F> {
    pub fn new(n_features: usize, f: F) -> Self {
        Self { n_features, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for FnPredictor<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        (self.f)(row)
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        (**self).predict_row(row)
    }
}
