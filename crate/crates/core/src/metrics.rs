//! Deterministic point-forecast metrics on normalized values.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check(forecast: &[f64], actual: &[f64]) -> Result<()> {
    if forecast.len() != actual.len() {
        return Err(Error::LengthMismatch {
            expected: actual.len(),
            got: forecast.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::Empty("metric input"));
    }
    Ok(())
}

fn sse(forecast: &[f64], actual: &[f64]) -> f64 {
    forecast
        .iter()
        .zip(actual)
        .map(|(f, a)| (f - a) * (f - a))
        .sum()
}

/// Root mean squared error of normalized values.
pub fn nrmse(forecast: &[f64], actual: &[f64]) -> Result<f64> {
    check(forecast, actual)?;
    Ok((sse(forecast, actual) / actual.len() as f64).sqrt())
}

/// Mean absolute error of normalized values.
pub fn nmae(forecast: &[f64], actual: &[f64]) -> Result<f64> {
    check(forecast, actual)?;
    let sae: f64 = forecast.iter().zip(actual).map(|(f, a)| (f - a).abs()).sum();
    Ok(sae / actual.len() as f64)
}

/// Coefficient of determination `1 - SSE/SST`. Constant actuals are an error.
pub fn r2(forecast: &[f64], actual: &[f64]) -> Result<f64> {
    check(forecast, actual)?;
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let sst: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    if sst == 0.0 || actual.iter().all(|&a| a == actual[0]) {
        return Err(Error::ZeroVariance);
    }
    Ok(1.0 - sse(forecast, actual) / sst)
}

/// The three evaluation metrics over one forecast/actual pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub nrmse: f64,
    pub nmae: f64,
    pub r2: f64,
    /// Number of forecast points.
    pub m: usize,
    pub mean_actual: f64,
}

impl EvalReport {
    /// Flat `key=value` record, space separated.
    pub fn to_record(&self) -> String {
        format!(
            "nrmse={:.6} nmae={:.6} r2={:.6} m={} mean_actual={:.6}",
            self.nrmse, self.nmae, self.r2, self.m, self.mean_actual
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_record())
    }
}

pub fn evaluate(forecast: &[f64], actual: &[f64]) -> Result<EvalReport> {
    Ok(EvalReport {
        nrmse: nrmse(forecast, actual)?,
        nmae: nmae(forecast, actual)?,
        r2: r2(forecast, actual)?,
        m: actual.len(),
        mean_actual: actual.iter().sum::<f64>() / actual.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_forecast() {
        let a = [0.1, 0.5, 0.9];
        let r = evaluate(&a, &a).unwrap();
        assert_eq!((r.nrmse, r.nmae, r.r2), (0.0, 0.0, 1.0));
    }

    #[test]
    fn hand_cases() {
        let r = evaluate(&[0.5, 0.5], &[0.0, 1.0]).unwrap();
        assert_eq!((r.nrmse, r.nmae, r.r2), (0.5, 0.5, 0.0));
        assert_eq!(nrmse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!((nmae(&[0.2], &[0.5]).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_variance_and_shape_errors() {
        let err = r2(&[0.1, 0.2, 0.3], &[0.4, 0.4, 0.4]).unwrap_err();
        assert!(err.to_string().contains("zero variance"));
        assert!(matches!(nrmse(&[0.1], &[0.1, 0.2]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(nmae(&[], &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn record_is_flat_key_value() {
        let r = evaluate(&[0.5, 0.5], &[0.0, 1.0]).unwrap();
        assert_eq!(
            r.to_record(),
            "nrmse=0.500000 nmae=0.500000 r2=0.000000 m=2 mean_actual=0.500000"
        );
    }

    proptest! {
        #[test]
        fn permutation_invariant(
            pairs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..50),
            rot in 0usize..50,
        ) {
            let f: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let a: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let k = rot % f.len();
            let mut f2 = f.clone();
            let mut a2 = a.clone();
            f2.rotate_left(k);
            a2.rotate_left(k);
            prop_assert!((nrmse(&f, &a).unwrap() - nrmse(&f2, &a2).unwrap()).abs() < 1e-12);
            prop_assert!((nmae(&f, &a).unwrap() - nmae(&f2, &a2).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn r2_improves_when_a_forecast_moves_toward_actual(
            pairs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3..30),
            idx in 0usize..30,
            step in 0.05f64..0.95,
        ) {
            let f: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let a: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let i = idx % f.len();
            prop_assume!((f[i] - a[i]).abs() > 1e-6);
            if let Ok(before) = r2(&f, &a) {
                let mut g = f.clone();
                g[i] += step * (a[i] - f[i]);
                prop_assert!(r2(&g, &a).unwrap() > before);
            }
        }
    }
}
