//! Synthetic fixtures shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use windebm_core::data::{
    chronological_split, normalize_fit_apply, DataSplit, FeatureKind, SplitFractions, SupervisedMatrix,
    TimeSeriesFrame,
};
use windebm_core::Matrix;

/// `y = sin(2π x0) + 0.5 x1 + x2·x3 + ε`, six uniform features of which x4 and
/// x5 are pure noise, ε ~ N(0, 0.05²). Normalized on the training split.
pub fn interaction_dataset(rows: usize, seed: u64) -> (SupervisedMatrix, DataSplit) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut data = Vec::with_capacity(rows * 6);
    let mut y = Vec::with_capacity(rows);
    for _ in 0..rows {
        let x: [f64; 6] = std::array::from_fn(|_| rng.gen::<f64>());
        y.push((2.0 * std::f64::consts::PI * x[0]).sin() + 0.5 * x[1] + x[2] * x[3] + noise.sample(&mut rng));
        data.extend_from_slice(&x);
    }
    let names = (1..=6).map(|i| format!("x{i}")).collect();
    let raw = SupervisedMatrix::new(
        Matrix::new(rows, 6, data).unwrap(),
        y,
        names,
        (0..rows as i64).collect(),
        FeatureKind::Exogenous,
    )
    .unwrap();
    let split = chronological_split(rows, SplitFractions::default()).unwrap();
    (normalize_fit_apply(&raw, split.train.clone()).unwrap(), split)
}

/// AR(1) series `s_t = 0.97 s_{t-1} + η_t`, shifted positive, as a frame with
/// half-hourly timestamps.
pub fn ar1_frame(len: usize, seed: u64) -> TimeSeriesFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eta = Normal::new(0.0, 0.1).unwrap();
    let mut s = 0.0;
    let target: Vec<f64> = (0..len)
        .map(|_| {
            s = 0.97 * s + eta.sample(&mut rng);
            s + 5.0
        })
        .collect();
    let ts = (0..len as i64).map(|t| t * 1800).collect();
    TimeSeriesFrame::new(ts, "power", target, vec![]).unwrap()
}
