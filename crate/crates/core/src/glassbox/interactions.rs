use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::BinnedMatrix;
use crate::error::{Error, Result};

/// Interaction strength of a feature pair, `features.0 < features.1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStrength {
    pub features: (usize, usize),
    pub strength: f64,
}

const BACKFIT_ITERATIONS: usize = 500;
const BACKFIT_TOL: f64 = 1e-10;

/// Sum of squares a pair grid explains beyond the best additive fit of its
/// two features: with cell counts `n` and cell means `m`,
/// `Σ n_ab (m_ab - g_a - h_b)²` for the weighted least-squares `g`, `h`.
fn interaction_ss(dims: (usize, usize), sums: &[f64], counts: &[usize]) -> f64 {
    let (ra, rb) = dims;
    let mean: Vec<f64> = sums
        .iter()
        .zip(counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let mut n_a = vec![0.0; ra];
    let mut n_b = vec![0.0; rb];
    for a in 0..ra {
        for b in 0..rb {
            let c = counts[a * rb + b] as f64;
            n_a[a] += c;
            n_b[b] += c;
        }
    }
    let mut g = vec![0.0; ra];
    let mut h = vec![0.0; rb];
    for _ in 0..BACKFIT_ITERATIONS {
        let mut change: f64 = 0.0;
        for a in 0..ra {
            if n_a[a] == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for b in 0..rb {
                let c = counts[a * rb + b] as f64;
                acc += c * (mean[a * rb + b] - h[b]);
            }
            let v = acc / n_a[a];
            change = change.max((v - g[a]).abs());
            g[a] = v;
        }
        for b in 0..rb {
            if n_b[b] == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for a in 0..ra {
                let c = counts[a * rb + b] as f64;
                acc += c * (mean[a * rb + b] - g[a]);
            }
            let v = acc / n_b[b];
            change = change.max((v - h[b]).abs());
            h[b] = v;
        }
        if change < BACKFIT_TOL {
            break;
        }
    }
    let mut ss = 0.0;
    for a in 0..ra {
        for b in 0..rb {
            let c = counts[a * rb + b];
            if c > 0 {
                let d = mean[a * rb + b] - g[a] - h[b];
                ss += c as f64 * d * d;
            }
        }
    }
    ss
}

/// Scores every feature pair on the coarse grid of `coarse` against
/// `residuals`, strongest first; ties keep lexicographic pair order.
pub fn rank_interaction_pairs(coarse: &BinnedMatrix, residuals: &[f64]) -> Result<Vec<PairStrength>> {
    let n = coarse.n_features();
    if n < 2 {
        return Err(Error::param("interaction ranking needs at least two features"));
    }
    if residuals.len() != coarse.rows {
        return Err(Error::LengthMismatch {
            expected: coarse.rows,
            got: residuals.len(),
        });
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let mut ranked: Vec<PairStrength> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let dims = (coarse.n_bins[i], coarse.n_bins[j]);
            let mut sums = vec![0.0; dims.0 * dims.1];
            let mut counts = vec![0usize; dims.0 * dims.1];
            for ((&a, &b), &r) in coarse.columns[i].iter().zip(&coarse.columns[j]).zip(residuals) {
                let c = a as usize * dims.1 + b as usize;
                sums[c] += r;
                counts[c] += 1;
            }
            PairStrength {
                features: (i, j),
                strength: interaction_ss(dims, &sums, &counts),
            }
        })
        .collect();
    ranked.sort_by(|x, y| {
        y.strength
            .total_cmp(&x.strength)
            .then(x.features.cmp(&y.features))
    });
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    /// Residual sum of squares of a dummy-coded additive regression on the
    /// raw rows, minus that of the full cell-means model.
    fn oracle(a: &[u16], b: &[u16], ra: usize, rb: usize, y: &[f64]) -> f64 {
        let n = y.len();
        let p = 1 + (ra - 1) + (rb - 1);
        let mut x = DMatrix::<f64>::zeros(n, p);
        for r in 0..n {
            x[(r, 0)] = 1.0;
            if a[r] > 0 {
                x[(r, a[r] as usize)] = 1.0;
            }
            if b[r] > 0 {
                x[(r, ra - 1 + b[r] as usize)] = 1.0;
            }
        }
        let yv = DVector::from_column_slice(y);
        let svd = x.clone().svd(true, true);
        let beta = svd.solve(&yv, 1e-10).unwrap();
        let additive_rss = (&yv - &x * beta).norm_squared();
        let mut sums = vec![0.0; ra * rb];
        let mut cnt = vec![0.0; ra * rb];
        for r in 0..n {
            let c = a[r] as usize * rb + b[r] as usize;
            sums[c] += y[r];
            cnt[c] += 1.0;
        }
        let full_rss: f64 = (0..n)
            .map(|r| {
                let c = a[r] as usize * rb + b[r] as usize;
                (y[r] - sums[c] / cnt[c]).powi(2)
            })
            .sum();
        additive_rss - full_rss
    }

    fn matrix(cols: Vec<Vec<u16>>, bins: Vec<usize>) -> BinnedMatrix {
        BinnedMatrix::new(cols, bins).unwrap()
    }

    #[test]
    fn additive_signal_has_no_interaction() {
        let a: Vec<u16> = (0..60).map(|r| (r % 4) as u16).collect();
        let b: Vec<u16> = (0..60).map(|r| ((r / 4) % 3) as u16).collect();
        let y: Vec<f64> = a.iter().zip(&b).map(|(&p, &q)| p as f64 * 0.7 - q as f64).collect();
        let m = matrix(vec![a, b], vec![4, 3]);
        let ranked = rank_interaction_pairs(&m, &y).unwrap();
        assert!(ranked[0].strength.abs() < 1e-12);
    }

    #[test]
    fn product_pair_ranks_first() {
        let a: Vec<u16> = (0..120).map(|r| (r % 4) as u16).collect();
        let b: Vec<u16> = (0..120).map(|r| ((r / 4) % 5) as u16).collect();
        let c: Vec<u16> = (0..120).map(|r| ((r * 7) % 3) as u16).collect();
        let y: Vec<f64> = (0..120)
            .map(|r| a[r] as f64 * b[r] as f64 + c[r] as f64)
            .collect();
        let m = matrix(vec![a, b, c], vec![4, 5, 3]);
        let ranked = rank_interaction_pairs(&m, &y).unwrap();
        assert_eq!(ranked[0].features, (0, 1));
        assert_eq!(ranked.len(), 3);
    }

    #[test]
    fn single_feature_is_rejected() {
        let m = matrix(vec![vec![0, 1]], vec![2]);
        assert!(rank_interaction_pairs(&m, &[0.0, 1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn strength_matches_least_squares_oracle(
            rows in proptest::collection::vec((0u16..3, 0u16..4, -5.0f64..5.0), 30..80)
        ) {
            // every cell populated keeps the dummy design at full rank
            let mut rows = rows;
            for a in 0..3u16 {
                for b in 0..4u16 {
                    rows.push((a, b, (a as f64) - (b as f64) * 0.5));
                }
            }
            let a: Vec<u16> = rows.iter().map(|r| r.0).collect();
            let b: Vec<u16> = rows.iter().map(|r| r.1).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let expected = oracle(&a, &b, 3, 4, &y);
            let m = matrix(vec![a, b], vec![3, 4]);
            let got = rank_interaction_pairs(&m, &y).unwrap()[0].strength;
            prop_assert!((got - expected).abs() <= 1e-6 * (1.0 + expected.abs()), "{got} vs {expected}");
        }
    }
}
