//! Sample statistics used by the estimators and the harness.

use crate::rng::compensated_sum;
use serde::{Deserialize, Serialize};

/// How standard errors are computed for a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorScheme {
    /// Independent draws.
    Iid,
    /// Correlated chain: batch means with this many batches.
    BatchMeans(usize),
}

pub const DEFAULT_BATCHES: usize = 50;

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    compensated_sum(values.iter().map(|v| (v - m) * (v - m))) / (n - 1) as f64
}

/// Mean and its standard error (sample sd / sqrt(count)).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let m = mean(values);
    if n < 2 {
        return (m, 0.0);
    }
    (m, (variance(values) / n as f64).sqrt())
}

/// Mean vector and covariance of the mean for several aligned columns.
pub fn mean_cov(columns: &[&[f64]], scheme: ErrorScheme) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = columns.len();
    let n = columns.first().map_or(0, |c| c.len());
    assert!(columns.iter().all(|c| c.len() == n), "ragged columns");
    let means: Vec<f64> = columns.iter().map(|c| mean(c)).collect();
    let mut cov = vec![vec![0.0; d]; d];
    if n < 2 {
        return (means, cov);
    }
    match scheme {
        ErrorScheme::BatchMeans(nb) if nb >= 2 && n >= 2 * nb => {
            let size = n / nb;
            let batch: Vec<Vec<f64>> = columns
                .iter()
                .map(|c| {
                    (0..nb)
                        .map(|b| mean(&c[b * size..(b + 1) * size]))
                        .collect()
                })
                .collect();
            let bm: Vec<f64> = batch.iter().map(|b| mean(b)).collect();
            for i in 0..d {
                for j in 0..=i {
                    let s = compensated_sum(
                        (0..nb).map(|b| (batch[i][b] - bm[i]) * (batch[j][b] - bm[j])),
                    );
                    let v = s / ((nb * (nb - 1)) as f64);
                    cov[i][j] = v;
                    cov[j][i] = v;
                }
            }
        }
        _ => {
            for i in 0..d {
                for j in 0..=i {
                    let (ci, cj) = (columns[i], columns[j]);
                    let s =
                        compensated_sum((0..n).map(|k| (ci[k] - means[i]) * (cj[k] - means[j])));
                    let v = s / ((n - 1) as f64 * n as f64);
                    cov[i][j] = v;
                    cov[j][i] = v;
                }
            }
        }
    }
    (means, cov)
}

/// Mean and standard error under an error scheme.
pub fn mean_se_with(values: &[f64], scheme: ErrorScheme) -> (f64, f64) {
    let (m, c) = mean_cov(&[values], scheme);
    (m[0], c[0][0].max(0.0).sqrt())
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Hill estimator of the tail index from log-values `ln Y`, using the top `k`.
/// Returns `(alpha, stderr)`; a light (non-Pareto) tail gives a large alpha.
pub fn hill_tail_index(log_values: &[f64], k: usize) -> (f64, f64) {
    let mut v: Vec<f64> = log_values
        .iter()
        .copied()
        .filter(|x| x.is_finite())
        .collect();
    if v.len() <= k || k == 0 {
        return (f64::NAN, f64::NAN);
    }
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let threshold = v[k];
    let gamma = compensated_sum(v[..k].iter().map(|x| x - threshold)) / k as f64;
    if gamma <= 0.0 {
        return (f64::INFINITY, 0.0);
    }
    let alpha = 1.0 / gamma;
    (alpha, alpha / (k as f64).sqrt())
}

/// Ordinary least-squares slope of `y` on `x` with its standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len();
    assert_eq!(n, y.len());
    if n < 3 {
        return (f64::NAN, f64::NAN);
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = compensated_sum(
        x.iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2)),
    );
    let se = (rss / (n - 2) as f64 / sxx).sqrt();
    (slope, se)
}

/// Empirical quantile by linear interpolation of order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// `ln(mean(exp(values)))` computed without overflow.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s = compensated_sum(values.iter().map(|v| (v - m).exp()));
    m + (s / values.len() as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_point_estimate() {
        let (lo, hi) = wilson_interval(30, 100, 3.0);
        assert!(lo < 0.3 && 0.3 < hi);
        let (lo0, hi0) = wilson_interval(0, 1000, 3.0);
        assert_eq!(lo0, 0.0);
        assert!(hi0 > 0.0 && hi0 < 0.01);
    }

    #[test]
    fn batch_means_match_iid_for_independent_data() {
        let v: Vec<f64> = (0..10_000)
            .map(|i| ((crate::rng::splitmix64(i) >> 11) as f64) / (1u64 << 53) as f64)
            .collect();
        let (_, se_iid) = mean_se_with(&v, ErrorScheme::Iid);
        let (_, se_bm) = mean_se_with(&v, ErrorScheme::BatchMeans(50));
        assert!((se_bm / se_iid - 1.0).abs() < 0.35, "{se_bm} vs {se_iid}");
    }

    #[test]
    fn hill_recovers_pareto_index() {
        // ln Y = E / alpha for E ~ Exp(1) gives a Pareto(alpha) tail.
        let alpha = 1.5;
        let logs: Vec<f64> = (0..100_000u64)
            .map(|i| {
                let u = ((crate::rng::splitmix64(i) >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
                -u.ln() / alpha
            })
            .collect();
        let (a, se) = hill_tail_index(&logs, 1000);
        assert!((a - alpha).abs() < 4.0 * se, "{a} ± {se}");
    }

    #[test]
    fn log_mean_exp_is_stable() {
        let v = [1000.0, 1000.0];
        assert!((log_mean_exp(&v) - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn ols_exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let (s, se) = ols_slope(&x, &y);
        assert!((s - 2.0).abs() < 1e-12 && se < 1e-10);
    }
}
