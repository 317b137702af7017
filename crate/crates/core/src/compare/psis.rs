//! Pareto-smoothed importance sampling and leave-one-out cross-validation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::stats::{log_sum_exp, sample_variance};
use crate::{Error, Result};

/// Pareto k above which a PSIS estimate is flagged as unreliable.
pub const PARETO_K_THRESHOLD: f64 = 0.7;

/// Generalized Pareto fit with shape `k` (heavy tails for `k > 0`) and scale `sigma`.
///
/// `k = -inf` marks a degenerate tail sample (all values equal), which is
/// treated as having no heavy tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpdFit {
    pub k: f64,
    pub sigma: f64,
}

impl GpdFit {
    pub fn has_tail(&self) -> bool {
        self.k.is_finite()
    }

    /// Quantile function at probability `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        if self.k == 0.0 {
            -self.sigma * (-p).ln_1p()
        } else {
            self.sigma * (-self.k * (-p).ln_1p()).exp_m1() / self.k
        }
    }
}

/// Fits a generalized Pareto distribution to positive exceedances with the
/// profile-likelihood quadrature estimator of Zhang and Stephens (2009),
/// followed by the weakly informative adjustment `k <- (M k + 5) / (M + 10)`.
pub fn fit_gpd(tail: &[f64]) -> Result<GpdFit> {
    let n = tail.len();
    if n < 5 {
        return Err(Error::InvalidInput(format!("GPD fit needs at least 5 tail values, got {n}")));
    }
    let mut x = tail.to_vec();
    x.sort_by(f64::total_cmp);
    if x[0] == x[n - 1] {
        return Ok(GpdFit {
            k: f64::NEG_INFINITY,
            sigma: f64::MIN_POSITIVE,
        });
    }

    let prior = 3.0;
    let m = 30 + (n as f64).sqrt().floor() as usize;
    let x_star = x[((n as f64) / 4.0 + 0.5).floor() as usize - 1];
    let x_max = x[n - 1];

    let profile = |theta: f64| -> f64 {
        let k = x.iter().map(|&v| (-theta * v).ln_1p()).sum::<f64>() / n as f64;
        n as f64 * ((-theta / k).ln() - k - 1.0)
    };

    let thetas: Vec<f64> = (1..=m)
        .map(|j| 1.0 / x_max + (1.0 - (m as f64 / (j as f64 - 0.5)).sqrt()) / prior / x_star)
        .collect();
    let log_lik: Vec<f64> = thetas.iter().map(|&t| profile(t)).collect();
    let norm = log_sum_exp(log_lik.iter().copied());
    let theta_hat: f64 = thetas
        .iter()
        .zip(&log_lik)
        .map(|(t, l)| {
            let w = (l - norm).exp();
            if w.is_finite() {
                t * w
            } else {
                0.0
            }
        })
        .sum();

    let k = x.iter().map(|&v| (-theta_hat * v).ln_1p()).sum::<f64>() / n as f64;
    let sigma = -k / theta_hat;
    let k = (k * n as f64 + 5.0) / (n as f64 + 10.0);
    let k = if k.is_nan() { f64::INFINITY } else { k };
    Ok(GpdFit { k, sigma })
}

/// Result of smoothing one vector of log importance ratios.
#[derive(Clone, Debug, PartialEq)]
pub struct PsisWeights {
    /// Smoothed and truncated log weights, shifted so the largest raw ratio is 0.
    pub log_weights: Vec<f64>,
    pub pareto_k: f64,
}

/// Number of draws in the smoothed tail: `min(ceil(0.2 S), ceil(3 sqrt(S)))`.
pub fn tail_length(n_draws: usize) -> usize {
    let s = n_draws as f64;
    (0.2 * s).ceil().min((3.0 * s.sqrt()).ceil()) as usize
}

/// Replaces the largest log ratios by expected order statistics of a fitted
/// generalized Pareto tail and truncates at the largest raw ratio.
pub fn psis_smooth(log_ratios: &[f64]) -> Result<PsisWeights> {
    let s = log_ratios.len();
    let max = log_ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lw: Vec<f64> = log_ratios.iter().map(|v| v - max).collect();
    let m = tail_length(s);

    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| lw[a].total_cmp(&lw[b]));
    let mut pareto_k = f64::NEG_INFINITY;
    if m >= 5 && m < s {
        let cutoff = lw[order[s - m - 1]];
        let exp_cutoff = cutoff.exp();
        let tail_idx = &order[s - m..];
        let exceed: Vec<f64> = tail_idx.iter().map(|&i| lw[i].exp() - exp_cutoff).collect();
        let fit = fit_gpd(&exceed)?;
        pareto_k = fit.k;
        if fit.has_tail() {
            for (j, &i) in tail_idx.iter().enumerate() {
                let p = (j as f64 + 0.5) / m as f64;
                lw[i] = (fit.quantile(p) + exp_cutoff).ln();
            }
        }
    }
    for v in lw.iter_mut() {
        if *v > 0.0 {
            *v = 0.0;
        }
    }
    Ok(PsisWeights {
        log_weights: lw,
        pareto_k,
    })
}

/// Draws-by-observations matrix of pointwise log-likelihoods, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LogLikMatrix {
    pub n_draws: usize,
    pub n_obs: usize,
    pub values: Vec<f64>,
}

impl LogLikMatrix {
    pub fn new(n_draws: usize, n_obs: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_draws * n_obs {
            return Err(Error::InvalidInput(format!(
                "{} values for a {n_draws} x {n_obs} matrix",
                values.len()
            )));
        }
        Ok(LogLikMatrix { n_draws, n_obs, values })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_draws = rows.len();
        let n_obs = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_obs) {
            return Err(Error::InvalidInput("ragged log-likelihood rows".into()));
        }
        LogLikMatrix::new(n_draws, n_obs, rows.concat())
    }

    pub fn get(&self, draw: usize, obs: usize) -> f64 {
        self.values[draw * self.n_obs + obs]
    }

    pub fn column(&self, obs: usize) -> Vec<f64> {
        (0..self.n_draws).map(|s| self.get(s, obs)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.values.chunks(self.n_obs.max(1)).map(|r| r.iter().sum()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LooResult {
    pub elpd_loo: f64,
    pub se: f64,
    pub pointwise: Vec<f64>,
    pub pareto_k: Vec<f64>,
}

impl LooResult {
    fn from_pointwise(pointwise: Vec<f64>, pareto_k: Vec<f64>) -> Self {
        let n = pointwise.len() as f64;
        LooResult {
            elpd_loo: pointwise.iter().sum(),
            se: (n * sample_variance(&pointwise)).sqrt(),
            pointwise,
            pareto_k,
        }
    }

    /// Observations whose Pareto k exceeds [`PARETO_K_THRESHOLD`].
    pub fn unreliable(&self) -> Vec<usize> {
        self.pareto_k
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > PARETO_K_THRESHOLD)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn max_pareto_k(&self) -> f64 {
        self.pareto_k.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// PSIS-LOO from a pointwise log-likelihood matrix.
pub fn psis_loo(loglik: &LogLikMatrix) -> Result<LooResult> {
    if loglik.n_draws < 100 {
        return Err(Error::InvalidInput(format!(
            "PSIS-LOO needs at least 100 draws, got {}",
            loglik.n_draws
        )));
    }
    let per_obs: Vec<(f64, f64)> = (0..loglik.n_obs)
        .into_par_iter()
        .map(|i| {
            let ll = loglik.column(i);
            let neg: Vec<f64> = ll.iter().map(|v| -v).collect();
            let w = psis_smooth(&neg)?;
            let num = log_sum_exp(w.log_weights.iter().zip(&ll).map(|(a, b)| a + b));
            let den = log_sum_exp(w.log_weights.iter().copied());
            Ok((num - den, w.pareto_k))
        })
        .collect::<Result<_>>()?;
    let (pointwise, pareto_k) = per_obs.into_iter().unzip();
    Ok(LooResult::from_pointwise(pointwise, pareto_k))
}

/// Difference `b - a` in elpd with the standard error of the pointwise differences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElpdDiff {
    pub diff: f64,
    pub se: f64,
}

pub fn elpd_diff(a: &LooResult, b: &LooResult) -> Result<ElpdDiff> {
    if a.pointwise.len() != b.pointwise.len() {
        return Err(Error::InvalidInput("elpd comparison needs the same observations".into()));
    }
    let d: Vec<f64> = b.pointwise.iter().zip(&a.pointwise).map(|(x, y)| x - y).collect();
    Ok(ElpdDiff {
        diff: d.iter().sum(),
        se: (d.len() as f64 * sample_variance(&d)).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Domain};
    use rand::Rng;

    fn gpd_sample(k: f64, sigma: f64, n: usize, stream: u64) -> Vec<f64> {
        let fit = GpdFit { k, sigma };
        let mut rng = substream(21, Domain::Fixture, 3, stream);
        (0..n).map(|_| fit.quantile(rng.random::<f64>())).collect()
    }

    #[test]
    fn recovers_heavy_tail_shape() {
        let x = gpd_sample(0.5, 1.0, 10_000, 0);
        let fit = fit_gpd(&x).unwrap();
        assert!((fit.k - 0.5).abs() < 0.05, "k {}", fit.k);
        assert!((fit.sigma - 1.0).abs() < 0.1, "sigma {}", fit.sigma);
    }

    #[test]
    fn recovers_exponential_tail() {
        let x = gpd_sample(0.0, 1.0, 10_000, 1);
        let fit = fit_gpd(&x).unwrap();
        assert!(fit.k.abs() < 0.04, "k {}", fit.k);
    }

    #[test]
    fn gpd_input_validation() {
        assert!(fit_gpd(&[1.0, 2.0, 3.0, 4.0]).is_err());
        let flat = fit_gpd(&[2.0; 8]).unwrap();
        assert_eq!(flat.k, f64::NEG_INFINITY);
        assert!(!flat.has_tail());
        assert!(flat.sigma > 0.0);
    }

    #[test]
    fn tail_length_formula() {
        assert_eq!(tail_length(100), 20);
        assert_eq!(tail_length(4000), 190);
        assert_eq!(tail_length(8000), 269);
    }

    #[test]
    fn identical_draws_give_exact_pointwise_density() {
        let row = vec![-0.3, -1.2, -0.05];
        let m = LogLikMatrix::from_rows(vec![row.clone(); 200]).unwrap();
        let loo = psis_loo(&m).unwrap();
        for (a, b) in loo.pointwise.iter().zip(&row) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(loo.pareto_k.iter().all(|k| *k == f64::NEG_INFINITY));
        assert!((loo.elpd_loo - loo.pointwise.iter().sum::<f64>()).abs() < 1e-10);
    }

    #[test]
    fn weights_are_bounded_after_smoothing() {
        let mut rng = substream(8, Domain::Fixture, 0, 0);
        let lr: Vec<f64> = (0..2000).map(|_| 3.0 * rng.random::<f64>().ln()).map(|v: f64| -v).collect();
        let w = psis_smooth(&lr).unwrap();
        assert!(w.log_weights.iter().all(|&v| v <= 0.0 && v.is_finite()));
    }

    #[test]
    fn identical_models_have_zero_difference() {
        let mut rng = substream(9, Domain::Fixture, 0, 0);
        let rows: Vec<Vec<f64>> = (0..300).map(|_| (0..10).map(|_| -rng.random::<f64>()).collect()).collect();
        let loo = psis_loo(&LogLikMatrix::from_rows(rows).unwrap()).unwrap();
        let d = elpd_diff(&loo, &loo).unwrap();
        assert_eq!(d.diff, 0.0);
        assert_eq!(d.se, 0.0);
    }

    #[test]
    fn too_few_draws_is_an_error() {
        let m = LogLikMatrix::from_rows(vec![vec![-1.0]; 50]).unwrap();
        assert!(psis_loo(&m).is_err());
    }
}
