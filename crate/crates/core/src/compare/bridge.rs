//! Marginal likelihoods by bridge sampling with the optimal bridge function.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::infer::{ess_basic, PosteriorSamples};
use crate::model::LogDensity;
use crate::rng::{substream, Domain};
use crate::stats::{mean, sample_variance};
use crate::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    /// Proposal draws; `None` uses as many as there are posterior draws in
    /// the iteration half.
    pub n_proposal_draws: Option<usize>,
    /// Relative change in the estimate at which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        BridgeConfig {
            n_proposal_draws: None,
            tol: 1e-10,
            max_iter: 1000,
            seed: 1,
        }
    }
}

/// Normal proposal fitted to the first half of the draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub mean: Vec<f64>,
    /// Row-major covariance.
    pub covariance: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeResult {
    pub log_ml: f64,
    pub iterations: usize,
    pub relative_change: f64,
    pub converged: bool,
    /// Approximate relative mean-squared error of the marginal likelihood.
    pub relative_mse: f64,
    pub proposal: Proposal,
}

impl BridgeResult {
    /// Approximate standard error of `log_ml`.
    pub fn log_ml_se(&self) -> f64 {
        self.relative_mse.sqrt()
    }
}

struct Mvn {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
}

impl Mvn {
    fn fit(draws: &[&[f64]]) -> Result<Self> {
        let d = draws[0].len();
        let n = draws.len() as f64;
        let mut mean = DVector::zeros(d);
        for x in draws {
            mean += DVector::from_column_slice(x);
        }
        mean /= n;
        let mut cov = DMatrix::zeros(d, d);
        for x in draws {
            let c = DVector::from_column_slice(x) - &mean;
            cov += &c * c.transpose();
        }
        cov /= n - 1.0;
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::Numerical("proposal covariance is not positive definite".into()))?
            .l();
        let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Mvn { mean, chol, log_det })
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let c = DVector::from_column_slice(x) - &self.mean;
        let z = self.chol.solve_lower_triangular(&c).expect("triangular factor is nonsingular");
        -0.5 * (z.norm_squared() + self.log_det + self.mean.len() as f64 * LN_2PI)
    }

    fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = substream(seed, Domain::Bridge, 0, 0);
        let d = self.mean.len();
        (0..n)
            .map(|_| {
                let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                (&self.mean + &self.chol * z).iter().copied().collect()
            })
            .collect()
    }

    fn covariance(&self) -> Vec<f64> {
        let cov = &self.chol * self.chol.transpose();
        cov.transpose().iter().copied().collect()
    }
}

/// Estimates the log normalizing constant of `target` from draws on its
/// unconstrained scale.
///
/// Each chain is split in half: the first halves fit a moment-matched normal
/// proposal, the second halves enter the fixed-point iteration together with
/// fresh proposal draws.
pub fn bridge_sample<T: LogDensity + ?Sized>(
    samples: &PosteriorSamples,
    target: &T,
    cfg: &BridgeConfig,
) -> Result<BridgeResult> {
    if samples.n_draws() < 1000 {
        return Err(Error::InvalidInput(format!(
            "bridge sampling needs at least 1000 draws, got {}",
            samples.n_draws()
        )));
    }
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(Error::InvalidInput("bridge tolerance must be positive and max_iter at least 1".into()));
    }
    if samples.chains[0].unconstrained[0].len() != target.dim() {
        return Err(Error::InvalidInput("draws do not match the target dimension".into()));
    }

    let mut fit_half: Vec<&[f64]> = Vec::new();
    let mut iter_half: Vec<Vec<&[f64]>> = Vec::new();
    for chain in &samples.chains {
        let h = chain.unconstrained.len() / 2;
        fit_half.extend(chain.unconstrained[..h].iter().map(Vec::as_slice));
        iter_half.push(chain.unconstrained[h..].iter().map(Vec::as_slice).collect());
    }
    let proposal = Mvn::fit(&fit_half)?;
    let n1: usize = iter_half.iter().map(Vec::len).sum();
    let n2 = cfg.n_proposal_draws.unwrap_or(n1);
    if n2 == 0 {
        return Err(Error::InvalidInput("at least one proposal draw is needed".into()));
    }
    let proposal_draws = proposal.sample(n2, cfg.seed);

    // log target minus log proposal, at posterior draws and proposal draws
    let post_q: Vec<(f64, f64)> = iter_half
        .iter()
        .flatten()
        .map(|x| (target.log_density(x), proposal.log_density(x)))
        .collect();
    let prop_q: Vec<(f64, f64)> = proposal_draws
        .iter()
        .map(|x| (target.log_density(x), proposal.log_density(x)))
        .collect();
    let l1: Vec<f64> = post_q.iter().map(|(p, q)| p - q).collect();
    let l2: Vec<f64> = prop_q.iter().map(|(p, q)| p - q).collect();
    if l1.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("target density is not finite at a posterior draw".into()));
    }

    let mut sorted = l1.clone();
    sorted.sort_by(f64::total_cmp);
    let lstar = crate::stats::quantile_sorted(&sorted, 0.5);
    let s1 = n1 as f64 / (n1 + n2) as f64;
    let s2 = n2 as f64 / (n1 + n2) as f64;
    let e1: Vec<f64> = l1.iter().map(|v| (v - lstar).exp()).collect();
    let e2: Vec<f64> = l2.iter().map(|v| (v - lstar).exp()).collect();

    let mut r = 0.5;
    let mut trace = Vec::new();
    let mut relative_change = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        let num: f64 = e2.iter().map(|e| e / (s1 * e + s2 * r)).sum::<f64>() / n2 as f64;
        let den: f64 = e1.iter().map(|e| 1.0 / (s1 * e + s2 * r)).sum::<f64>() / n1 as f64;
        let next = num / den;
        iterations += 1;
        relative_change = ((next - r) / next).abs();
        r = next;
        trace.push(r.ln() + lstar);
        if !r.is_finite() || r <= 0.0 {
            return Err(Error::BridgeNotConverged { trace });
        }
        if cfg.tol.is_infinite() {
            break;
        }
        if relative_change < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged && cfg.tol.is_finite() {
        return Err(Error::BridgeNotConverged { trace });
    }
    let log_ml = r.ln() + lstar;

    // Relative MSE after Fruhwirth-Schnatter (2004), with the posterior-side
    // term inflated by the autocorrelation of the draws.
    let f1: Vec<f64> = l2.iter().map(|v| 1.0 / (s1 + s2 * (log_ml - v).exp())).collect();
    let f2: Vec<f64> = l1.iter().map(|v| 1.0 / (s1 * (v - log_ml).exp() + s2)).collect();
    let mut f2_chains = Vec::with_capacity(iter_half.len());
    let mut offset = 0;
    for c in &iter_half {
        f2_chains.push(f2[offset..offset + c.len()].to_vec());
        offset += c.len();
    }
    let ess = ess_basic(&f2_chains).unwrap_or(n1 as f64).max(1.0);
    let m1 = mean(&f1);
    let m2 = mean(&f2);
    let relative_mse = sample_variance(&f1) / (n2 as f64 * m1 * m1) + sample_variance(&f2) / (ess * m2 * m2);

    Ok(BridgeResult {
        log_ml,
        iterations,
        relative_change,
        converged,
        relative_mse,
        proposal: Proposal {
            mean: proposal.mean.iter().copied().collect(),
            covariance: proposal.covariance(),
        },
    })
}

/// Log Bayes factor of model 1 over model 0.
pub fn bayes_factor(log_ml_1: f64, log_ml_0: f64) -> f64 {
    log_ml_1 - log_ml_0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infer::{fit, SamplerConfig};
    use crate::model::{ConjugateHarness, StandardNormalTarget};

    fn cfg() -> SamplerConfig {
        SamplerConfig {
            warmup: 1000,
            samples: 1000,
            ..SamplerConfig::default()
        }
    }

    #[test]
    fn bayes_factor_is_a_difference() {
        assert_eq!(bayes_factor(-10.0, -12.0), 2.0);
        assert_eq!(bayes_factor(-3.5, -1.25), -bayes_factor(-1.25, -3.5));
        assert_eq!(bayes_factor(-7.0, -7.0), 0.0);
    }

    #[test]
    fn normal_normalizer() {
        let target = StandardNormalTarget {
            dim: 1,
            log_normalizer: 1.7,
        };
        let f = fit(&target, &cfg()).unwrap();
        let b = bridge_sample(&f.samples, &target, &BridgeConfig::default()).unwrap();
        assert!(b.converged);
        assert!((b.log_ml - 1.7).abs() < 0.02, "{}", b.log_ml);
    }

    #[test]
    fn infinite_tolerance_stops_after_one_iteration() {
        let target = ConjugateHarness::binomial(10, 3);
        let f = fit(&target, &cfg()).unwrap();
        let b = bridge_sample(
            &f.samples,
            &target,
            &BridgeConfig {
                tol: f64::INFINITY,
                ..BridgeConfig::default()
            },
        )
        .unwrap();
        assert_eq!(b.iterations, 1);
        assert!(!b.converged);
    }

    #[test]
    fn iteration_cap_is_reported_with_trace() {
        let target = ConjugateHarness::binomial(10, 3);
        let f = fit(&target, &cfg()).unwrap();
        let err = bridge_sample(
            &f.samples,
            &target,
            &BridgeConfig {
                max_iter: 2,
                ..BridgeConfig::default()
            },
        )
        .unwrap_err();
        match err {
            Error::BridgeNotConverged { trace } => assert_eq!(trace.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_few_draws() {
        let target = StandardNormalTarget::new(1);
        let f = fit(
            &target,
            &SamplerConfig {
                warmup: 200,
                samples: 200,
                ..SamplerConfig::default()
            },
        )
        .unwrap();
        assert!(bridge_sample(&f.samples, &target, &BridgeConfig::default()).is_err());
    }
}
