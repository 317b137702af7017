//! MCMC inference for the BART models and the checks built on it.

mod diagnostics;
mod recovery;
mod sampler;
mod sbc;

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::model::{BartModel, FlatPosterior, HierPosterior, LogDensity, ModelKind, PriorSpec};
use crate::stats::quantile_sorted;
use crate::{Error, Result};

pub use diagnostics::{ess_basic, ess_bulk, mcse_mean, mcse_variance, rank_normalize, split_chains, split_rhat};
pub use recovery::{parameter_recovery, Design, ParamRecovery, RecoveryReport, RecoveryTruth};
pub use sampler::default_target_acceptance;
pub use sbc::{sbc, SbcOptions, SbcParam, SbcReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub warmup: usize,
    /// Retained draws per chain after warmup.
    pub samples: usize,
    /// Iterations per retained draw.
    pub thin: usize,
    pub seed: u64,
    /// `None` picks a rate from the dimension, see [`default_target_acceptance`].
    pub target_accept: Option<f64>,
    pub rhat_threshold: f64,
    pub ess_threshold: f64,
    /// Turn threshold breaches into [`Error::Convergence`].
    pub check_convergence: bool,
    /// Nelder-Mead runs used to pick each chain's starting point; 0 starts
    /// from a uniform draw in `(-2, 2)^d`.
    pub init_optim_starts: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_chains: 4,
            warmup: 4000,
            samples: 2000,
            thin: 20,
            seed: 1,
            target_accept: None,
            rhat_threshold: 1.05,
            ess_threshold: 100.0,
            check_convergence: true,
            init_optim_starts: 8,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains < 2 {
            return Err(Error::InvalidInput("at least two chains are needed for diagnostics".into()));
        }
        if self.thin == 0 {
            return Err(Error::InvalidInput("thin must be at least 1".into()));
        }
        if self.samples < 4 {
            return Err(Error::InvalidInput("at least four sampling iterations are needed".into()));
        }
        if let Some(t) = self.target_accept {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidInput(format!("target acceptance {t} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Post-warmup draws of one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    pub unconstrained: Vec<Vec<f64>>,
    pub constrained: Vec<Vec<f64>>,
    pub log_density: Vec<f64>,
    pub acceptance_rate: f64,
}

/// Draws indexed by (chain, iteration, parameter).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub kind: ModelKind,
    pub names: Vec<String>,
    pub unconstrained_names: Vec<String>,
    pub chains: Vec<ChainDraws>,
}

impl PosteriorSamples {
    /// Wraps externally produced unconstrained draws whose constrained
    /// values are the draws themselves.
    pub fn from_unconstrained(kind: ModelKind, names: Vec<String>, chains: Vec<Vec<Vec<f64>>>) -> Self {
        PosteriorSamples {
            kind,
            unconstrained_names: names.clone(),
            names,
            chains: chains
                .into_iter()
                .map(|c| ChainDraws {
                    constrained: c.clone(),
                    log_density: vec![f64::NAN; c.len()],
                    unconstrained: c,
                    acceptance_rate: f64::NAN,
                })
                .collect(),
        }
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_iter(&self) -> usize {
        self.chains.first().map_or(0, |c| c.constrained.len())
    }

    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(|c| c.constrained.len()).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Constrained draws of one parameter, one vector per chain.
    pub fn param_chains(&self, index: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.constrained.iter().map(|d| d[index]).collect())
            .collect()
    }

    /// Constrained draws of one parameter pooled chain by chain.
    pub fn pooled(&self, index: usize) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.constrained.iter().map(move |d| d[index])).collect()
    }

    pub fn constrained_draws(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.chains.iter().flat_map(|c| c.constrained.iter())
    }

    pub fn unconstrained_draws(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.chains.iter().flat_map(|c| c.unconstrained.iter())
    }

    pub fn mean(&self, index: usize) -> f64 {
        crate::stats::mean(&self.pooled(index))
    }

    pub fn quantile(&self, index: usize, q: f64) -> f64 {
        let mut v = self.pooled(index);
        v.sort_by(f64::total_cmp);
        quantile_sorted(&v, q)
    }

    /// `chain,iter,<name>...`, one row per draw, constrained scale.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["chain".to_string(), "iter".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).map_err(|e| Error::Numerical(e.to_string()))?;
        for (c, chain) in self.chains.iter().enumerate() {
            for (i, draw) in chain.constrained.iter().enumerate() {
                let mut row = vec![(c + 1).to_string(), (i + 1).to_string()];
                row.extend(draw.iter().map(|v| v.to_string()));
                w.write_record(&row).map_err(|e| Error::Numerical(e.to_string()))?;
            }
        }
        w.flush().map_err(|e| Error::Numerical(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub names: Vec<String>,
    /// `None` marks an undefined value (constant draws).
    pub rhat: Vec<Option<f64>>,
    pub ess_bulk: Vec<Option<f64>>,
    pub acceptance_rate: Vec<f64>,
}

impl Diagnostics {
    pub fn max_rhat(&self) -> Option<f64> {
        self.rhat.iter().flatten().copied().reduce(f64::max)
    }

    pub fn min_ess(&self) -> Option<f64> {
        self.ess_bulk.iter().flatten().copied().reduce(f64::min)
    }

    pub fn issues(&self, rhat_threshold: f64, ess_threshold: f64) -> Vec<ConvergenceIssue> {
        self.names
            .iter()
            .enumerate()
            .filter_map(|(i, name)| {
                let rhat = self.rhat[i];
                let ess = self.ess_bulk[i];
                let bad_rhat = rhat.is_some_and(|r| r > rhat_threshold);
                let bad_ess = ess.is_some_and(|e| e < ess_threshold);
                (bad_rhat || bad_ess).then(|| ConvergenceIssue {
                    parameter: name.clone(),
                    rhat,
                    ess_bulk: ess,
                })
            })
            .collect()
    }
}

/// A parameter that breached a convergence threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceIssue {
    pub parameter: String,
    pub rhat: Option<f64>,
    pub ess_bulk: Option<f64>,
}

impl fmt::Display for ConvergenceIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.3}"));
        write!(f, "{} (R-hat {}, ESS {})", self.parameter, show(self.rhat), show(self.ess_bulk))
    }
}

/// Split R-hat, bulk ESS and acceptance rates for every constrained parameter.
pub fn diagnostics(samples: &PosteriorSamples) -> Result<Diagnostics> {
    if samples.n_chains() < 2 || samples.chains.iter().any(|c| c.constrained.len() < 4) {
        return Err(Error::InvalidInput("diagnostics need at least two chains of four draws".into()));
    }
    let per_param: Vec<(Option<f64>, Option<f64>)> = (0..samples.names.len())
        .into_par_iter()
        .map(|i| {
            let chains = samples.param_chains(i);
            (split_rhat(&chains), ess_bulk(&chains))
        })
        .collect();
    Ok(Diagnostics {
        names: samples.names.clone(),
        rhat: per_param.iter().map(|p| p.0).collect(),
        ess_bulk: per_param.iter().map(|p| p.1).collect(),
        acceptance_rate: samples.chains.iter().map(|c| c.acceptance_rate).collect(),
    })
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub samples: PosteriorSamples,
    pub diagnostics: Diagnostics,
}

impl fmt::Debug for Fit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fit")
            .field("kind", &self.samples.kind)
            .field("chains", &self.samples.n_chains())
            .field("iterations", &self.samples.n_iter())
            .field("diagnostics", &self.diagnostics)
            .finish()
    }
}

/// Runs the adaptive sampler on any log density.
pub fn fit<T: LogDensity + ?Sized>(target: &T, cfg: &SamplerConfig) -> Result<Fit> {
    cfg.validate()?;
    let chains = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| sampler::run_chain(target, cfg, c))
        .collect::<Result<Vec<_>>>()?;

    let bounds = target.constrained_bounds();
    for (c, chain) in chains.iter().enumerate() {
        for draw in &chain.constrained {
            for (v, &(lo, hi)) in draw.iter().zip(&bounds) {
                if !(*v >= lo && *v <= hi) {
                    return Err(Error::Numerical(format!("chain {c}: draw {v} outside [{lo}, {hi}]")));
                }
            }
        }
    }

    let samples = PosteriorSamples {
        kind: target.kind(),
        names: target.constrained_names(),
        unconstrained_names: target.unconstrained_names(),
        chains,
    };
    let diagnostics = diagnostics(&samples)?;
    let fit = Fit { samples, diagnostics };
    if cfg.check_convergence {
        let issues = fit.diagnostics.issues(cfg.rhat_threshold, cfg.ess_threshold);
        if !issues.is_empty() {
            return Err(Error::Convergence {
                fit: Box::new(fit),
                issues,
            });
        }
    }
    Ok(fit)
}

/// Fits one of the BART models to a dataset.
pub fn fit_model(model: BartModel, dataset: &Dataset, prior: PriorSpec, cfg: &SamplerConfig) -> Result<Fit> {
    for t in &dataset.trials {
        if t.condition >= dataset.conditions.len() {
            return Err(Error::InvalidInput(format!("trial references missing condition {}", t.condition)));
        }
    }
    match model {
        BartModel::Flat => fit(&FlatPosterior::new(dataset, prior), cfg),
        BartModel::Hier => fit(&HierPosterior::new(dataset, prior), cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConjugateHarness, StandardNormalTarget};

    #[test]
    fn conjugate_moments_within_three_mcse() {
        let harness = ConjugateHarness::new((0..25).map(|i| i % 3 == 0).collect());
        let fit = fit(&harness, &SamplerConfig::default()).unwrap();
        let chains = fit.samples.param_chains(0);
        let pooled = fit.samples.pooled(0);
        let m = crate::stats::mean(&pooled);
        let v = crate::stats::sample_variance(&pooled);
        assert!((m - harness.posterior_mean()).abs() < 3.0 * mcse_mean(&chains).unwrap());
        assert!((v - harness.posterior_variance()).abs() < 3.0 * mcse_variance(&chains).unwrap());
    }

    #[test]
    fn seeded_fits_are_identical() {
        let target = StandardNormalTarget::new(3);
        let cfg = SamplerConfig {
            warmup: 300,
            samples: 300,
            check_convergence: false,
            ..SamplerConfig::default()
        };
        let a = fit(&target, &cfg).unwrap();
        let b = fit(&target, &cfg).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = fit(&target, &SamplerConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn rejects_single_chain() {
        let cfg = SamplerConfig {
            n_chains: 1,
            ..SamplerConfig::default()
        };
        assert!(fit(&StandardNormalTarget::new(1), &cfg).is_err());
    }

    #[test]
    fn short_runs_fail_the_convergence_check() {
        let cfg = SamplerConfig {
            warmup: 10,
            samples: 20,
            ..SamplerConfig::default()
        };
        match fit(&StandardNormalTarget::new(6), &cfg) {
            Err(Error::Convergence { issues, fit }) => {
                assert!(!issues.is_empty());
                assert_eq!(fit.samples.n_iter(), 20);
            }
            other => panic!("expected a convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let cfg = SamplerConfig {
            warmup: 50,
            samples: 10,
            check_convergence: false,
            ..SamplerConfig::default()
        };
        let f = fit(&ConjugateHarness::binomial(4, 2), &cfg).unwrap();
        let mut buf = Vec::new();
        f.samples.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "chain,iter,rate");
        assert_eq!(lines.len(), 1 + 4 * 10);
    }
}
