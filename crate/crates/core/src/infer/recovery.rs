use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_model, SamplerConfig};
use crate::data::{synth_george, SynthCondition, SynthConfig};
use crate::model::{BartModel, PriorSpec, SubjectParams};
use crate::rng::{derive_seed, Domain};
use crate::{Error, Result};

/// Pop probabilities and trial counts of a simulated experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub pop_probs: Vec<f64>,
    pub trials_per_condition: usize,
}

impl Default for Design {
    /// Three conditions at p = .10, .15, .20 with 30 balloons each.
    fn default() -> Self {
        Design {
            pop_probs: vec![0.10, 0.15, 0.20],
            trials_per_condition: 30,
        }
    }
}

/// Data-generating parameters for a recovery study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RecoveryTruth {
    /// One pair shared by all conditions.
    Shared(SubjectParams),
    /// One pair per condition.
    PerCondition(Vec<SubjectParams>),
}

impl RecoveryTruth {
    fn per_condition(&self, n: usize) -> Result<Vec<SubjectParams>> {
        match self {
            RecoveryTruth::Shared(p) => Ok(vec![*p; n]),
            RecoveryTruth::PerCondition(v) if v.len() == n => Ok(v.clone()),
            RecoveryTruth::PerCondition(v) => Err(Error::InvalidInput(format!(
                "{} parameter pairs given for {n} conditions",
                v.len()
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRecovery {
    pub name: String,
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Fraction of replicates whose central 90% interval contains the truth.
    pub coverage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub name: String,
    pub truth: f64,
    pub posterior_mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ReplicateRow {
    pub fn covered(&self) -> bool {
        self.lower <= self.truth && self.truth <= self.upper
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub model: BartModel,
    pub replicates: usize,
    pub params: Vec<ParamRecovery>,
    pub rows: Vec<ReplicateRow>,
}

impl RecoveryReport {
    pub fn param(&self, name: &str) -> Option<&ParamRecovery> {
        self.params.iter().find(|p| p.name == name)
    }

    /// `name,truth,mean_estimate,bias,rmse,coverage,replicates`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::Numerical(e.to_string());
        w.write_record(["name", "truth", "mean_estimate", "bias", "rmse", "coverage", "replicates"])
            .map_err(err)?;
        for p in &self.params {
            w.write_record([
                p.name.clone(),
                p.truth.to_string(),
                p.mean_estimate.to_string(),
                p.bias.to_string(),
                p.rmse.to_string(),
                p.coverage.to_string(),
                self.replicates.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Numerical(e.to_string()))
    }
}

/// Simulates `n_replicates` datasets at known parameters, fits each, and
/// reports bias, RMSE and coverage of central 90% intervals.
pub fn parameter_recovery(
    model: BartModel,
    truth: &RecoveryTruth,
    design: &Design,
    n_replicates: usize,
    prior: PriorSpec,
    cfg: &SamplerConfig,
) -> Result<RecoveryReport> {
    let n_cond = design.pop_probs.len();
    let params = truth.per_condition(n_cond)?;
    let targets: Vec<(String, usize, f64)> = match model {
        BartModel::Flat => {
            if params.iter().any(|p| *p != params[0]) {
                return Err(Error::InvalidInput("the flat model needs parameters shared by all conditions".into()));
            }
            vec![
                ("gamma_plus".into(), 0, params[0].gamma_plus),
                ("beta".into(), 1, params[0].beta),
            ]
        }
        BartModel::Hier => {
            let mut t: Vec<(String, usize, f64)> = (0..n_cond)
                .map(|i| (format!("gamma_plus[{}]", i + 1), 4 + i, params[i].gamma_plus))
                .collect();
            t.extend((0..n_cond).map(|i| (format!("beta[{}]", i + 1), 4 + n_cond + i, params[i].beta)));
            t
        }
    };

    let synth_conditions: Vec<SynthCondition> = design
        .pop_probs
        .iter()
        .zip(&params)
        .enumerate()
        .map(|(i, (&p, &params))| SynthCondition {
            label: format!("c{}", i + 1),
            p,
            params,
        })
        .collect();

    let per_rep: Vec<Vec<ReplicateRow>> = (0..n_replicates)
        .into_par_iter()
        .map(|r| {
            let wrap = |e: Error| Error::Replicate {
                replicate: r,
                source: Box::new(e),
            };
            let synth = SynthConfig {
                seed: derive_seed(cfg.seed, Domain::Replicate, r as u64),
                trials_per_condition: design.trials_per_condition,
                conditions: synth_conditions.clone(),
            };
            let data = synth_george(&synth).map_err(wrap)?;
            let rep_cfg = SamplerConfig {
                seed: derive_seed(cfg.seed, Domain::Chain, r as u64),
                ..cfg.clone()
            };
            let fit = fit_model(model, &data, prior, &rep_cfg).map_err(wrap)?;
            Ok(targets
                .iter()
                .map(|(name, idx, truth)| ReplicateRow {
                    replicate: r,
                    name: name.clone(),
                    truth: *truth,
                    posterior_mean: fit.samples.mean(*idx),
                    lower: fit.samples.quantile(*idx, 0.05),
                    upper: fit.samples.quantile(*idx, 0.95),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ReplicateRow> = per_rep.into_iter().flatten().collect();

    let params = if n_replicates == 0 {
        Vec::new()
    } else {
        targets
            .iter()
            .map(|(name, _, truth)| {
                let mine: Vec<&ReplicateRow> = rows.iter().filter(|r| &r.name == name).collect();
                let n = mine.len() as f64;
                let mean_estimate = mine.iter().map(|r| r.posterior_mean).sum::<f64>() / n;
                ParamRecovery {
                    name: name.clone(),
                    truth: *truth,
                    mean_estimate,
                    bias: mean_estimate - truth,
                    rmse: (mine.iter().map(|r| (r.posterior_mean - truth).powi(2)).sum::<f64>() / n).sqrt(),
                    coverage: mine.iter().filter(|r| r.covered()).count() as f64 / n,
                }
            })
            .collect()
    };

    Ok(RecoveryReport {
        model,
        replicates: n_replicates,
        params,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_replicates_is_an_empty_report() {
        let truth = RecoveryTruth::Shared(SubjectParams::new(1.2, 0.8).unwrap());
        let r = parameter_recovery(
            BartModel::Flat,
            &truth,
            &Design::default(),
            0,
            PriorSpec::default(),
            &SamplerConfig::default(),
        )
        .unwrap();
        assert!(r.params.is_empty() && r.rows.is_empty());
    }

    #[test]
    fn flat_model_rejects_condition_specific_truth() {
        let truth = RecoveryTruth::PerCondition(vec![
            SubjectParams::new(1.0, 1.0).unwrap(),
            SubjectParams::new(2.0, 1.0).unwrap(),
            SubjectParams::new(1.0, 1.0).unwrap(),
        ]);
        let r = parameter_recovery(
            BartModel::Flat,
            &truth,
            &Design::default(),
            1,
            PriorSpec::default(),
            &SamplerConfig::default(),
        );
        assert!(r.is_err());
    }
}
