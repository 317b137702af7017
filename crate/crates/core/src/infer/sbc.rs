//! Simulation-based calibration.
//!
//! Each replicate draws parameters from the prior, simulates a dataset with
//! the real task mechanics, fits the model and records the rank of the
//! prior draw among (thinned) posterior draws. For a correct sampler the
//! ranks are uniform.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{fit_model, Design, SamplerConfig};
use crate::data::{synth_george, SynthCondition, SynthConfig};
use crate::model::{BartModel, PriorSpec, SubjectParams};
use crate::rng::{derive_seed, substream, Domain};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbcOptions {
    pub bins: usize,
    /// Upper limit on the posterior draws each rank is computed against.
    pub max_draws: usize,
    /// Shift added to every posterior draw before ranking. Non-zero only in
    /// negative-control runs.
    pub draw_offset: f64,
}

impl Default for SbcOptions {
    fn default() -> Self {
        SbcOptions {
            bins: 16,
            max_draws: 1023,
            draw_offset: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbcParam {
    pub name: String,
    /// Rank of the prior draw, in `0..=n_draws[r]`.
    pub ranks: Vec<usize>,
    pub n_draws: Vec<usize>,
    pub histogram: Vec<usize>,
    pub expected: Vec<f64>,
    pub chi_square: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbcReport {
    pub model: BartModel,
    pub bins: usize,
    pub replicates: usize,
    /// Replicates dropped because their fit failed the convergence check.
    pub failed: usize,
    pub params: Vec<SbcParam>,
}

impl SbcReport {
    pub fn param(&self, name: &str) -> Option<&SbcParam> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn min_p_value(&self) -> f64 {
        self.params.iter().map(|p| p.p_value).fold(f64::INFINITY, f64::min)
    }

    /// `name,chi_square,p_value,bins,replicates,failed`.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::Numerical(e.to_string());
        w.write_record(["name", "chi_square", "p_value", "bins", "replicates", "failed"])
            .map_err(err)?;
        for p in &self.params {
            w.write_record([
                p.name.clone(),
                p.chi_square.to_string(),
                p.p_value.to_string(),
                self.bins.to_string(),
                self.replicates.to_string(),
                self.failed.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Numerical(e.to_string()))
    }

    /// `replicate,name,rank,n_draws`; replicate numbers count only kept fits.
    pub fn write_ranks_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::Numerical(e.to_string());
        w.write_record(["replicate", "name", "rank", "n_draws"]).map_err(err)?;
        for p in &self.params {
            for (r, (rank, n)) in p.ranks.iter().zip(&p.n_draws).enumerate() {
                w.write_record([r.to_string(), p.name.clone(), rank.to_string(), n.to_string()])
                    .map_err(err)?;
            }
        }
        w.flush().map_err(|e| Error::Numerical(e.to_string()))
    }
}

/// Prior draw in the constrained parameter order of `model`, plus the
/// per-condition parameters used to simulate the data.
fn draw_from_prior(model: BartModel, prior: PriorSpec, n_cond: usize, seed: u64, rep: usize) -> (Vec<f64>, Vec<SubjectParams>) {
    let mut rng = substream(seed, Domain::PriorDraw, rep as u64, 2);
    match model {
        BartModel::Flat => {
            let g = prior.upper * rng.random::<f64>();
            let b = prior.upper * rng.random::<f64>();
            let p = SubjectParams { gamma_plus: g, beta: b };
            (vec![g, b], vec![p; n_cond])
        }
        BartModel::Hier => {
            let h: [f64; 4] = std::array::from_fn(|_| prior.upper * rng.random::<f64>());
            let zg: Vec<f64> = (0..n_cond).map(|_| rng.sample(StandardNormal)).collect();
            let zb: Vec<f64> = (0..n_cond).map(|_| rng.sample(StandardNormal)).collect();
            let gammas: Vec<f64> = zg.iter().map(|z| h[0] + h[1] * z).collect();
            let betas: Vec<f64> = zb.iter().map(|z| h[2] + h[3] * z).collect();
            // Untruncated, matching the density used for inference.
            let params = gammas
                .iter()
                .zip(&betas)
                .map(|(&g, &b)| SubjectParams { gamma_plus: g, beta: b })
                .collect();
            let mut truth = h.to_vec();
            truth.extend(gammas);
            truth.extend(betas);
            (truth, params)
        }
    }
}

fn chi_square_uniformity(ranks: &[usize], n_draws: &[usize], bins: usize) -> (Vec<usize>, Vec<f64>, f64, f64) {
    let mut hist = vec![0usize; bins];
    let mut expected = vec![0.0; bins];
    for (&rank, &l) in ranks.iter().zip(n_draws) {
        let values = l + 1;
        hist[rank * bins / values] += 1;
        for v in 0..values {
            expected[v * bins / values] += 1.0 / values as f64;
        }
    }
    let stat: f64 = hist
        .iter()
        .zip(&expected)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dof = (bins - 1) as f64;
    let p = ChiSquared::new(dof).map(|d| d.sf(stat)).unwrap_or(f64::NAN);
    (hist, expected, stat, p)
}

/// Runs simulation-based calibration for `model` on `design`.
pub fn sbc(
    model: BartModel,
    design: &Design,
    n_replicates: usize,
    prior: PriorSpec,
    cfg: &SamplerConfig,
    opts: &SbcOptions,
) -> Result<SbcReport> {
    if opts.bins < 2 {
        return Err(Error::InvalidInput("SBC needs at least two rank bins".into()));
    }
    if n_replicates < 20 {
        return Err(Error::InvalidInput("SBC needs at least 20 replicates".into()));
    }
    if opts.max_draws == 0 {
        return Err(Error::InvalidInput("max_draws must be positive".into()));
    }
    let n_cond = design.pop_probs.len();

    let results: Vec<Option<(Vec<usize>, usize, Vec<String>)>> = (0..n_replicates)
        .into_par_iter()
        .map(|r| {
            let wrap = |e: Error| Error::Replicate {
                replicate: r,
                source: Box::new(e),
            };
            let (truth, params) = draw_from_prior(model, prior, n_cond, cfg.seed, r);
            let synth = SynthConfig {
                seed: derive_seed(cfg.seed, Domain::Replicate, r as u64),
                trials_per_condition: design.trials_per_condition,
                conditions: design
                    .pop_probs
                    .iter()
                    .zip(&params)
                    .enumerate()
                    .map(|(i, (&p, &params))| SynthCondition {
                        label: format!("c{}", i + 1),
                        p,
                        params,
                    })
                    .collect(),
            };
            let data = synth_george(&synth).map_err(wrap)?;
            let rep_cfg = SamplerConfig {
                seed: derive_seed(cfg.seed, Domain::Chain, r as u64),
                ..cfg.clone()
            };
            let fit = match fit_model(model, &data, prior, &rep_cfg) {
                Ok(f) => f,
                Err(Error::Convergence { .. }) => return Ok(None),
                Err(e) => return Err(wrap(e)),
            };

            let total = fit.samples.n_draws();
            let ess = fit.diagnostics.min_ess().unwrap_or(total as f64);
            let l = opts.max_draws.min(ess.floor() as usize).min(total).max(1);
            let picks: Vec<usize> = (0..l).map(|j| j * total / l).collect();
            let ranks = truth
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let pooled = fit.samples.pooled(i);
                    picks.iter().filter(|&&j| pooled[j] + opts.draw_offset < t).count()
                })
                .collect();
            Ok(Some((ranks, l, fit.samples.names.clone())))
        })
        .collect::<Result<_>>()?;

    let kept: Vec<&(Vec<usize>, usize, Vec<String>)> = results.iter().flatten().collect();
    let failed = n_replicates - kept.len();
    let names = match kept.first() {
        Some(k) => k.2.clone(),
        None => return Err(Error::Numerical("every SBC replicate failed to converge".into())),
    };
    let params = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let ranks: Vec<usize> = kept.iter().map(|k| k.0[i]).collect();
            let n_draws: Vec<usize> = kept.iter().map(|k| k.1).collect();
            let (histogram, expected, chi_square, p_value) = chi_square_uniformity(&ranks, &n_draws, opts.bins);
            SbcParam {
                name: name.clone(),
                ranks,
                n_draws,
                histogram,
                expected,
                chi_square,
                p_value,
            }
        })
        .collect();

    Ok(SbcReport {
        model,
        bins: opts.bins,
        replicates: n_replicates,
        failed,
        params,
    })
}
