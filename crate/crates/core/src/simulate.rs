//! Seeded generative simulation and prior predictive checks.
//!
//! Two simulation modes are supported. [`DesignMode::LikelihoodOnly`]
//! simulates only what the likelihood describes: the participant keeps
//! deciding until they cash out (or hit `max_pumps`). In
//! [`DesignMode::ExperimentDesign`] the balloon can also pop after every
//! pump, with the condition's pop probability, which is how the task
//! actually ends most trials.
//!
//! Each step of a trial consumes exactly two uniforms (decision, pop) from
//! the trial's own substream in both modes, so the two modes share their
//! decision sequence and a design-mode trial is never longer than its
//! likelihood-only twin.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{omega, theta, Outcome, PopProbability, PriorSpec, SubjectParams};
use crate::rng::{pack, substream, Domain};
use crate::stats::{mean, quantile_sorted, sample_variance};
use crate::{Error, Result};

pub const DEFAULT_MAX_PUMPS: u32 = 500;

/// Floor applied to negative hierarchical draws in generative runs.
pub const HIER_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignMode {
    #[serde(rename = "likelihood")]
    LikelihoodOnly,
    #[serde(rename = "experiment")]
    ExperimentDesign,
}

impl DesignMode {
    pub const BOTH: [DesignMode; 2] = [DesignMode::LikelihoodOnly, DesignMode::ExperimentDesign];

    pub fn as_str(self) -> &'static str {
        match self {
            DesignMode::LikelihoodOnly => "likelihood",
            DesignMode::ExperimentDesign => "experiment",
        }
    }
}

impl fmt::Display for DesignMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DesignMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "likelihood" => Ok(DesignMode::LikelihoodOnly),
            "experiment" => Ok(DesignMode::ExperimentDesign),
            other => Err(Error::InvalidInput(format!(
                "unknown design mode {other:?} (expected likelihood or experiment)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_sims: usize,
    pub trials_per_sim: usize,
    pub pop_probs: Vec<PopProbability>,
    pub seed: u64,
    pub max_pumps: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_sims: 200,
            trials_per_sim: 30,
            pop_probs: [0.10, 0.15, 0.20].iter().map(|&p| PopProbability::new(p).unwrap()).collect(),
            seed: 1,
            max_pumps: DEFAULT_MAX_PUMPS,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sims == 0 {
            return Err(Error::InvalidInput("n_sims must be at least 1".into()));
        }
        if self.trials_per_sim == 0 {
            return Err(Error::InvalidInput("trials_per_sim must be at least 1".into()));
        }
        if self.max_pumps == 0 {
            return Err(Error::InvalidInput("max_pumps must be at least 1".into()));
        }
        if self.pop_probs.is_empty() {
            return Err(Error::InvalidInput("at least one pop probability is required".into()));
        }
        Ok(())
    }

    pub fn with_pop_probs(mut self, probs: &[f64]) -> Result<Self> {
        self.pop_probs = probs.iter().map(|&p| PopProbability::new(p)).collect::<Result<_>>()?;
        Ok(self)
    }
}

/// Result of one simulated balloon.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimTrial {
    pub pumps: u32,
    pub outcome: Outcome,
    /// The trial hit `max_pumps` without cashing out or popping.
    pub truncated: bool,
}

pub fn simulate_trial<R: Rng + ?Sized>(
    params: &SubjectParams,
    p: PopProbability,
    mode: DesignMode,
    max_pumps: u32,
    rng: &mut R,
) -> SimTrial {
    let target = omega(params.gamma_plus, p);
    let mut k = 1u32;
    loop {
        let u_decision: f64 = rng.random();
        let u_pop: f64 = rng.random();
        if u_decision >= theta(params.beta, target, k as f64) {
            return SimTrial {
                pumps: k - 1,
                outcome: Outcome::Cashed,
                truncated: false,
            };
        }
        if mode == DesignMode::ExperimentDesign && u_pop < p.value() {
            return SimTrial {
                pumps: k,
                outcome: Outcome::Popped,
                truncated: false,
            };
        }
        if k == max_pumps {
            return SimTrial {
                pumps: k,
                outcome: Outcome::Cashed,
                truncated: true,
            };
        }
        k += 1;
    }
}

/// Simulates `n` trials for one participant; returns (mean, variance, truncated count).
fn simulate_block(
    params: &SubjectParams,
    p: PopProbability,
    mode: DesignMode,
    n: usize,
    max_pumps: u32,
    seed: u64,
    sim: usize,
    block: usize,
) -> (f64, f64, usize) {
    let mut pumps = Vec::with_capacity(n);
    let mut truncated = 0;
    for j in 0..n {
        let mut rng = substream(seed, Domain::Trial, sim as u64, pack(block as u64, j as u64));
        let t = simulate_trial(params, p, mode, max_pumps, &mut rng);
        truncated += usize::from(t.truncated);
        pumps.push(t.pumps as f64);
    }
    (mean(&pumps), sample_variance(&pumps), truncated)
}

/// One simulated participant at one pop probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub sim_id: usize,
    pub p: f64,
    pub upper: f64,
    pub mode: DesignMode,
    pub mean_pumps: f64,
    pub var_pumps: f64,
    /// Number of trials that hit the pump cap.
    pub truncated: usize,
}

/// The 2.5 / 25 / 50 / 75 / 97.5 % points of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q025: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q975: f64,
}

impl Quantiles {
    pub const LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |l| quantile_sorted(&v, l);
        Quantiles {
            q025: q(0.025),
            q25: q(0.25),
            q50: q(0.5),
            q75: q(0.75),
            q975: q(0.975),
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.q025, self.q25, self.q50, self.q75, self.q975]
    }
}

/// Prior predictive distribution of per-participant mean pumps at one pop probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSummary {
    pub p: f64,
    pub upper: f64,
    pub mode: DesignMode,
    pub quantiles: Quantiles,
    pub records: Vec<SimRecord>,
}

impl PredictiveSummary {
    fn from_records(p: f64, upper: f64, mode: DesignMode, records: Vec<SimRecord>) -> Self {
        let means: Vec<f64> = records.iter().map(|r| r.mean_pumps).collect();
        PredictiveSummary {
            p,
            upper,
            mode,
            quantiles: Quantiles::of(&means),
            records,
        }
    }

    pub fn means(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean_pumps).collect()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.var_pumps).collect()
    }

    pub fn max_mean(&self) -> f64 {
        self.records.iter().map(|r| r.mean_pumps).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn draw_uniform_params(prior: PriorSpec, seed: u64, sim: usize) -> SubjectParams {
    let mut rng = substream(seed, Domain::PriorDraw, sim as u64, 0);
    let g: f64 = rng.random();
    let b: f64 = rng.random();
    SubjectParams {
        gamma_plus: prior.upper * g,
        beta: prior.upper * b,
    }
}

/// Prior predictive check for the complete-pooling model.
///
/// Each simulated participant draws `gamma_plus, beta ~ Uniform(0, U)` once
/// and plays `trials_per_sim` balloons at every pop probability in the
/// config. Returns one summary per pop probability.
pub fn prior_predictive_flat(prior: PriorSpec, cfg: &SimConfig, mode: DesignMode) -> Result<Vec<PredictiveSummary>> {
    cfg.validate()?;
    let per_sim: Vec<Vec<SimRecord>> = (0..cfg.n_sims)
        .into_par_iter()
        .map(|sim| {
            let params = draw_uniform_params(prior, cfg.seed, sim);
            cfg.pop_probs
                .iter()
                .enumerate()
                .map(|(pi, &p)| {
                    let (m, v, truncated) =
                        simulate_block(&params, p, mode, cfg.trials_per_sim, cfg.max_pumps, cfg.seed, sim, pi);
                    SimRecord {
                        sim_id: sim,
                        p: p.value(),
                        upper: prior.upper,
                        mode,
                        mean_pumps: m,
                        var_pumps: v,
                        truncated,
                    }
                })
                .collect()
        })
        .collect();

    Ok(cfg
        .pop_probs
        .iter()
        .enumerate()
        .map(|(pi, p)| {
            let records = per_sim.iter().map(|r| r[pi].clone()).collect();
            PredictiveSummary::from_records(p.value(), prior.upper, mode, records)
        })
        .collect())
}

/// One simulated participant across all conditions of the hierarchical model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierSimRecord {
    pub sim_id: usize,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub truncated: usize,
    /// Condition parameters that were negative and got floored.
    pub floored: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierPredictive {
    pub upper: f64,
    pub mode: DesignMode,
    pub pop_probs: Vec<f64>,
    pub records: Vec<HierSimRecord>,
}

impl HierPredictive {
    pub fn n_conditions(&self) -> usize {
        self.pop_probs.len()
    }

    /// `mean_i - mean_1` across simulations, for condition index `i >= 1`.
    pub fn mean_differences(&self, condition: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.means[condition] - r.means[0]).collect()
    }

    /// `var_i - var_1` across simulations.
    pub fn variance_differences(&self, condition: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.variances[condition] - r.variances[0]).collect()
    }

    pub fn floored_draws(&self) -> usize {
        self.records.iter().map(|r| r.floored).sum()
    }
}

/// Prior predictive check for the hierarchical model.
///
/// Hyperparameters come from Uniform(0, U); each condition then draws its
/// own `gamma_plus, beta` from the group normals, flooring negative draws at
/// [`HIER_FLOOR`]. With one pop probability in the config every condition
/// uses it; otherwise there must be one per condition.
pub fn prior_predictive_hier(
    prior: PriorSpec,
    cfg: &SimConfig,
    mode: DesignMode,
    n_conditions: usize,
) -> Result<HierPredictive> {
    cfg.validate()?;
    if n_conditions < 2 {
        return Err(Error::InvalidInput("the hierarchical check needs at least two conditions".into()));
    }
    let pop_probs: Vec<PopProbability> = match cfg.pop_probs.len() {
        1 => vec![cfg.pop_probs[0]; n_conditions],
        n if n == n_conditions => cfg.pop_probs.clone(),
        n => {
            return Err(Error::InvalidInput(format!(
                "{n} pop probabilities given for {n_conditions} conditions"
            )))
        }
    };

    let records = (0..cfg.n_sims)
        .into_par_iter()
        .map(|sim| {
            let mut rng = substream(cfg.seed, Domain::PriorDraw, sim as u64, 1);
            let hyper: [f64; 4] = std::array::from_fn(|_| prior.upper * rng.random::<f64>());
            let mut floored = 0;
            let mut floor = |v: f64| {
                if v < HIER_FLOOR {
                    floored += 1;
                    HIER_FLOOR
                } else {
                    v
                }
            };
            let params: Vec<SubjectParams> = (0..n_conditions)
                .map(|_| {
                    let zg: f64 = rng.sample(StandardNormal);
                    let zb: f64 = rng.sample(StandardNormal);
                    SubjectParams {
                        gamma_plus: floor(hyper[0] + hyper[1] * zg),
                        beta: floor(hyper[2] + hyper[3] * zb),
                    }
                })
                .collect();
            let mut record = HierSimRecord {
                sim_id: sim,
                means: Vec::with_capacity(n_conditions),
                variances: Vec::with_capacity(n_conditions),
                truncated: 0,
                floored,
            };
            for (i, (params, &p)) in params.iter().zip(&pop_probs).enumerate() {
                let (m, v, t) = simulate_block(params, p, mode, cfg.trials_per_sim, cfg.max_pumps, cfg.seed, sim, i);
                record.means.push(m);
                record.variances.push(v);
                record.truncated += t;
            }
            record
        })
        .collect();

    Ok(HierPredictive {
        upper: prior.upper,
        mode,
        pop_probs: pop_probs.iter().map(|p| p.value()).collect(),
        records,
    })
}

/// One row of the prior-width sweep of the predictive distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub upper: f64,
    pub p: f64,
    pub mode: DesignMode,
    pub quantiles: Quantiles,
    pub q99: f64,
    pub max: f64,
}

/// Predictive quantiles of per-participant mean pumps for each upper bound,
/// in both simulation modes, at each pop probability in `cfg`.
pub fn tail_sensitivity_sweep(uppers: &[f64], cfg: &SimConfig) -> Result<Vec<TailRow>> {
    if uppers.is_empty() {
        return Err(Error::InvalidInput("at least one upper bound is required".into()));
    }
    if uppers.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("upper bounds must be strictly ascending".into()));
    }
    let mut rows = Vec::new();
    for &upper in uppers {
        let prior = PriorSpec::new(upper)?;
        for mode in DesignMode::BOTH {
            for summary in prior_predictive_flat(prior, cfg, mode)? {
                let mut means = summary.means();
                means.sort_by(f64::total_cmp);
                rows.push(TailRow {
                    upper,
                    p: summary.p,
                    mode,
                    quantiles: summary.quantiles,
                    q99: quantile_sorted(&means, 0.99),
                    max: *means.last().unwrap(),
                });
            }
        }
    }
    Ok(rows)
}

/// Two-sided sign-flip randomization test of symmetry about zero, using the
/// sample mean as statistic. Returns `(1 + #{|T_b| >= |T|}) / (B + 1)`.
pub fn sign_flip_test(values: &[f64], n_flips: usize, seed: u64) -> f64 {
    let observed = values.iter().sum::<f64>().abs();
    let exceed: usize = (0..n_flips)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, Domain::SignFlip, b as u64, 0);
            let mut total = 0.0;
            for chunk in values.chunks(64) {
                let bits: u64 = rng.random();
                for (i, v) in chunk.iter().enumerate() {
                    total += if bits >> i & 1 == 1 { *v } else { -*v };
                }
            }
            usize::from(total.abs() >= observed * (1.0 - 1e-12))
        })
        .sum();
    (1 + exceed) as f64 / (n_flips + 1) as f64
}

fn csv_error(e: impl fmt::Display) -> Error {
    Error::Numerical(format!("csv write failed: {e}"))
}

/// Writes flat prior predictive records:
/// `sim_id,p,upper,mode,mean_pumps,var_pumps,truncated`.
pub fn write_summaries_csv<W: Write>(summaries: &[PredictiveSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["sim_id", "p", "upper", "mode", "mean_pumps", "var_pumps", "truncated"])
        .map_err(csv_error)?;
    for s in summaries {
        for r in &s.records {
            w.write_record([
                r.sim_id.to_string(),
                r.p.to_string(),
                r.upper.to_string(),
                r.mode.to_string(),
                r.mean_pumps.to_string(),
                r.var_pumps.to_string(),
                r.truncated.to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| Error::Numerical(e.to_string()))
}

/// Writes hierarchical records, one row per simulation and condition:
/// `sim_id,condition,p,upper,mode,mean_pumps,var_pumps,mean_diff,var_diff,truncated`.
pub fn write_hier_csv<W: Write>(hier: &HierPredictive, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "sim_id", "condition", "p", "upper", "mode", "mean_pumps", "var_pumps", "mean_diff", "var_diff", "truncated",
    ])
    .map_err(csv_error)?;
    for r in &hier.records {
        for i in 0..hier.n_conditions() {
            w.write_record([
                r.sim_id.to_string(),
                (i + 1).to_string(),
                hier.pop_probs[i].to_string(),
                hier.upper.to_string(),
                hier.mode.to_string(),
                r.means[i].to_string(),
                r.variances[i].to_string(),
                (r.means[i] - r.means[0]).to_string(),
                (r.variances[i] - r.variances[0]).to_string(),
                r.truncated.to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| Error::Numerical(e.to_string()))
}

/// `upper,p,mode,q025,q25,q50,q75,q975,q99,max`.
pub fn write_tail_csv<W: Write>(rows: &[TailRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["upper", "p", "mode", "q025", "q25", "q50", "q75", "q975", "q99", "max"])
        .map_err(csv_error)?;
    for r in rows {
        let mut rec = vec![r.upper.to_string(), r.p.to_string(), r.mode.to_string()];
        rec.extend(r.quantiles.as_array().iter().map(|v| v.to_string()));
        rec.push(r.q99.to_string());
        rec.push(r.max.to_string());
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Numerical(e.to_string()))
}
