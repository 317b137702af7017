//! Datasets of balloon trials: CSV I/O, a synthetic three-condition
//! generator and the condition-permutation null.
//!
//! CSV schema (UTF-8, LF line endings):
//!
//! ```text
//! condition,p,trial,pumps,outcome
//! sober,0.1,0,4,cashed
//! ```
//!
//! `condition` is a label; all rows sharing a label must carry the same
//! `p`. `outcome` is `cashed` or `popped`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::model::{DecisionCounts, Outcome, PopProbability, SubjectParams, TrialRecord};
use crate::rng::{substream, Domain};
use crate::simulate::{simulate_trial, DesignMode, DEFAULT_MAX_PUMPS};
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 5] = ["condition", "p", "trial", "pumps", "outcome"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub label: String,
    pub p: PopProbability,
}

impl Condition {
    pub fn new(label: impl Into<String>, p: f64) -> Result<Self> {
        let label = label.into();
        if label.is_empty() || label.contains([',', '"', '\n', '\r']) {
            return Err(Error::InvalidInput(format!("bad condition label {label:?}")));
        }
        Ok(Condition {
            label,
            p: PopProbability::new(p)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub conditions: Vec<Condition>,
    pub trials: Vec<TrialRecord>,
}

impl Dataset {
    pub fn new(conditions: Vec<Condition>, trials: Vec<TrialRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &trials {
            if t.condition >= conditions.len() {
                return Err(Error::InvalidInput(format!(
                    "trial {} references missing condition {}",
                    t.trial, t.condition
                )));
            }
            if t.outcome == Outcome::Popped && t.pumps == 0 {
                return Err(Error::InvalidInput(format!("trial {} popped without a pump", t.trial)));
            }
            if !seen.insert((t.condition, t.trial)) {
                return Err(Error::InvalidInput(format!(
                    "duplicate trial index {} in condition {}",
                    t.trial, conditions[t.condition].label
                )));
            }
        }
        Ok(Dataset { conditions, trials })
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Total number of observed Bernoulli decisions.
    pub fn n_decisions(&self) -> usize {
        self.trials.iter().map(TrialRecord::n_decisions).sum()
    }

    pub fn trials_in(&self, condition: usize) -> impl Iterator<Item = &TrialRecord> {
        self.trials.iter().filter(move |t| t.condition == condition)
    }

    pub fn decision_counts(&self) -> Vec<(PopProbability, DecisionCounts)> {
        self.conditions
            .iter()
            .enumerate()
            .map(|(i, c)| (c.p, DecisionCounts::from_trials(self.trials_in(i))))
            .collect()
    }

    pub fn max_pumps(&self) -> u32 {
        self.trials.iter().map(|t| t.pumps).max().unwrap_or(0)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&CSV_HEADER.join(","));
        out.push('\n');
        for t in &self.trials {
            let c = &self.conditions[t.condition];
            out.push_str(&format!("{},{},{},{},{}\n", c.label, c.p, t.trial, t.pumps, t.outcome));
        }
        out
    }

    pub fn from_csv_reader(reader: impl Read, origin: &Path) -> Result<Self> {
        let csv_err = |line: u64, message: String| Error::Csv {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers().map_err(|e| csv_err(1, e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(csv_err(1, format!("expected header {:?}", CSV_HEADER.join(","))));
        }

        let mut conditions: Vec<Condition> = Vec::new();
        let mut trials = Vec::new();
        let mut seen = HashSet::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                csv_err(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |i: usize| record.get(i).unwrap_or("").trim();

            let label = field(0);
            let p: f64 = field(1)
                .parse()
                .map_err(|_| csv_err(line, format!("bad pop probability {:?}", field(1))))?;
            let trial: usize = field(2)
                .parse()
                .map_err(|_| csv_err(line, format!("bad trial index {:?}", field(2))))?;
            let pumps: u32 = field(3)
                .parse()
                .map_err(|_| csv_err(line, format!("pumps must be a non-negative integer, got {:?}", field(3))))?;
            let outcome: Outcome = field(4).parse().map_err(|e: Error| csv_err(line, e.to_string()))?;

            let condition = match conditions.iter().position(|c| c.label == label) {
                Some(i) => {
                    if conditions[i].p.value() != p {
                        return Err(csv_err(
                            line,
                            format!("condition {label:?} has p = {p} but earlier rows use {}", conditions[i].p),
                        ));
                    }
                    i
                }
                None => {
                    conditions.push(Condition::new(label, p).map_err(|e| csv_err(line, e.to_string()))?);
                    conditions.len() - 1
                }
            };
            if !seen.insert((condition, trial)) {
                return Err(csv_err(line, format!("duplicate trial {trial} in condition {label:?}")));
            }
            trials.push(TrialRecord::new(condition, trial, pumps, outcome).map_err(|e| csv_err(line, e.to_string()))?);
        }
        Dataset::new(conditions, trials)
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Dataset::from_csv_reader(file, path)
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(dataset.to_csv_string().as_bytes())
        .map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthCondition {
    pub label: String,
    pub p: f64,
    pub params: SubjectParams,
}

/// Settings for [`synth_george`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub trials_per_condition: usize,
    pub conditions: Vec<SynthCondition>,
}

impl SynthConfig {
    /// Three conditions with distinct behaviour: sober at p = .10, tipsy at
    /// .15 and drunk at .20, 30 trials each. Target pumps fall from about
    /// 8.5 (sober) to 2.5 and 1.1, and choices are moderately noisy
    /// (`beta = 1`), so pump counts stay at or below 10 or so.
    pub fn george(seed: u64) -> Self {
        let cond = |label: &str, p: f64, g: f64, b: f64| SynthCondition {
            label: label.to_string(),
            p,
            params: SubjectParams { gamma_plus: g, beta: b },
        };
        SynthConfig {
            seed,
            trials_per_condition: 30,
            conditions: vec![
                cond("sober", 0.10, 0.90, 1.0),
                cond("tipsy", 0.15, 0.40, 1.0),
                cond("drunk", 0.20, 0.25, 1.0),
            ],
        }
    }

    /// All conditions share one parameter pair.
    pub fn shared(seed: u64, params: SubjectParams, probs: &[f64], trials_per_condition: usize) -> Self {
        SynthConfig {
            seed,
            trials_per_condition,
            conditions: probs
                .iter()
                .enumerate()
                .map(|(i, &p)| SynthCondition {
                    label: format!("c{}", i + 1),
                    p,
                    params,
                })
                .collect(),
        }
    }
}

/// Simulates a dataset under the real task mechanics (balloons can pop).
pub fn synth_george(cfg: &SynthConfig) -> Result<Dataset> {
    let mut conditions = Vec::with_capacity(cfg.conditions.len());
    let mut trials = Vec::with_capacity(cfg.conditions.len() * cfg.trials_per_condition);
    for (c, sc) in cfg.conditions.iter().enumerate() {
        let cond = Condition::new(sc.label.clone(), sc.p)?;
        for j in 0..cfg.trials_per_condition {
            let mut rng = substream(cfg.seed, Domain::Synth, c as u64, j as u64);
            let sim = simulate_trial(&sc.params, cond.p, DesignMode::ExperimentDesign, DEFAULT_MAX_PUMPS, &mut rng);
            trials.push(TrialRecord::new(c, j, sim.pumps, sim.outcome)?);
        }
        conditions.push(cond);
    }
    Dataset::new(conditions, trials)
}

/// Reassigns whole trials to conditions uniformly at random. Slots (the
/// condition, its pop probability and trial index) stay put; only the
/// `(pumps, outcome)` pairs move, so per-condition counts are preserved.
pub fn permute_conditions(dataset: &Dataset, seed: u64) -> Result<Dataset> {
    if dataset.conditions.len() < 2 {
        return Err(Error::InvalidInput("permutation needs at least two conditions".into()));
    }
    let mut payload: Vec<(u32, Outcome)> = dataset.trials.iter().map(|t| (t.pumps, t.outcome)).collect();
    payload.shuffle(&mut substream(seed, Domain::Permute, 0, 0));
    let trials = dataset
        .trials
        .iter()
        .zip(payload)
        .map(|(slot, (pumps, outcome))| TrialRecord {
            pumps,
            outcome,
            ..*slot
        })
        .collect();
    Dataset::new(dataset.conditions.clone(), trials)
}
