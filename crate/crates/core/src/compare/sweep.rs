//! Bayes factors and LOO across uniform prior widths.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bridge::{bayes_factor, bridge_sample, BridgeConfig};
use super::psis::{elpd_diff, LooResult};
use crate::data::Dataset;
use crate::infer::{fit_model, SamplerConfig};
use crate::model::{BartModel, FlatPosterior, HierPosterior, LogDensity, PriorSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMethod {
    Bf,
    Loo,
    Both,
}

impl SweepMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepMethod::Bf => "bf",
            SweepMethod::Loo => "loo",
            SweepMethod::Both => "both",
        }
    }

    fn bf(self) -> bool {
        self != SweepMethod::Loo
    }

    fn loo(self) -> bool {
        self != SweepMethod::Bf
    }
}

impl fmt::Display for SweepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bf" => Ok(SweepMethod::Bf),
            "loo" => Ok(SweepMethod::Loo),
            "both" => Ok(SweepMethod::Both),
            other => Err(Error::InvalidInput(format!("unknown method {other:?} (expected bf, loo or both)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub uppers: Vec<f64>,
    pub method: SweepMethod,
    /// Used unchanged at every width, so cells share random numbers.
    pub sampler: SamplerConfig,
    pub bridge: BridgeConfig,
}

impl SweepConfig {
    pub fn new(uppers: Vec<f64>) -> Self {
        SweepConfig {
            uppers,
            method: SweepMethod::Both,
            sampler: SamplerConfig::default(),
            bridge: BridgeConfig::default(),
        }
    }
}

/// One width. H0 is the flat (complete-pooling) model, H1 the hierarchical
/// one; differences are H1 minus H0. Cells that failed are `None` and the
/// reason is kept in `errors`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub upper: f64,
    pub log_bf: Option<f64>,
    pub bridge_iters: Option<usize>,
    pub log_ml_h0: Option<f64>,
    pub log_ml_h1: Option<f64>,
    pub elpd_h0: Option<f64>,
    pub se_h0: Option<f64>,
    pub elpd_h1: Option<f64>,
    pub se_h1: Option<f64>,
    pub elpd_diff: Option<f64>,
    pub se_diff: Option<f64>,
    pub max_pareto_k: Option<f64>,
    pub errors: Vec<String>,
}

struct Cell {
    log_ml: Option<(f64, usize)>,
    loo: Option<LooResult>,
    errors: Vec<String>,
}

fn run_cell(model: BartModel, dataset: &Dataset, prior: PriorSpec, cfg: &SweepConfig) -> Cell {
    let mut cell = Cell {
        log_ml: None,
        loo: None,
        errors: Vec::new(),
    };
    let tag = |e: Error| format!("{model} U={}: {e}", prior.upper);
    let fit = match fit_model(model, dataset, prior, &cfg.sampler) {
        Ok(f) => f,
        Err(e) => {
            cell.errors.push(tag(e));
            return cell;
        }
    };
    if cfg.method.bf() {
        let target: Box<dyn LogDensity> = match model {
            BartModel::Flat => Box::new(FlatPosterior::new(dataset, prior)),
            BartModel::Hier => Box::new(HierPosterior::new(dataset, prior)),
        };
        match bridge_sample(&fit.samples, target.as_ref(), &cfg.bridge) {
            Ok(b) => cell.log_ml = Some((b.log_ml, b.iterations)),
            Err(e) => cell.errors.push(tag(e)),
        }
    }
    if cfg.method.loo() {
        match super::loo(&fit.samples, dataset) {
            Ok(l) => cell.loo = Some(l),
            Err(e) => cell.errors.push(tag(e)),
        }
    }
    cell
}

/// Fits both models at every upper bound and compares them.
///
/// All four hyperprior bounds of the hierarchical model and both bounds of
/// the flat model are set to the same `U`.
pub fn prior_width_sweep(dataset: &Dataset, cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.uppers.is_empty() {
        return Err(Error::InvalidInput("no prior widths to sweep".into()));
    }
    if cfg.uppers.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("prior widths must be strictly ascending".into()));
    }
    let priors = cfg.uppers.iter().map(|&u| PriorSpec::new(u)).collect::<Result<Vec<_>>>()?;
    cfg.sampler.validate()?;
    if dataset.conditions.len() < 2 {
        return Err(Error::InvalidInput("model comparison needs at least two conditions".into()));
    }

    let jobs: Vec<(usize, BartModel)> = (0..priors.len())
        .flat_map(|i| [(i, BartModel::Flat), (i, BartModel::Hier)])
        .collect();
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(i, model)| run_cell(model, dataset, priors[i], cfg))
        .collect();

    let rows = cells
        .chunks(2)
        .zip(&cfg.uppers)
        .map(|(pair, &upper)| {
            let (h0, h1) = (&pair[0], &pair[1]);
            let mut row = SweepRow {
                upper,
                errors: h0.errors.iter().chain(&h1.errors).cloned().collect(),
                ..SweepRow::default()
            };
            row.log_ml_h0 = h0.log_ml.map(|v| v.0);
            row.log_ml_h1 = h1.log_ml.map(|v| v.0);
            if let (Some((l0, i0)), Some((l1, i1))) = (h0.log_ml, h1.log_ml) {
                row.log_bf = Some(bayes_factor(l1, l0));
                row.bridge_iters = Some(i0.max(i1));
            }
            if let Some(l) = &h0.loo {
                row.elpd_h0 = Some(l.elpd_loo);
                row.se_h0 = Some(l.se);
            }
            if let Some(l) = &h1.loo {
                row.elpd_h1 = Some(l.elpd_loo);
                row.se_h1 = Some(l.se);
            }
            if let (Some(a), Some(b)) = (&h0.loo, &h1.loo) {
                match elpd_diff(a, b) {
                    Ok(d) => {
                        row.elpd_diff = Some(d.diff);
                        row.se_diff = Some(d.se);
                    }
                    Err(e) => row.errors.push(e.to_string()),
                }
                row.max_pareto_k = Some(a.max_pareto_k().max(b.max_pareto_k()));
            }
            row
        })
        .collect();
    Ok(rows)
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the sweep table. BF columns are left out for `Loo` and LOO
/// columns for `Bf`; failed cells are empty.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], method: SweepMethod, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Numerical(format!("writing sweep table: {e}"));
    let mut header = vec!["upper"];
    if method.bf() {
        header.extend(["log_bf", "bridge_iters"]);
    }
    if method.loo() {
        header.extend(["elpd_h0", "se_h0", "elpd_h1", "se_h1", "elpd_diff", "se_diff", "max_pareto_k"]);
    }
    w.write_record(&header).map_err(err)?;
    for r in rows {
        let mut rec = vec![r.upper.to_string()];
        if method.bf() {
            rec.extend([cell(r.log_bf), cell(r.bridge_iters)]);
        }
        if method.loo() {
            rec.extend([
                cell(r.elpd_h0),
                cell(r.se_h0),
                cell(r.elpd_h1),
                cell(r.se_h1),
                cell(r.elpd_diff),
                cell(r.se_diff),
                cell(r.max_pareto_k),
            ]);
        }
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Numerical(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths_must_ascend() {
        let d = crate::data::synth_george(&crate::data::SynthConfig::george(1)).unwrap();
        assert!(prior_width_sweep(&d, &SweepConfig::new(vec![20.0, 10.0])).is_err());
        assert!(prior_width_sweep(&d, &SweepConfig::new(vec![])).is_err());
        assert!(prior_width_sweep(&d, &SweepConfig::new(vec![-1.0])).is_err());
    }

    #[test]
    fn loo_only_table_has_no_bf_columns() {
        let row = SweepRow {
            upper: 10.0,
            elpd_h0: Some(-1.5),
            ..SweepRow::default()
        };
        let mut out = Vec::new();
        write_sweep_csv(&[row], SweepMethod::Loo, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let header = text.lines().next().unwrap();
        assert!(!header.contains("log_bf"));
        assert_eq!(text.lines().nth(1).unwrap(), "10,-1.5,,,,,,");
    }

    #[test]
    fn method_round_trip() {
        for m in [SweepMethod::Bf, SweepMethod::Loo, SweepMethod::Both] {
            assert_eq!(m.as_str().parse::<SweepMethod>().unwrap(), m);
        }
        assert!("x".parse::<SweepMethod>().is_err());
    }
}
