//! Model comparison: bridge-sampling Bayes factors, PSIS-LOO and the
//! prior-width sweep that runs both over a range of uniform upper bounds.

mod bridge;
mod psis;
mod sweep;

use rayon::prelude::*;

use crate::data::Dataset;
use crate::infer::PosteriorSamples;
use crate::model::{log_theta, omega, ModelKind};
use crate::{Error, Result};

pub use bridge::{bayes_factor, bridge_sample, BridgeConfig, BridgeResult, Proposal};
pub use psis::{
    elpd_diff, fit_gpd, psis_loo, psis_smooth, tail_length, ElpdDiff, GpdFit, LogLikMatrix, LooResult, PsisWeights,
    PARETO_K_THRESHOLD,
};
pub use sweep::{prior_width_sweep, write_sweep_csv, SweepConfig, SweepMethod, SweepRow};

/// Per-choice log-likelihood of every draw.
///
/// Columns follow the dataset's trial order and, within a trial, the order
/// of [`crate::model::TrialRecord::decisions`]. Popped trials contribute
/// only their pump decisions.
pub fn pointwise_loglik(samples: &PosteriorSamples, dataset: &Dataset) -> Result<LogLikMatrix> {
    let n_cond = dataset.conditions.len();
    let (g_idx, b_idx): (Vec<usize>, Vec<usize>) = match samples.kind {
        ModelKind::Flat => (vec![0; n_cond], vec![1; n_cond]),
        ModelKind::Hierarchical { conditions } if conditions == n_cond => {
            ((4..4 + n_cond).collect(), (4 + n_cond..4 + 2 * n_cond).collect())
        }
        ModelKind::Hierarchical { conditions } => {
            return Err(Error::InvalidInput(format!(
                "draws have {conditions} conditions but the dataset has {n_cond}"
            )))
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "pointwise log-likelihood needs BART draws, got {}",
                other.label()
            )))
        }
    };
    if let Some(t) = dataset.trials.iter().find(|t| t.condition >= n_cond) {
        return Err(Error::InvalidInput(format!("trial references missing condition {}", t.condition)));
    }
    let choices: Vec<(usize, f64, bool)> = dataset
        .trials
        .iter()
        .flat_map(|t| t.decisions().map(move |(k, pumped)| (t.condition, k as f64, pumped)))
        .collect();
    let draws: Vec<&Vec<f64>> = samples.constrained_draws().collect();
    let (g_idx, b_idx, choices) = (&g_idx, &b_idx, &choices);
    let values: Vec<f64> = draws
        .par_iter()
        .flat_map_iter(|d| {
            let omegas: Vec<f64> = (0..n_cond).map(|c| omega(d[g_idx[c]], dataset.conditions[c].p)).collect();
            choices.iter().map(move |&(c, k, pumped)| {
                let (lp, lq) = log_theta(d[b_idx[c]], omegas[c], k);
                if pumped {
                    lp
                } else {
                    lq
                }
            })
        })
        .collect();
    LogLikMatrix::new(draws.len(), choices.len(), values)
}

/// PSIS-LOO over single choices for a fitted BART model.
pub fn loo(samples: &PosteriorSamples, dataset: &Dataset) -> Result<LooResult> {
    psis_loo(&pointwise_loglik(samples, dataset)?)
}
