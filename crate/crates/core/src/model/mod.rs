//! BART model equations, likelihood and posterior densities.
//!
//! A participant facing pop probability `p` has a target number of pumps
//! `omega = -gamma_plus / ln(1 - p)`. At pump opportunity `k` they pump with
//! probability `theta_k = 1 / (1 + exp(beta * (k - omega)))`. Decisions are
//! coded `1` for pump and `0` for cash out. A popped balloon ends the trial
//! before any cash-out decision is seen, so popped trials only contribute
//! their pump decisions; the pop event itself does not depend on the
//! parameters and is left out of the likelihood.

mod flat;
mod harness;
mod hier;
mod transform;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::stats::softplus;
use crate::{Error, Result};

pub use flat::{log_posterior_flat, FlatPosterior};
pub use harness::{ConjugateHarness, StandardNormalTarget};
pub use hier::{log_posterior_hier, HierPosterior};
pub use transform::BoundedTransform;

/// Probability that a single pump pops the balloon, strictly inside (0, 1).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PopProbability(f64);

impl PopProbability {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(PopProbability(p))
        } else {
            Err(Error::Domain(format!("pop probability must lie in (0, 1), got {p}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PopProbability {
    type Error = Error;
    fn try_from(p: f64) -> Result<Self> {
        PopProbability::new(p)
    }
}

impl From<PopProbability> for f64 {
    fn from(p: PopProbability) -> f64 {
        p.0
    }
}

impl fmt::Display for PopProbability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Participant-level parameters: risk propensity `gamma_plus` and
/// behavioural consistency `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectParams {
    pub gamma_plus: f64,
    pub beta: f64,
}

impl SubjectParams {
    pub fn new(gamma_plus: f64, beta: f64) -> Result<Self> {
        if !(gamma_plus >= 0.0 && gamma_plus.is_finite()) || !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!(
                "gamma_plus and beta must be finite and non-negative, got ({gamma_plus}, {beta})"
            )));
        }
        Ok(SubjectParams { gamma_plus, beta })
    }
}

/// Group-level parameters of the hierarchical model. The `sigma_*` fields
/// are standard deviations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub mu_gamma: f64,
    pub sigma_gamma: f64,
    pub mu_beta: f64,
    pub sigma_beta: f64,
}

impl HyperParams {
    pub fn new(mu_gamma: f64, sigma_gamma: f64, mu_beta: f64, sigma_beta: f64, prior: PriorSpec) -> Result<Self> {
        let h = HyperParams {
            mu_gamma,
            sigma_gamma,
            mu_beta,
            sigma_beta,
        };
        if h.as_array().iter().all(|&v| v > 0.0 && v <= prior.upper) {
            Ok(h)
        } else {
            Err(Error::Domain(format!(
                "hyperparameters must lie in (0, {}], got {:?}",
                prior.upper, h
            )))
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.mu_gamma, self.sigma_gamma, self.mu_beta, self.sigma_beta]
    }
}

/// Upper bound `U` shared by every Uniform(0, U) prior in both models.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub upper: f64,
}

impl PriorSpec {
    pub fn new(upper: f64) -> Result<Self> {
        if upper > 0.0 && upper.is_finite() {
            Ok(PriorSpec { upper })
        } else {
            Err(Error::Domain(format!("prior upper bound must be positive, got {upper}")))
        }
    }
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec { upper: 10.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Cashed,
    Popped,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Cashed => "cashed",
            Outcome::Popped => "popped",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cashed" => Ok(Outcome::Cashed),
            "popped" => Ok(Outcome::Popped),
            other => Err(Error::InvalidInput(format!(
                "unknown outcome {other:?} (expected \"cashed\" or \"popped\")"
            ))),
        }
    }
}

/// One balloon: `pumps` affirmative decisions followed by either a cash-out
/// or a pop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialRecord {
    pub condition: usize,
    pub trial: usize,
    pub pumps: u32,
    pub outcome: Outcome,
}

impl TrialRecord {
    pub fn new(condition: usize, trial: usize, pumps: u32, outcome: Outcome) -> Result<Self> {
        if outcome == Outcome::Popped && pumps == 0 {
            return Err(Error::InvalidInput(
                "a popped trial needs at least one pump".to_string(),
            ));
        }
        Ok(TrialRecord {
            condition,
            trial,
            pumps,
            outcome,
        })
    }

    /// Number of observed Bernoulli decisions in the trial.
    pub fn n_decisions(&self) -> usize {
        self.pumps as usize + usize::from(self.outcome == Outcome::Cashed)
    }

    /// The observed decision sequence as `(k, pumped)` pairs, `k` starting at 1.
    pub fn decisions(&self) -> impl Iterator<Item = (u32, bool)> + '_ {
        let cash = (self.outcome == Outcome::Cashed).then_some((self.pumps + 1, false));
        (1..=self.pumps).map(|k| (k, true)).chain(cash)
    }
}

/// Target number of pumps, `-gamma_plus / ln(1 - p)`.
#[inline]
pub fn omega(gamma_plus: f64, p: PopProbability) -> f64 {
    -gamma_plus / (-p.0).ln_1p()
}

/// Probability of pumping at opportunity `k`. Saturates to exactly 0 or 1
/// when the exponent overflows.
#[inline]
pub fn theta(beta: f64, omega: f64, k: f64) -> f64 {
    let x = beta * (k - omega);
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// `(ln theta, ln(1 - theta))` computed directly in log space.
#[inline]
pub fn log_theta(beta: f64, omega: f64, k: f64) -> (f64, f64) {
    let x = beta * (k - omega);
    (-softplus(x), -softplus(-x))
}

/// Log-likelihood of one trial's decisions.
pub fn trial_loglik(params: &SubjectParams, p: PopProbability, trial: &TrialRecord) -> f64 {
    trial_loglik_raw(params.gamma_plus, params.beta, p, trial)
}

/// As [`trial_loglik`] but without the sign constraints on the parameters,
/// for use with hierarchical draws that may be negative.
pub fn trial_loglik_raw(gamma_plus: f64, beta: f64, p: PopProbability, trial: &TrialRecord) -> f64 {
    let w = omega(gamma_plus, p);
    trial
        .decisions()
        .map(|(k, pumped)| {
            let (lp, lq) = log_theta(beta, w, k as f64);
            if pumped {
                lp
            } else {
                lq
            }
        })
        .sum()
}

/// Which model produced a set of draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Complete pooling: one `(gamma_plus, beta)` for every condition.
    Flat,
    /// One `(gamma_plus, beta)` per condition drawn from group normals.
    Hierarchical { conditions: usize },
    /// Conjugate Bernoulli harness used to validate the machinery.
    Harness,
    /// Any other test target.
    Reference,
}

impl ModelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Flat => "flat",
            ModelKind::Hierarchical { .. } => "hier",
            ModelKind::Harness => "harness",
            ModelKind::Reference => "reference",
        }
    }
}

/// The two BART models that can be fitted to a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BartModel {
    Flat,
    Hier,
}

impl BartModel {
    pub fn as_str(self) -> &'static str {
        match self {
            BartModel::Flat => "flat",
            BartModel::Hier => "hier",
        }
    }
}

impl fmt::Display for BartModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BartModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(BartModel::Flat),
            "hier" => Ok(BartModel::Hier),
            other => Err(Error::InvalidInput(format!("unknown model {other:?} (expected flat or hier)"))),
        }
    }
}

/// A log density on an unconstrained real space, including the Jacobian of
/// the map to the constrained parameters.
pub trait LogDensity: Sync {
    fn kind(&self) -> ModelKind;

    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;

    fn unconstrained_names(&self) -> Vec<String>;

    fn constrained_names(&self) -> Vec<String>;

    fn constrain(&self, x: &[f64]) -> Vec<f64>;

    /// Closed bounds of each constrained parameter; infinite for unbounded ones.
    fn constrained_bounds(&self) -> Vec<(f64, f64)>;

    /// Number of alternative coordinate systems ("views") in which the
    /// sampler takes extra random-walk steps. Each view must be a bijection
    /// with the unconstrained space, up to sets of measure zero.
    fn n_views(&self) -> usize {
        0
    }

    /// Coordinates of the view that its random-walk step moves; `None`
    /// moves all of them. Restricting a view to a block gives a
    /// Metropolis-within-Gibbs update of that block.
    fn view_block(&self, _view: usize) -> Option<Vec<usize>> {
        None
    }

    fn to_view(&self, _view: usize, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn from_view(&self, _view: usize, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }

    /// Log density of the same distribution in view coordinates, i.e.
    /// including the log Jacobian of `from_view`.
    fn log_density_view(&self, view: usize, y: &[f64]) -> f64 {
        self.log_density(&self.from_view(view, y))
    }

    /// Number of deterministic jump moves the sampler proposes each iteration.
    fn n_flips(&self) -> usize {
        0
    }

    /// Jump `k`: an involution of the unconstrained space with unit
    /// Jacobian, so the Metropolis ratio is the density ratio alone.
    fn flip(&self, _k: usize, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

/// Decision counts for one condition, indexed by `k - 1`: how many trials
/// pumped at opportunity `k`, and how many cashed out at `k`.
///
/// The likelihood only depends on the data through these counts, which
/// keeps a posterior evaluation at `O(max pumps)` per condition.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecisionCounts {
    pub pumped: Vec<u32>,
    pub cashed: Vec<u32>,
}

impl DecisionCounts {
    pub fn from_trials<'a>(trials: impl IntoIterator<Item = &'a TrialRecord>) -> Self {
        let mut counts = DecisionCounts::default();
        for t in trials {
            let len = t.pumps as usize + 1;
            if counts.pumped.len() < len {
                counts.pumped.resize(len, 0);
                counts.cashed.resize(len, 0);
            }
            for k in 0..t.pumps as usize {
                counts.pumped[k] += 1;
            }
            if t.outcome == Outcome::Cashed {
                counts.cashed[t.pumps as usize] += 1;
            }
        }
        counts
    }

    pub fn loglik(&self, gamma_plus: f64, beta: f64, p: PopProbability) -> f64 {
        let w = omega(gamma_plus, p);
        let mut total = 0.0;
        for (i, (&np, &nc)) in self.pumped.iter().zip(&self.cashed).enumerate() {
            if np == 0 && nc == 0 {
                continue;
            }
            let (lp, lq) = log_theta(beta, w, (i + 1) as f64);
            total += np as f64 * lp + nc as f64 * lq;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(v: f64) -> PopProbability {
        PopProbability::new(v).unwrap()
    }

    #[test]
    fn pop_probability_domain() {
        assert!(PopProbability::new(0.0).is_err());
        assert!(PopProbability::new(1.0).is_err());
        assert!(PopProbability::new(f64::NAN).is_err());
        assert!(PopProbability::new(0.5).is_ok());
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega(0.0, p(0.2)), 0.0);
        let q = 1.0 - (-1.0f64).exp();
        assert!((omega(2.0, p(q)) - 2.0).abs() < 1e-12);
        // -1 / ln(0.9) evaluated with 50-digit arithmetic (mpmath).
        assert!((omega(1.0, p(0.1)) - 9.491221581029903).abs() < 1e-12);
    }

    #[test]
    fn theta_examples() {
        assert_eq!(theta(0.0, 123.4, 7.0), 0.5);
        assert_eq!(theta(5.0, 7.0, 7.0), 0.5);
        // 1 / (1 + exp(-4.49122)) with 50-digit arithmetic.
        assert!((theta(1.0, 9.49122, 5.0) - 0.9889172410974889).abs() < 1e-12);
    }

    #[test]
    fn theta_saturates_without_nan() {
        assert_eq!(theta(1e6, 0.0, 10.0), 0.0);
        assert_eq!(theta(1e6, 1e3, 1.0), 1.0);
        let (lp, lq) = log_theta(1e6, 0.0, 10.0);
        assert!(lp.is_finite() && lq == 0.0);
    }

    #[test]
    fn trial_loglik_with_flat_theta() {
        let flat = SubjectParams::new(3.0, 0.0).unwrap();
        let cashed = TrialRecord::new(0, 0, 3, Outcome::Cashed).unwrap();
        let popped = TrialRecord::new(0, 0, 3, Outcome::Popped).unwrap();
        assert!((trial_loglik(&flat, p(0.1), &cashed) - 4.0 * 0.5f64.ln()).abs() < 1e-12);
        assert!((trial_loglik(&flat, p(0.1), &popped) - 3.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn trial_loglik_matches_direct_sum() {
        let params = SubjectParams::new(1.0, 1.0).unwrap();
        let trial = TrialRecord::new(0, 0, 2, Outcome::Cashed).unwrap();
        let w = -1.0 / 0.9f64.ln();
        let th = |k: f64| 1.0 / (1.0 + (k - w).exp());
        let expected = th(1.0).ln() + th(2.0).ln() + (1.0 - th(3.0)).ln();
        assert!((trial_loglik(&params, p(0.1), &trial) - expected).abs() < 1e-12);
    }

    #[test]
    fn popped_needs_a_pump() {
        assert!(TrialRecord::new(0, 0, 0, Outcome::Popped).is_err());
        let t = TrialRecord::new(0, 0, 0, Outcome::Cashed).unwrap();
        assert_eq!(t.decisions().collect::<Vec<_>>(), vec![(1, false)]);
    }

    #[test]
    fn decision_counts_agree_with_trial_sum() {
        let trials = [
            TrialRecord::new(0, 0, 0, Outcome::Cashed).unwrap(),
            TrialRecord::new(0, 1, 4, Outcome::Popped).unwrap(),
            TrialRecord::new(0, 2, 7, Outcome::Cashed).unwrap(),
            TrialRecord::new(0, 3, 2, Outcome::Cashed).unwrap(),
        ];
        let counts = DecisionCounts::from_trials(&trials);
        for &(g, b) in &[(0.3, 2.0), (1.7, 0.4), (-0.5, 1.0), (0.8, -0.3)] {
            let direct: f64 = trials.iter().map(|t| trial_loglik_raw(g, b, p(0.15), t)).sum();
            assert!((counts.loglik(g, b, p(0.15)) - direct).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn theta_in_unit_interval(beta in 0.0..2.0f64, w in -50.0..200.0f64, k in 1u32..300) {
            let t = theta(beta, w, k as f64);
            prop_assert!((0.0..=1.0).contains(&t));
            // theta itself rounds to 0 or 1 far from the target; the log form does not
            let (lp, lq) = log_theta(beta, w, k as f64);
            prop_assert!(lp < 0.0 && lq < 0.0);
        }

        #[test]
        fn theta_decreasing_in_k(beta in 1e-3..5.0f64, w in 0.0..100.0f64, k1 in 1u32..60, dk in 1u32..5) {
            let k2 = k1 + dk;
            prop_assert!(theta(beta, w, k1 as f64) >= theta(beta, w, k2 as f64));
            prop_assert!(log_theta(beta, w, k1 as f64).0 > log_theta(beta, w, k2 as f64).0);
        }

        #[test]
        fn theta_half_at_target(beta in 0.0..50.0f64, w in 0.0..200.0f64) {
            prop_assert!((theta(beta, w, w) - 0.5).abs() < 1e-15);
        }

        #[test]
        fn omega_linear_in_gamma(g in 1e-3..20.0f64, c in 0.01..100.0f64, pv in 0.01..0.99f64) {
            let a = omega(c * g, p(pv));
            let b = c * omega(g, p(pv));
            prop_assert!(((a - b) / b).abs() < 1e-12);
        }

        #[test]
        fn omega_monotone(g in 0.1..20.0f64, p1 in 0.01..0.98f64, dp in 0.001..0.01f64) {
            prop_assert!(omega(g, p(p1)) > omega(g, p(p1 + dp)));
            prop_assert!(omega(g + 0.1, p(p1)) > omega(g, p(p1)));
        }

        #[test]
        fn trial_loglik_non_positive(g in 0.0..10.0f64, b in 0.0..10.0f64, pumps in 1u32..40, popped in any::<bool>(), pv in 0.05..0.5f64) {
            let outcome = if popped { Outcome::Popped } else { Outcome::Cashed };
            let trial = TrialRecord::new(0, 0, pumps, outcome).unwrap();
            let ll = trial_loglik(&SubjectParams::new(g, b).unwrap(), p(pv), &trial);
            prop_assert!(ll <= 0.0 && ll.is_finite());
        }
    }
}
