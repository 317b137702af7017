use super::{BoundedTransform, DecisionCounts, LogDensity, ModelKind, PopProbability, PriorSpec, SubjectParams};
use crate::data::Dataset;

/// Complete-pooling model: one `(gamma_plus, beta)` pair with Uniform(0, U)
/// priors shared by every condition in the dataset.
///
/// Unconstrained coordinates are the scaled log-odds of the two parameters.
#[derive(Clone, Debug)]
pub struct FlatPosterior {
    transform: BoundedTransform,
    conditions: Vec<(PopProbability, DecisionCounts)>,
}

impl FlatPosterior {
    pub fn new(dataset: &Dataset, prior: PriorSpec) -> Self {
        FlatPosterior {
            transform: BoundedTransform::new(prior.upper),
            conditions: dataset.decision_counts(),
        }
    }

    pub fn transform(&self) -> BoundedTransform {
        self.transform
    }

    pub fn unconstrain(&self, params: &SubjectParams) -> Vec<f64> {
        vec![
            self.transform.unconstrain(params.gamma_plus),
            self.transform.unconstrain(params.beta),
        ]
    }

    pub fn params(&self, x: &[f64]) -> SubjectParams {
        SubjectParams {
            gamma_plus: self.transform.constrain(x[0]),
            beta: self.transform.constrain(x[1]),
        }
    }

    pub fn loglik(&self, params: &SubjectParams) -> f64 {
        self.conditions
            .iter()
            .map(|(p, counts)| counts.loglik(params.gamma_plus, params.beta, *p))
            .sum()
    }
}

impl LogDensity for FlatPosterior {
    fn kind(&self) -> ModelKind {
        ModelKind::Flat
    }

    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let prior = self.transform.log_prior_with_jacobian(x[0]) + self.transform.log_prior_with_jacobian(x[1]);
        prior + self.loglik(&self.params(x))
    }

    fn unconstrained_names(&self) -> Vec<String> {
        vec!["logit_gamma_plus".into(), "logit_beta".into()]
    }

    fn constrained_names(&self) -> Vec<String> {
        vec!["gamma_plus".into(), "beta".into()]
    }

    fn constrain(&self, x: &[f64]) -> Vec<f64> {
        let p = self.params(x);
        vec![p.gamma_plus, p.beta]
    }

    fn constrained_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, self.transform.upper); 2]
    }
}

/// Log posterior of the complete-pooling model at an unconstrained point.
pub fn log_posterior_flat(point: &[f64], dataset: &Dataset, prior: PriorSpec) -> f64 {
    FlatPosterior::new(dataset, prior).log_density(point)
}
