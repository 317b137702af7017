use super::{omega, BoundedTransform, DecisionCounts, HyperParams, LogDensity, ModelKind, PopProbability, PriorSpec};
use crate::data::Dataset;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Hierarchical model over conditions, non-centered:
/// `gamma_plus[i] = mu_gamma + sigma_gamma * z_gamma[i]` and likewise for
/// `beta[i]`, with `z ~ N(0, 1)` and Uniform(0, U) hyperpriors.
///
/// Unconstrained layout: the four log-odds hyperparameters
/// `(mu_gamma, sigma_gamma, mu_beta, sigma_beta)`, then `z_gamma[0..C]`,
/// then `z_beta[0..C]`. Condition parameters are not truncated at zero.
#[derive(Clone, Debug)]
pub struct HierPosterior {
    transform: BoundedTransform,
    conditions: Vec<(PopProbability, DecisionCounts)>,
}

/// Condition-level parameters implied by a point; may be negative.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionParams {
    pub hyper: HyperParams,
    pub gamma_plus: Vec<f64>,
    pub beta: Vec<f64>,
}

impl HierPosterior {
    pub fn new(dataset: &Dataset, prior: PriorSpec) -> Self {
        HierPosterior {
            transform: BoundedTransform::new(prior.upper),
            conditions: dataset.decision_counts(),
        }
    }

    pub fn n_conditions(&self) -> usize {
        self.conditions.len()
    }

    pub fn transform(&self) -> BoundedTransform {
        self.transform
    }

    pub fn unconstrain(&self, hyper: &HyperParams, z_gamma: &[f64], z_beta: &[f64]) -> Vec<f64> {
        assert_eq!(z_gamma.len(), self.n_conditions());
        assert_eq!(z_beta.len(), self.n_conditions());
        let mut x: Vec<f64> = hyper.as_array().iter().map(|&v| self.transform.unconstrain(v)).collect();
        x.extend_from_slice(z_gamma);
        x.extend_from_slice(z_beta);
        x
    }

    pub fn condition_params(&self, x: &[f64]) -> ConditionParams {
        let c = self.n_conditions();
        let t = &self.transform;
        let hyper = HyperParams {
            mu_gamma: t.constrain(x[0]),
            sigma_gamma: t.constrain(x[1]),
            mu_beta: t.constrain(x[2]),
            sigma_beta: t.constrain(x[3]),
        };
        let gamma_plus = x[4..4 + c].iter().map(|z| hyper.mu_gamma + hyper.sigma_gamma * z).collect();
        let beta = x[4 + c..4 + 2 * c].iter().map(|z| hyper.mu_beta + hyper.sigma_beta * z).collect();
        ConditionParams { hyper, gamma_plus, beta }
    }

    /// Condition-level `(gamma_plus, beta)` from view coordinates.
    fn view_pairs(&self, view: usize, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let c = self.n_conditions();
        let first = &y[4..4 + c];
        let second = &y[4 + c..4 + 2 * c];
        if view != 1 {
            (first.to_vec(), second.to_vec())
        } else {
            let gamma = (0..c)
                .map(|i| second[i] / (first[i] * omega(1.0, self.conditions[i].0)))
                .collect();
            (gamma, first.to_vec())
        }
    }

    pub fn loglik(&self, params: &ConditionParams) -> f64 {
        self.conditions
            .iter()
            .enumerate()
            .map(|(i, (p, counts))| counts.loglik(params.gamma_plus[i], params.beta[i], *p))
            .sum()
    }
}

impl LogDensity for HierPosterior {
    fn kind(&self) -> ModelKind {
        ModelKind::Hierarchical {
            conditions: self.n_conditions(),
        }
    }

    fn dim(&self) -> usize {
        4 + 2 * self.n_conditions()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let hyper: f64 = x[..4].iter().map(|&u| self.transform.log_prior_with_jacobian(u)).sum();
        let normal: f64 = x[4..].iter().map(|z| -0.5 * z * z - LN_SQRT_2PI).sum();
        hyper + normal + self.loglik(&self.condition_params(x))
    }

    fn unconstrained_names(&self) -> Vec<String> {
        let mut names: Vec<String> = ["mu_gamma", "sigma_gamma", "mu_beta", "sigma_beta"]
            .iter()
            .map(|n| format!("logit_{n}"))
            .collect();
        names.extend((1..=self.n_conditions()).map(|i| format!("z_gamma[{i}]")));
        names.extend((1..=self.n_conditions()).map(|i| format!("z_beta[{i}]")));
        names
    }

    fn constrained_names(&self) -> Vec<String> {
        let mut names: Vec<String> = ["mu_gamma", "sigma_gamma", "mu_beta", "sigma_beta"]
            .iter()
            .map(|n| n.to_string())
            .collect();
        names.extend((1..=self.n_conditions()).map(|i| format!("gamma_plus[{i}]")));
        names.extend((1..=self.n_conditions()).map(|i| format!("beta[{i}]")));
        names
    }

    fn constrain(&self, x: &[f64]) -> Vec<f64> {
        let cp = self.condition_params(x);
        let mut out = cp.hyper.as_array().to_vec();
        out.extend(cp.gamma_plus);
        out.extend(cp.beta);
        out
    }

    /// View 0 is the centered form `(logit hyper, gamma_plus[..], beta[..])`.
    /// View 1 replaces each condition's pair by the slope and intercept of
    /// the pump log-odds, `(a, b) = (beta, beta * omega)`, which turns the
    /// `beta -> 0`, `|gamma_plus| -> inf` ridges into straight lines.
    /// View 2 is the centered form again, moving only the hyperparameters.
    fn n_views(&self) -> usize {
        3
    }

    /// Flip `k` negates condition `k`'s `(gamma_plus, beta)`. Near a
    /// constant pump rate (`beta` close to 0) the two signs fit almost
    /// equally well but are separated by `|gamma_plus| -> inf`.
    fn n_flips(&self) -> usize {
        self.n_conditions()
    }

    fn flip(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let c = self.n_conditions();
        let t = &self.transform;
        let mut y = x.to_vec();
        // z -> -z - 2 mu / sigma maps mu + sigma z to its negative
        y[4 + k] = -x[4 + k] - 2.0 * t.constrain(x[0]) / t.constrain(x[1]);
        y[4 + c + k] = -x[4 + c + k] - 2.0 * t.constrain(x[2]) / t.constrain(x[3]);
        y
    }

    fn view_block(&self, view: usize) -> Option<Vec<usize>> {
        (view == 2).then(|| vec![0, 1, 2, 3])
    }

    fn to_view(&self, view: usize, x: &[f64]) -> Vec<f64> {
        let c = self.n_conditions();
        let cp = self.condition_params(x);
        let mut y = x[..4].to_vec();
        if view != 1 {
            y.extend(cp.gamma_plus);
            y.extend(cp.beta);
        } else {
            y.extend(cp.beta.iter().copied());
            y.extend((0..c).map(|i| cp.beta[i] * omega(cp.gamma_plus[i], self.conditions[i].0)));
        }
        y
    }

    fn from_view(&self, view: usize, y: &[f64]) -> Vec<f64> {
        let c = self.n_conditions();
        let t = &self.transform;
        let (mg, sg, mb, sb) = (t.constrain(y[0]), t.constrain(y[1]), t.constrain(y[2]), t.constrain(y[3]));
        let (gamma, beta) = self.view_pairs(view, y);
        debug_assert!(view < 3);
        let mut x = y[..4].to_vec();
        x.extend(gamma.iter().map(|g| (g - mg) / sg));
        x.extend(beta.iter().map(|b| (b - mb) / sb));
        debug_assert_eq!(x.len(), 4 + 2 * c);
        x
    }

    fn log_density_view(&self, view: usize, y: &[f64]) -> f64 {
        let t = &self.transform;
        let hyper: f64 = y[..4].iter().map(|&u| t.log_prior_with_jacobian(u)).sum();
        let (mg, sg, mb, sb) = (t.constrain(y[0]), t.constrain(y[1]), t.constrain(y[2]), t.constrain(y[3]));
        let normal = |v: f64, m: f64, s: f64| {
            let z = (v - m) / s;
            -0.5 * z * z - s.ln() - LN_SQRT_2PI
        };
        let (gamma, beta) = self.view_pairs(view, y);
        let mut total = hyper;
        for (i, (p, counts)) in self.conditions.iter().enumerate() {
            total += normal(gamma[i], mg, sg) + normal(beta[i], mb, sb) + counts.loglik(gamma[i], beta[i], *p);
            if view == 1 {
                // d(gamma, beta) / d(a, b) = 1 / (|a| * omega(1, p))
                total -= beta[i].abs().ln() + omega(1.0, *p).ln();
            }
        }
        if total.is_nan() {
            f64::NEG_INFINITY
        } else {
            total
        }
    }

    fn constrained_bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(0.0, self.transform.upper); 4];
        b.extend(std::iter::repeat((f64::NEG_INFINITY, f64::INFINITY)).take(2 * self.n_conditions()));
        b
    }
}

/// Log posterior of the hierarchical model at an unconstrained point.
pub fn log_posterior_hier(point: &[f64], dataset: &Dataset, prior: PriorSpec) -> f64 {
    HierPosterior::new(dataset, prior).log_density(point)
}

#[cfg(test)]
mod view_tests {
    use super::*;
    use crate::data::{synth_george, SynthConfig};

    #[test]
    fn views_are_consistent_reparameterizations() {
        let d = synth_george(&SynthConfig::george(3)).unwrap();
        let post = HierPosterior::new(&d, PriorSpec::default());
        let x = vec![-0.4, 0.3, 0.9, -1.2, 0.5, -0.7, 1.1, 0.2, -0.3, 0.8];
        let cp = post.condition_params(&x);
        let t = post.transform();
        let (sg, sb) = (t.constrain(x[1]), t.constrain(x[3]));
        for view in 0..post.n_views() {
            let y = post.to_view(view, &x);
            let back = post.from_view(view, &y);
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12);
            }
            // z -> (gamma, beta) contributes -C ln sigma_gamma - C ln sigma_beta
            let mut jac = -3.0 * sg.ln() - 3.0 * sb.ln();
            if view == 1 {
                for i in 0..3 {
                    jac -= cp.beta[i].abs().ln() + omega(1.0, d.conditions[i].p).ln();
                }
            }
            let diff = post.log_density_view(view, &y) - (post.log_density(&x) + jac);
            assert!(diff.abs() < 1e-9, "view {view}: {diff}");
        }
    }

    #[test]
    fn flips_negate_one_condition_and_are_involutions() {
        let d = synth_george(&SynthConfig::george(3)).unwrap();
        let post = HierPosterior::new(&d, PriorSpec::default());
        let x = vec![-0.4, 0.3, 0.9, -1.2, 0.5, -0.7, 1.1, 0.2, -0.3, 0.8];
        let before = post.condition_params(&x);
        for k in 0..post.n_flips() {
            let y = post.flip(k, &x);
            let after = post.condition_params(&y);
            for i in 0..3 {
                let sign = if i == k { -1.0 } else { 1.0 };
                assert!((after.gamma_plus[i] - sign * before.gamma_plus[i]).abs() < 1e-12);
                assert!((after.beta[i] - sign * before.beta[i]).abs() < 1e-12);
            }
            let back = post.flip(k, &y);
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Condition, Dataset};
    use crate::model::{trial_loglik_raw, FlatPosterior, Outcome, SubjectParams, TrialRecord};

    fn dataset(n_conditions: usize) -> Dataset {
        let probs = [0.1, 0.15, 0.2];
        let conditions = (0..n_conditions)
            .map(|i| Condition::new(format!("c{i}"), probs[i]).unwrap())
            .collect();
        let mut trials = Vec::new();
        for c in 0..n_conditions {
            for (j, &(pumps, popped)) in [(2u32, false), (6, true), (4, false), (0, false)].iter().enumerate() {
                let outcome = if popped { Outcome::Popped } else { Outcome::Cashed };
                trials.push(TrialRecord::new(c, j, pumps + c as u32, outcome).unwrap());
            }
        }
        Dataset::new(conditions, trials).unwrap()
    }

    fn normal_logpdf(z: f64) -> f64 {
        -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }

    #[test]
    fn matches_component_oracle() {
        let data = dataset(3);
        let prior = PriorSpec::new(10.0).unwrap();
        let model = HierPosterior::new(&data, prior);
        let x = [0.2, -1.0, 0.7, 0.1, 0.5, -1.3, 2.0, -0.4, 0.9, 0.0];
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let hyper: Vec<f64> = x[..4].iter().map(|&v| 10.0 * s(v)).collect();
        let log_prior_jac: f64 = x[..4].iter().map(|&v| -(10f64).ln() + (10.0 * s(v) * (1.0 - s(v))).ln()).sum();
        let z: f64 = x[4..].iter().map(|&v| normal_logpdf(v)).sum();
        let ll: f64 = data
            .trials
            .iter()
            .map(|t| {
                let c = t.condition;
                let g = hyper[0] + hyper[1] * x[4 + c];
                let b = hyper[2] + hyper[3] * x[7 + c];
                trial_loglik_raw(g, b, data.conditions[c].p, t)
            })
            .sum();
        assert!((model.log_density(&x) - (log_prior_jac + z + ll)).abs() < 1e-10);
        assert_eq!(model.dim(), 10);
        assert_eq!(model.constrained_names().len(), 10);
    }

    #[test]
    fn degenerate_hierarchy_matches_flat_likelihood() {
        let data = dataset(3);
        let prior = PriorSpec::new(10.0).unwrap();
        let hier = HierPosterior::new(&data, prior);
        let flat = FlatPosterior::new(&data, prior);
        let x = [0.3, -60.0, -0.8, -60.0, 1.0, -2.0, 0.5, 0.3, 0.1, -1.0];
        let cp = hier.condition_params(&x);
        let mu = SubjectParams::new(cp.hyper.mu_gamma, cp.hyper.mu_beta).unwrap();
        assert!((hier.loglik(&cp) - flat.loglik(&mu)).abs() < 1e-9);
    }

    #[test]
    fn single_condition_differs_from_flat_by_prior_terms() {
        let data = dataset(1);
        let prior = PriorSpec::new(10.0).unwrap();
        let hier = HierPosterior::new(&data, prior);
        let flat = FlatPosterior::new(&data, prior);
        let x = [0.1, -0.5, 0.4, -1.0, 0.7, -0.2];
        let cp = hier.condition_params(&x);
        let sp = SubjectParams::new(cp.gamma_plus[0], cp.beta[0]).unwrap();
        let t = hier.transform();
        let extra: f64 =
            x[..4].iter().map(|&u| t.log_prior_with_jacobian(u)).sum::<f64>() + normal_logpdf(x[4]) + normal_logpdf(x[5]);
        assert!((hier.log_density(&x) - (flat.loglik(&sp) + extra)).abs() < 1e-10);
    }

    #[test]
    fn negative_condition_params_are_tolerated() {
        let data = dataset(3);
        let model = HierPosterior::new(&data, PriorSpec::default());
        let x = [-2.0, 2.0, -2.0, 2.0, -3.0, -3.0, -3.0, -3.0, -3.0, -3.0];
        let cp = model.condition_params(&x);
        assert!(cp.gamma_plus.iter().all(|&g| g < 0.0));
        assert!(model.log_density(&x).is_finite());
    }
}
