use statrs::function::gamma::ln_gamma;

use super::{BoundedTransform, LogDensity, ModelKind};

/// Bernoulli observations with a Uniform(0, 1) prior on the success rate,
/// expressed through the same bounded transform as the BART models. The
/// posterior is Beta(1 + y, 1 + n - y), which makes this the oracle for the
/// sampler, bridge sampling and PSIS-LOO.
#[derive(Clone, Debug)]
pub struct ConjugateHarness {
    observations: Vec<bool>,
    successes: usize,
    /// Adds `ln C(n, y)` so the marginal likelihood is that of the count,
    /// `1 / (n + 1)`, rather than of the particular sequence.
    binomial_coefficient: bool,
    transform: BoundedTransform,
}

impl ConjugateHarness {
    pub fn new(observations: Vec<bool>) -> Self {
        let successes = observations.iter().filter(|&&o| o).count();
        ConjugateHarness {
            observations,
            successes,
            binomial_coefficient: false,
            transform: BoundedTransform::new(1.0),
        }
    }

    /// A binomial count of `successes` out of `n`, marginal likelihood `1/(n+1)`.
    pub fn binomial(n: usize, successes: usize) -> Self {
        assert!(successes <= n);
        let observations = (0..n).map(|i| i < successes).collect();
        ConjugateHarness {
            binomial_coefficient: true,
            ..ConjugateHarness::new(observations)
        }
    }

    pub fn observations(&self) -> &[bool] {
        &self.observations
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    /// Drops observation `i`, for brute-force leave-one-out refits.
    pub fn without(&self, i: usize) -> Self {
        let mut obs = self.observations.clone();
        obs.remove(i);
        ConjugateHarness::new(obs)
    }

    fn beta_params(&self) -> (f64, f64) {
        let y = self.successes as f64;
        (1.0 + y, 1.0 + self.n() as f64 - y)
    }

    pub fn posterior_mean(&self) -> f64 {
        let (a, b) = self.beta_params();
        a / (a + b)
    }

    pub fn posterior_variance(&self) -> f64 {
        let (a, b) = self.beta_params();
        a * b / ((a + b).powi(2) * (a + b + 1.0))
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let (a, b) = self.beta_params();
        let log_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
        log_beta + if self.binomial_coefficient { self.log_binomial_coefficient() } else { 0.0 }
    }

    fn log_binomial_coefficient(&self) -> f64 {
        let n = self.n() as f64;
        let y = self.successes as f64;
        ln_gamma(n + 1.0) - ln_gamma(y + 1.0) - ln_gamma(n - y + 1.0)
    }

    pub fn rate(&self, x: &[f64]) -> f64 {
        self.transform.constrain(x[0])
    }

    /// Log-likelihood of each observation at success rate `rate`.
    pub fn pointwise_loglik(&self, rate: f64) -> Vec<f64> {
        self.observations
            .iter()
            .map(|&o| if o { rate.ln() } else { (1.0 - rate).ln() })
            .collect()
    }
}

impl LogDensity for ConjugateHarness {
    fn kind(&self) -> ModelKind {
        ModelKind::Harness
    }

    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let u = x[0];
        let y = self.successes as f64;
        let n = self.n() as f64;
        // ln(rate) = -softplus(-u), ln(1 - rate) = -softplus(u)
        let ll = -y * crate::stats::softplus(-u) - (n - y) * crate::stats::softplus(u);
        let coef = if self.binomial_coefficient { self.log_binomial_coefficient() } else { 0.0 };
        self.transform.log_prior_with_jacobian(u) + ll + coef
    }

    fn unconstrained_names(&self) -> Vec<String> {
        vec!["logit_rate".into()]
    }

    fn constrained_names(&self) -> Vec<String> {
        vec!["rate".into()]
    }

    fn constrain(&self, x: &[f64]) -> Vec<f64> {
        vec![self.rate(x)]
    }

    fn constrained_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0)]
    }
}

/// A normalized standard normal in `dim` dimensions plus a constant
/// `log_normalizer`, so its integral is `exp(log_normalizer)`.
#[derive(Clone, Debug)]
pub struct StandardNormalTarget {
    pub dim: usize,
    pub log_normalizer: f64,
}

impl StandardNormalTarget {
    pub fn new(dim: usize) -> Self {
        StandardNormalTarget { dim, log_normalizer: 0.0 }
    }
}

impl LogDensity for StandardNormalTarget {
    fn kind(&self) -> ModelKind {
        ModelKind::Reference
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let sq: f64 = x.iter().map(|v| v * v).sum();
        -0.5 * sq - 0.5 * self.dim as f64 * (2.0 * std::f64::consts::PI).ln() + self.log_normalizer
    }

    fn unconstrained_names(&self) -> Vec<String> {
        (1..=self.dim).map(|i| format!("x[{i}]")).collect()
    }

    fn constrained_names(&self) -> Vec<String> {
        self.unconstrained_names()
    }

    fn constrain(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn constrained_bounds(&self) -> Vec<(f64, f64)> {
        vec![(f64::NEG_INFINITY, f64::INFINITY); self.dim]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Trapezoid rule over the unconstrained line.
    fn integrate(f: impl Fn(f64) -> f64) -> f64 {
        let (a, b, n) = (-40.0, 40.0, 200_000);
        let h = (b - a) / n as f64;
        (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * f(a + i as f64 * h)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn binomial_marginal_is_one_over_n_plus_one() {
        let h = ConjugateHarness::binomial(10, 7);
        assert!((h.log_marginal_likelihood() - (1.0f64 / 11.0).ln()).abs() < 1e-12);
        let z = integrate(|u| h.log_density(&[u]).exp());
        assert!((z.ln() - (1.0f64 / 11.0).ln()).abs() < 1e-8);
    }

    #[test]
    fn moments_match_quadrature() {
        let h = ConjugateHarness::new(vec![true, false, true, true, false, true]);
        let z = integrate(|u| h.log_density(&[u]).exp());
        let m = integrate(|u| h.rate(&[u]) * h.log_density(&[u]).exp()) / z;
        let m2 = integrate(|u| h.rate(&[u]).powi(2) * h.log_density(&[u]).exp()) / z;
        assert!((z.ln() - h.log_marginal_likelihood()).abs() < 1e-8);
        assert!((m - h.posterior_mean()).abs() < 1e-9);
        assert!((m2 - m * m - h.posterior_variance()).abs() < 1e-9);
    }
}
