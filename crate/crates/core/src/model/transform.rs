use serde::{Deserialize, Serialize};

use crate::stats::softplus;

/// Maps `(0, upper)` to the real line with a scaled log-odds transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedTransform {
    pub upper: f64,
}

impl BoundedTransform {
    pub fn new(upper: f64) -> Self {
        BoundedTransform { upper }
    }

    #[inline]
    pub fn constrain(&self, u: f64) -> f64 {
        let s = if u >= 0.0 {
            1.0 / (1.0 + (-u).exp())
        } else {
            let e = u.exp();
            e / (1.0 + e)
        };
        self.upper * s
    }

    #[inline]
    pub fn unconstrain(&self, x: f64) -> f64 {
        (x / (self.upper - x)).ln()
    }

    /// `ln |dx/du|` at `u`.
    #[inline]
    pub fn log_jacobian(&self, u: f64) -> f64 {
        self.upper.ln() - softplus(u) - softplus(-u)
    }

    /// Log density of Uniform(0, upper) on the constrained scale.
    #[inline]
    pub fn log_uniform_prior(&self) -> f64 {
        -self.upper.ln()
    }

    /// Prior plus Jacobian; equals `-softplus(u) - softplus(-u)` and so
    /// stays finite on the whole real line.
    #[inline]
    pub fn log_prior_with_jacobian(&self, u: f64) -> f64 {
        -softplus(u) - softplus(-u)
    }
}
