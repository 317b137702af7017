//! Prior predictive differences between conditions under the hierarchical
//! model. With the same pop probability everywhere the differences should be
//! symmetric around zero.
//!
//! ```bash
//! cargo run --release --example hierarchical_differences
//! ```

use bartlab::model::PriorSpec;
use bartlab::simulate::{prior_predictive_hier, sign_flip_test, DesignMode, Quantiles, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SimConfig {
        n_sims: 20_000,
        ..SimConfig::default()
    }
    .with_pop_probs(&[0.10])?;
    let h = prior_predictive_hier(PriorSpec::new(10.0)?, &cfg, DesignMode::ExperimentDesign, 3)?;

    for c in 1..h.n_conditions() {
        let d = h.mean_differences(c);
        let q = Quantiles::of(&d);
        let p = sign_flip_test(&d, 999, 7);
        println!(
            "condition {} - 1: median {:+.3}, 95% [{:+.2}, {:+.2}], sign-flip p = {:.3}",
            c + 1,
            q.q50,
            q.q025,
            q.q975,
            p
        );
    }
    println!("negative draws floored: {}", h.floored_draws());
    Ok(())
}
