//! Prior predictive check for the complete-pooling model, with and without
//! the popping mechanism of the task.
//!
//! ```bash
//! cargo run --release --example prior_predictive
//! ```

use bartlab::model::PriorSpec;
use bartlab::simulate::{prior_predictive_flat, DesignMode, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let prior = PriorSpec::new(10.0)?;
    let cfg = SimConfig::default();

    for mode in DesignMode::BOTH {
        println!("{mode}:");
        for s in prior_predictive_flat(prior, &cfg, mode)? {
            let q = s.quantiles;
            println!(
                "  p = {:.2}  2.5% {:6.2}  median {:6.2}  97.5% {:6.2}  max {:6.2}",
                s.p,
                q.q025,
                q.q50,
                q.q975,
                s.max_mean()
            );
        }
    }
    // Without popping, large gamma_plus means dozens of pumps. With popping
    // the mean is capped near 1/p, whatever the prior says.
    Ok(())
}
