//! Bridge sampling on a model whose marginal likelihood is known: a binomial
//! count with a uniform prior on the rate has evidence 1 / (n + 1).
//!
//! ```bash
//! cargo run --release --example bridge_sampling
//! ```

use bartlab::compare::{bridge_sample, BridgeConfig};
use bartlab::infer::{fit, SamplerConfig};
use bartlab::model::ConjugateHarness;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SamplerConfig {
        warmup: 1000,
        samples: 2000,
        thin: 1,
        ..SamplerConfig::default()
    };
    for (n, y) in [(10, 3), (10, 9), (50, 20)] {
        let harness = ConjugateHarness::binomial(n, y);
        let f = fit(&harness, &cfg)?;
        let b = bridge_sample(&f.samples, &harness, &BridgeConfig::default())?;
        println!(
            "n = {n:>2}, y = {y:>2}: log ML {:.4} (SE {:.4}, {} iterations), exact {:.4}",
            b.log_ml,
            b.log_ml_se(),
            b.iterations,
            -((n + 1) as f64).ln()
        );
    }
    Ok(())
}
