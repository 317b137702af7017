//! Simulate data from known parameters, refit, and check bias and coverage
//! of the 90% intervals.
//!
//! ```bash
//! cargo run --release --example parameter_recovery
//! ```

use bartlab::infer::{parameter_recovery, Design, RecoveryTruth, SamplerConfig};
use bartlab::model::{BartModel, PriorSpec, SubjectParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = RecoveryTruth::Shared(SubjectParams::new(0.6, 1.2)?);
    let design = Design {
        trials_per_condition: 60,
        ..Design::default()
    };
    let cfg = SamplerConfig {
        warmup: 1000,
        samples: 1000,
        thin: 2,
        ..SamplerConfig::default()
    };
    let report = parameter_recovery(BartModel::Flat, &truth, &design, 40, PriorSpec::new(10.0)?, &cfg)?;
    for p in &report.params {
        println!(
            "{:>10}: truth {:.3}, mean estimate {:.3}, rmse {:.3}, 90% coverage {:.2}",
            p.name, p.truth, p.mean_estimate, p.rmse, p.coverage
        );
    }
    Ok(())
}
