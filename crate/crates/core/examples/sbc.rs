//! Simulation-based calibration of the complete-pooling model, plus a
//! negative control whose draws are shifted by +0.5.
//!
//! ```bash
//! cargo run --release --example sbc
//! ```

use bartlab::infer::{sbc, Design, SamplerConfig, SbcOptions};
use bartlab::model::{BartModel, PriorSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SamplerConfig {
        warmup: 1000,
        samples: 1000,
        thin: 4,
        ..SamplerConfig::default()
    };
    let prior = PriorSpec::new(10.0)?;
    for offset in [0.0, 0.5] {
        let opts = SbcOptions {
            draw_offset: offset,
            ..SbcOptions::default()
        };
        let report = sbc(BartModel::Flat, &Design::default(), 200, prior, &cfg, &opts)?;
        println!("draw offset {offset} ({} replicates dropped):", report.failed);
        for p in &report.params {
            println!("  {:>10}: chi2 {:7.2}, p {:.4}  {:?}", p.name, p.chi_square, p.p_value, p.histogram);
        }
    }
    Ok(())
}
