//! Fit the hierarchical model to a synthetic three-condition dataset and
//! print posterior summaries with convergence diagnostics.
//!
//! ```bash
//! cargo run --release --example fit_posterior
//! ```

use bartlab::data::{synth_george, SynthConfig};
use bartlab::infer::{fit_model, SamplerConfig};
use bartlab::model::{BartModel, PriorSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = SynthConfig::george(1);
    let data = synth_george(&truth)?;
    let fit = fit_model(BartModel::Hier, &data, PriorSpec::new(10.0)?, &SamplerConfig::default())?;

    let s = &fit.samples;
    let d = &fit.diagnostics;
    println!("{:>16} {:>9} {:>9} {:>9} {:>7} {:>7}", "", "mean", "5%", "95%", "R-hat", "ESS");
    for (i, name) in s.names.iter().enumerate() {
        println!(
            "{:>16} {:>9.3} {:>9.3} {:>9.3} {:>7.3} {:>7.0}",
            name,
            s.mean(i),
            s.quantile(i, 0.05),
            s.quantile(i, 0.95),
            d.rhat[i].unwrap_or(f64::NAN),
            d.ess_bulk[i].unwrap_or(f64::NAN),
        );
    }
    println!("truth:");
    for c in &truth.conditions {
        println!("  {} (p = {}): gamma_plus {}, beta {}", c.label, c.p, c.params.gamma_plus, c.params.beta);
    }
    Ok(())
}
