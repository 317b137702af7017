//! PSIS-LOO for both models on the same data, and the elpd difference.
//!
//! ```bash
//! cargo run --release --example psis_loo
//! ```

use bartlab::compare::{elpd_diff, loo, PARETO_K_THRESHOLD};
use bartlab::data::{synth_george, SynthConfig};
use bartlab::infer::{fit_model, SamplerConfig};
use bartlab::model::{BartModel, PriorSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = synth_george(&SynthConfig::george(2))?;
    let prior = PriorSpec::new(10.0)?;
    let cfg = SamplerConfig::default();

    let mut results = Vec::new();
    for model in [BartModel::Flat, BartModel::Hier] {
        let f = fit_model(model, &data, prior, &cfg)?;
        let l = loo(&f.samples, &data)?;
        println!(
            "{model:>5}: elpd_loo {:9.2} (SE {:.2}), {} decisions, max k {:.2}, {} above {}",
            l.elpd_loo,
            l.se,
            l.pointwise.len(),
            l.max_pareto_k(),
            l.unreliable().len(),
            PARETO_K_THRESHOLD
        );
        results.push(l);
    }
    let d = elpd_diff(&results[0], &results[1])?;
    println!("hier - flat: {:.2} (SE {:.2})", d.diff, d.se);
    Ok(())
}
