//! Shuffle trials across conditions and rerun the comparison. Once the
//! condition labels carry no information the hierarchy should lose.
//!
//! ```bash
//! cargo run --release --example permutation_null
//! ```

use bartlab::compare::{prior_width_sweep, SweepConfig, SweepMethod};
use bartlab::data::{permute_conditions, synth_george, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = synth_george(&SynthConfig::george(1))?;
    let cfg = SweepConfig {
        method: SweepMethod::Bf,
        ..SweepConfig::new(vec![10.0, 20.0, 50.0])
    };
    for (label, d) in [("original", data.clone()), ("permuted", permute_conditions(&data, 1)?)] {
        let rows = prior_width_sweep(&d, &cfg)?;
        let bfs: Vec<String> = rows
            .iter()
            .map(|r| match r.log_bf {
                Some(b) => format!("U={}: {b:+.2}", r.upper),
                None => format!("U={}: failed ({})", r.upper, r.errors.join("; ")),
            })
            .collect();
        println!("{label:>9}: {}", bfs.join(", "));
    }
    Ok(())
}
