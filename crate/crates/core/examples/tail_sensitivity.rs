//! How the upper bound of the uniform prior moves the predicted pump counts.
//!
//! ```bash
//! cargo run --release --example tail_sensitivity
//! ```

use bartlab::simulate::{tail_sensitivity_sweep, DesignMode, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SimConfig::default().with_pop_probs(&[0.10])?;
    let rows = tail_sensitivity_sweep(&[5.0, 10.0, 20.0, 50.0], &cfg)?;

    println!("{:>5} {:>11} {:>8} {:>8}", "U", "mode", "median", "q99");
    for mode in DesignMode::BOTH {
        for r in rows.iter().filter(|r| r.mode == mode) {
            println!("{:>5} {:>11} {:>8.2} {:>8.2}", r.upper, r.mode, r.quantiles.q50, r.q99);
        }
    }
    Ok(())
}
