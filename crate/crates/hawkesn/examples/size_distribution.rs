//! Monte-Carlo final-size distributions and size likelihoods.
//!
//! ```bash
//! cargo run --example size_distribution
//! ```

use hawkesn::kernels::{KernelFamily, RecoveryDistribution, SirSpec};
use hawkesn::simulate::size_distribution;

fn main() -> hawkesn::Result<()> {
    let recovery = RecoveryDistribution::new(KernelFamily::Exp, 1.0, None)?;

    // the two-individual race has a closed-form answer to check against:
    // P[size = 2] = beta / (beta + 2 gamma)
    let race = SirSpec::new(1.0, recovery, 2.0)?;
    let dist = size_distribution(&race, 20_000, 1)?;
    let p2 = dist.counts()[1] as f64 / dist.runs() as f64;
    println!("two-individual race: P[size=2] = {p2:.4} (analytic 1/3)");

    // a supercritical epidemic is bimodal: early extinction or near-full sweep
    let spec = SirSpec::new(2.5, recovery, 200.0)?;
    let dist = size_distribution(&spec, 5_000, 2)?;
    println!("\nfinal-size CDF, beta/gamma = 2.5, N = 200:");
    for k in [1, 5, 20, 100, 150, 180, 195, 200] {
        println!("  P[size <= {k:>3}] = {:.4}", dist.cdf(k));
    }
    println!(
        "smoothed likelihood of observing a cascade of exactly 190: {:.3e}",
        dist.likelihood(190)
    );
    Ok(())
}
