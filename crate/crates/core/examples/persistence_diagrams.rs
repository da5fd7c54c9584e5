//! Delay-embed a noisy periodic series, compute its Rips persistence and
//! compare diagrams with the persistence scale-space kernel.
//!
//! ```bash
//! cargo run -p brainkernel --release --example persistence_diagrams
//! ```

use std::time::Instant;

use brainkernel::topology::{
    delay_embed, diagrams_to_csv, pssk, rips_persistence, InfiniteBars, MaxScale,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> brainkernel::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let periodic: Vec<f64> = (0..200)
        .map(|t| {
            (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin() + 0.1 * rng.random_range(-1.0..1.0)
        })
        .collect();
    let noise: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();

    let mut diagrams = Vec::new();
    for (name, series) in [("periodic", &periodic), ("noise", &noise)] {
        let cloud = delay_embed(series, 2, 3)?;
        let start = Instant::now();
        let [h0, h1] = rips_persistence(&cloud, MaxScale::Auto)?;
        let most_persistent = h1.pairs.iter().map(|p| p.persistence()).fold(0.0, f64::max);
        println!(
            "{name}: {} points, {} H0 bars, {} H1 bars, longest H1 bar {:.3} ({:.1?})",
            cloud.len(),
            h0.len(),
            h1.len(),
            most_persistent,
            start.elapsed()
        );
        diagrams.push(h1.to_finite(InfiniteBars::Drop, 0.0));
    }

    let sigma = 0.5;
    println!(
        "k(periodic, periodic) = {:.6}",
        pssk(&diagrams[0], &diagrams[0], sigma)?
    );
    println!(
        "k(noise, noise)       = {:.6}",
        pssk(&diagrams[1], &diagrams[1], sigma)?
    );
    println!(
        "k(periodic, noise)    = {:.6}",
        pssk(&diagrams[0], &diagrams[1], sigma)?
    );

    let csv = diagrams_to_csv(&diagrams[..1]);
    println!("\nfirst rows of the periodic H1 diagram:");
    for line in csv.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
