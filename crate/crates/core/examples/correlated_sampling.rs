//! Two nearby configurations pick their cut point through a shared random
//! stream. The chance they disagree is at most the l1 distance between their
//! choice distributions.
//!
//! ```bash
//! cargo run --release --example correlated_sampling
//! ```

use foamlab::scoring::{choice_distribution, correlated_sample, TilingParams};
use foamlab::torus::canonical_config;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 256;
    let params = TilingParams::new(n, 3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let moved: Vec<f64> = raw.iter().map(|&v| v + rng.random_range(-0.5..0.5) / n as f64).collect();
    let p = choice_distribution(&params, &canonical_config(&raw)?)?;
    let q = choice_distribution(&params, &canonical_config(&moved)?)?;
    let l1: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();

    let trials = 20_000u64;
    let mut disagree = 0;
    let mut rounds = 0;
    for s in 0..trials {
        let (i, ri) = correlated_sample(&p, s, params.max_sampling_rounds)?;
        let (j, _) = correlated_sample(&q, s, params.max_sampling_rounds)?;
        disagree += (i != j) as u64;
        rounds += ri;
    }
    let rate = disagree as f64 / trials as f64;
    println!("l1 distance          {l1:.4}");
    println!("disagreement rate    {rate:.4}");
    println!("mean rounds used     {:.2}", rounds as f64 / trials as f64);
    Ok(())
}
