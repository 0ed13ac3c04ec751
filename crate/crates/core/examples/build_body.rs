//! Builds the symmetric tiling body for a dimension, rounds a few random points
//! and prints the body descriptor with its fingerprint.
//!
//! ```bash
//! cargo run --release --example build_body -- 1024 7
//! ```

use foamlab::scoring::TilingParams;
use foamlab::tiling::TilingBody;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1024);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let params = TilingParams::new(n, seed)?;
    let body = TilingBody::construction(params);
    println!("{}", serde_json::to_string_pretty(&body.descriptor())?);
    println!("fingerprint {}", body.fingerprint()?);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..5 {
        let x: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0)).collect();
        let choice = body.center_of(&x)?;
        let r = body.round_point(&x)?;
        let moved = r.entries.iter().filter(|&&v| v != 0).count();
        println!("cut {:.6} ({:?}), {} nonzero lattice coordinates", choice.z.value(), choice.case, moved);
    }
    Ok(())
}
