//! Step escape and decency of a body, the two quantities that drive the
//! amplification argument for the game.
//!
//! ```bash
//! cargo run --release --example decency
//! ```

use foamlab::game::{default_k, mean_decency_failure, step_escape};
use foamlab::scoring::TilingParams;
use foamlab::tiling::TilingBody;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 15;
    for t in [2usize, 4] {
        let k = default_k(n, t);
        let cube = TilingBody::unit_cube(t)?;
        let body = TilingBody::construction(TilingParams::game_scale(t, 4)?);
        for (name, b) in [("cube", &cube), ("symmetric", &body)] {
            let esc = step_escape(b, n, k, 4_000, 1)?;
            let fail = mean_decency_failure(b, n, k, 4_000, 2)?;
            println!(
                "t = {t} {name:<10} k = {k}: eta {:.4}, delta {:.4}, decency failure {:.4}",
                esc.eta.value, esc.delta.value, fail.value
            );
        }
    }
    Ok(())
}
