//! Noise sensitivity of the cube and of the symmetric body under Gaussian
//! steps of size `c / n`, normalised by `n sigma`.
//!
//! ```bash
//! cargo run --release --example noise_sensitivity
//! ```

use foamlab::needle::{estimate_noise_sensitivity, StepFamily};
use foamlab::scoring::TilingParams;
use foamlab::tiling::TilingBody;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let samples = 5_000;
    println!("{:>6} {:>14} {:>14}", "n", "cube", "symmetric");
    for n in [64usize, 256, 1024] {
        let sigma = 0.3 / n as f64;
        let family = StepFamily::Gaussian { sigma };
        let cube = estimate_noise_sensitivity(&TilingBody::unit_cube(n)?, &family, samples, 1)?;
        let body = TilingBody::construction(TilingParams::new(n, 1)?);
        let sym = estimate_noise_sensitivity(&body, &family, samples, 1)?;
        let scale = n as f64 * sigma;
        println!(
            "{n:>6} {:>7.3}±{:<6.3} {:>7.3}±{:<6.3}",
            cube.value / scale,
            cube.stderr / scale,
            sym.value / scale,
            sym.stderr / scale
        );
    }
    Ok(())
}
