//! Surface area by needle counting, calibrated on the unit cube whose area is `2n`.
//!
//! ```bash
//! cargo run --release --example surface_area -- 256
//! ```

use foamlab::needle::{calibrate_area, estimate_surface_area};
use foamlab::scoring::TilingParams;
use foamlab::tiling::TilingBody;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(256);
    let delta = 1.0 / (n * n) as f64;
    let (samples, k) = (2_000, 16);

    let cal = calibrate_area(n, delta, samples, 5, k)?;
    println!("calibration constant {:.4} (rel. stderr {:.3})", cal.constant, cal.rel_stderr);

    let cube = estimate_surface_area(&TilingBody::unit_cube(n)?, 4.0 * delta, samples, 6, k, &cal)?;
    println!("cube       area {:>9.1} ± {:<7.1} exact {}", cube.area, cube.area_stderr, 2 * n);

    let body = TilingBody::construction(TilingParams::new(n, 5)?);
    let sym = estimate_surface_area(&body, delta, samples, 7, k, &cal)?;
    println!("symmetric  area {:>9.1} ± {:<7.1}", sym.area, sym.area_stderr);
    Ok(())
}
