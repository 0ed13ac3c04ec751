//! The energy argument behind the area lower bound: for `a` uniform in a cell
//! and a small Gaussian step `u`, moving forward raises the pairwise energy
//! about as often as moving backward, and the segment often leaves the cell.
//!
//! ```bash
//! cargo run --release --example lower_bound
//! ```

use foamlab::energy::{energy, is_good, run_lb_experiment, EnergyParams};
use foamlab::scoring::TilingParams;
use foamlab::tiling::TilingBody;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 256;
    let params = EnergyParams::for_dim(n, 1.0)?;
    println!("Z = {:.3}, sigma = {:.3e}", params.z, params.sigma);

    let body = TilingBody::construction(TilingParams::new(n, 2)?);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = body.sample_in_cell(&mut rng)?;
    println!("one cell point: energy {:.4}, good {}", energy(&a, params.z)?, is_good(&a)?);

    let report = run_lb_experiment(&body, &params, 1_000, 3, 64)?;
    let show = |name: &str, e: &foamlab::needle::MCEstimate| println!("{name:<28} {:.4} ± {:.4}", e.value, e.stderr);
    show("escape", &report.escape_rate);
    show("forward > backward", &report.pr_energy_forward_gt_backward);
    show("good", &report.goodness_rate);
    show("joint event", &report.joint);
    show("joint without increase", &report.joint_without_e5);
    Ok(())
}
