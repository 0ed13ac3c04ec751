//! The symmetric repeated odd cycle game: exact values for tiny instances and
//! Monte Carlo success of the tiling strategy as the repetition grows.
//!
//! ```bash
//! cargo run --release --example odd_cycle_game
//! ```

use foamlab::game::{
    brute_force_value, equivalence_check, evaluate_strategy, GameInstance, ParityStrategy, TilingStrategy,
};
use foamlab::scoring::TilingParams;
use foamlab::tiling::TilingBody;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (n, t) in [(3, 1), (5, 1), (3, 2)] {
        println!("value of C_{n}^{t}: {}", brute_force_value(n, t)?);
    }

    let inst = GameInstance::new(3, 2)?;
    let rep = equivalence_check(&inst, &ParityStrategy)?;
    println!("parity on C_3^2: {} pairs, {} mod-2 counterexamples", rep.pairs, rep.counterexamples_mod2);

    let n = 15;
    for t in 1..=4 {
        let inst = GameInstance::new(n, t)?;
        let body = TilingBody::construction(TilingParams::game_scale(t, 9)?);
        let strategy = TilingStrategy::new(body, inst, 200, 9)?;
        let eval = evaluate_strategy(&inst, &strategy, 5_000, 10)?;
        println!(
            "t = {t}: success {:.3} ± {:.3}, abort {:.4}",
            eval.success.value, eval.success.stderr, eval.abort.value
        );
    }
    Ok(())
}
