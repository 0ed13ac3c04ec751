//! Acceptance suite: one test per exit criterion, each printing a single
//! `criterion N ... PASS|FAIL` line before asserting.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture --test-threads 1`
//! to see the report in order.

use foamlab::energy::{energy, linearized_mean, run_lb_experiment, EnergyParams};
use foamlab::game::{
    brute_force_value, default_k, equivalence_check, evaluate_strategy, step_escape,
    symmetric_strategies, GameInstance, TilingStrategy,
};
use foamlab::needle::{
    calibrate_area, estimate_condition_failure, estimate_noise_sensitivity, estimate_surface_area,
    MCEstimate, StepFamily,
};
use foamlab::scoring::{correlated_sample, TilingParams};
use foamlab::tiling::TilingBody;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Standard errors of separation used by every statistical comparison.
const K_SIGMA: f64 = 3.0;

const AXIOM_POINTS: usize = 100_000;
const AXIOM_DIM: usize = 1024;
const U1_PAIRS: usize = 10_000;
const U1_DIM: usize = 256;
const SAMPLING_SEEDS: u64 = 10_000;
const SAMPLING_ROUNDS: u64 = 1_000_000;
const ENERGY_DIM: usize = 1024;
const ENERGY_POINTS: usize = 10;
const ENERGY_DRAWS: usize = 100_000;
const LB_SAMPLES: usize = 2000;
const LB_SUBDIV: usize = 64;
const CUBE_ESCAPE_FLOOR: f64 = 0.1;
const CONDITION_DIM: usize = 1024;
/// Samples per epsilon, sized for about 5% relative error on the failure rate.
const CONDITION_RUNS: [(f64, usize); 2] = [(1e-3, 200_000), (1e-4, 1_000_000)];
const SLOPE_TOLERANCE: f64 = 0.2;
/// Gaussian scale `sigma = NS_SCALE / n`, normalized sensitivity `NS / (n sigma)`.
const NS_SCALE: f64 = 0.3;
const NS_DIMS: [usize; 2] = [64, 4096];
const NS_SAMPLES: usize = 20_000;
const AREA_DIM: usize = 1024;
const AREA_SAMPLES: usize = 4000;
const AREA_SUBDIV: usize = 16;
const CUBE_SELF_TOLERANCE: f64 = 0.10;
const GAME_CYCLE: usize = 15;
const GAME_SAMPLES: usize = 20_000;
const GAME_BOXES: usize = 4000;
const GAME_FLOOR: f64 = 0.5;

fn report(criterion: &str, pass: bool, detail: String) {
    println!("criterion {criterion} {}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn construction(n: usize, seed: u64) -> TilingBody {
    TilingBody::construction(TilingParams::new(n, seed).unwrap())
}

/// Multiples of `2^-20` shifted by a fixed offset on the `2^-40` grid, so
/// integer shifts and fractional parts are exact.
fn dyadic_point(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let offset = (0.318_309_886_183_790_7_f64 * (1u64 << 40) as f64).round() / (1u64 << 40) as f64;
    (0..n)
        .map(|_| rng.random_range(-(8i64 << 20)..(8i64 << 20)) as f64 / (1u64 << 20) as f64 + offset)
        .collect()
}

fn separated(a: &MCEstimate, b: &MCEstimate) -> f64 {
    (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
}

#[test]
fn criterion_01_tiling_axioms() {
    let body = construction(AXIOM_DIM, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut translation, mut permutation, mut idempotence) = (0usize, 0usize, 0usize);
    for _ in 0..AXIOM_POINTS {
        let x = dyadic_point(AXIOM_DIM, &mut rng);
        let r = body.round_point(&x).unwrap();

        let shift: Vec<i64> = (0..AXIOM_DIM).map(|_| rng.random_range(-50..=50)).collect();
        let xs: Vec<f64> = x.iter().zip(&shift).map(|(v, &k)| v + k as f64).collect();
        let expect: Vec<i64> = r.entries.iter().zip(&shift).map(|(a, b)| a + b).collect();
        translation += (body.round_point(&xs).unwrap().entries != expect) as usize;

        let mut perm: Vec<usize> = (0..AXIOM_DIM).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let xp: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
        let rp: Vec<i64> = perm.iter().map(|&i| r.entries[i]).collect();
        permutation += (body.round_point(&xp).unwrap().entries != rp) as usize;

        let y: Vec<f64> = x.iter().zip(&r.entries).map(|(v, &k)| v - k as f64).collect();
        idempotence += (body.mod_cell(&y).unwrap() != y) as usize;
    }
    report(
        "1 (tiling axioms)",
        translation == 0 && permutation == 0 && idempotence == 0,
        format!(
            "{AXIOM_POINTS} points at n={AXIOM_DIM}: translation {translation}, permutation {permutation}, mod_cell {idempotence} violations"
        ),
    );
}

#[test]
fn criterion_02_same_cell_conditions_are_sound() {
    let body = construction(U1_DIM, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let base = (U1_DIM as f64).ln().sqrt() / U1_DIM as f64;
    let (mut both, mut violations) = (0usize, 0usize);
    for i in 0..U1_PAIRS {
        let x: Vec<f64> = (0..U1_DIM).map(|_| rng.random_range(-2.0..2.0)).collect();
        // Scales from 1e-4 to 1 times sqrt(ln n) / n.
        let scale = base * 10f64.powf(-4.0 * (i % 5) as f64 / 4.0);
        let d: Vec<f64> = (0..U1_DIM).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let rep = body.check_u1(&x, &d).unwrap();
        if rep.cond1_holds && rep.cond2_holds {
            both += 1;
            violations += !rep.same_cell as usize;
        }
    }
    report(
        "2 (same-cell conditions)",
        violations == 0 && both > 0,
        format!("{U1_PAIRS} pairs at n={U1_DIM}, {both} with both conditions, {violations} violations"),
    );
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

/// Twenty distribution pairs: seven equal, seven at l1 distance 0.1, six at 0.5.
fn sampling_pairs() -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    let mut out = Vec::new();
    let bases = [
        vec![0.25; 4],
        normalized(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]),
        vec![0.5, 0.5],
        normalized(&[5.0, 1.0, 1.0, 1.0, 1.0, 1.0]),
        vec![0.1, 0.0, 0.4, 0.0, 0.5],
        vec![0.1; 10],
        vec![0.7, 0.2, 0.1],
    ];
    for b in &bases {
        out.push((b.clone(), b.clone(), 0.0));
    }
    for (k, b) in bases.iter().enumerate() {
        // Move mass 0.05 from the largest entry to another one.
        let from = (0..b.len()).max_by(|&i, &j| b[i].total_cmp(&b[j])).unwrap();
        let mut to = (from + 1 + k) % b.len();
        if to == from {
            to = (to + 1) % b.len();
        }
        let mut q = b.clone();
        q[from] -= 0.05;
        q[to] += 0.05;
        out.push((b.clone(), q, 0.1));
    }
    let far = [
        (vec![0.5, 0.5], vec![0.75, 0.25]),
        (vec![0.25; 4], vec![0.5, 0.25, 0.25, 0.0]),
        (vec![1.0, 0.0, 0.0], vec![0.75, 0.25, 0.0]),
        (normalized(&[1.0, 1.0, 1.0, 1.0, 2.0, 2.0]), vec![0.125, 0.125, 0.125, 0.125, 0.0, 0.5]),
        (vec![0.1; 10], vec![0.35, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.05, 0.0, 0.0]),
        (vec![0.2, 0.3, 0.5], vec![0.45, 0.3, 0.25]),
    ];
    for (p, q) in far {
        out.push((p, q, 0.5));
    }
    out
}

#[test]
fn criterion_03_correlated_sampling_disagreement() {
    let mut pass = true;
    let mut worst = String::new();
    let mut worst_margin = f64::INFINITY;
    for (idx, (p, q, dist)) in sampling_pairs().into_iter().enumerate() {
        let l1: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
        assert!((l1 - dist).abs() < 1e-9, "pair {idx} has l1 distance {l1}");
        let mut disagree = 0u64;
        for seed in 0..SAMPLING_SEEDS {
            let a = correlated_sample(&p, seed, SAMPLING_ROUNDS).unwrap().0;
            let b = correlated_sample(&q, seed, SAMPLING_ROUNDS).unwrap().0;
            disagree += (a != b) as u64;
        }
        let e = MCEstimate::from_count(disagree, SAMPLING_SEEDS, 0);
        let ok = if dist == 0.0 { disagree == 0 } else { e.value <= dist + K_SIGMA * e.stderr };
        let margin = dist + K_SIGMA * e.stderr - e.value;
        if dist > 0.0 && margin < worst_margin {
            worst_margin = margin;
            worst = format!("pair {idx}: disagreement {:.4} vs l1 {dist}", e.value);
        }
        pass &= ok;
    }
    report("3 (correlated sampling)", pass, format!("20 pairs x {SAMPLING_SEEDS} seeds, tightest {worst}"));
}

#[test]
fn criterion_04_energy_expectation_identity() {
    let n = ENERGY_DIM;
    let params = EnergyParams::for_dim(n, 1.0).unwrap();
    let lift = ((params.z * params.sigma).powi(2)).exp();
    let body = construction(n, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for i in 0..ENERGY_POINTS {
        let a = body.sample_in_cell(&mut rng).unwrap();
        let target = energy(&a, params.z).unwrap() * lift;
        let m = linearized_mean(&a, &params, ENERGY_DRAWS, 4000 + i as u64).unwrap();
        worst = worst.max((m.value - target).abs() / m.stderr);
    }
    report(
        "4 (energy expectation)",
        worst <= K_SIGMA,
        format!("{ENERGY_POINTS} points at n={n}, {ENERGY_DRAWS} draws each, worst deviation {worst:.2} stderr"),
    );
}

#[test]
fn criterion_05_lower_bound_sanity() {
    let mut pass = true;
    let mut lines = Vec::new();
    for n in [256, 1024] {
        let params = EnergyParams::for_dim(n, 1.0).unwrap();
        for (label, body) in [("cube", TilingBody::unit_cube(n).unwrap()), ("construction", construction(n, 5))] {
            let r = run_lb_experiment(&body, &params, LB_SAMPLES, 500 + n as u64, LB_SUBDIV).unwrap();
            let fwd = r.pr_energy_forward_gt_backward;
            pass &= fwd.value <= 0.5 + K_SIGMA * fwd.stderr;
            if label == "cube" {
                pass &= r.escape_rate.value >= CUBE_ESCAPE_FLOOR;
            }
            lines.push(format!(
                "{label}@{n} forward>backward {:.3} escape {:.3}",
                fwd.value, r.escape_rate.value
            ));
        }
    }
    report("5 (lower-bound sanity)", pass, lines.join("; "));
}

#[test]
fn criterion_06a_condition_failure_is_linear() {
    let n = CONDITION_DIM;
    let body = construction(n, 6);
    let mut slopes = Vec::new();
    let mut errors = 0;
    for (eps, samples) in CONDITION_RUNS {
        let sigma = eps * (n as f64).ln().sqrt() / n as f64;
        match estimate_condition_failure(&body, &StepFamily::Gaussian { sigma }, samples, 600) {
            Ok(e) => slopes.push((eps, e.value / eps, e.stderr / eps)),
            Err(_) => errors += 1,
        }
    }
    let pass = errors == 0 && {
        let (a, b) = (slopes[0].1, slopes[1].1);
        (a / b - 1.0).abs() <= SLOPE_TOLERANCE
    };
    let detail = slopes
        .iter()
        .map(|(e, c, s)| format!("eps {e:e}: C = {c:.3} +- {s:.3}"))
        .collect::<Vec<_>>()
        .join("; ");
    report("6a (condition failure linear in eps)", pass, format!("n={n}, {errors} budget errors, {detail}"));
}

fn normalized_sensitivity(body: &TilingBody, seed: u64) -> MCEstimate {
    let n = body.dim() as f64;
    let sigma = NS_SCALE / n;
    let e = estimate_noise_sensitivity(body, &StepFamily::Gaussian { sigma }, NS_SAMPLES, seed).unwrap();
    MCEstimate { value: e.value / NS_SCALE, stderr: e.stderr / NS_SCALE, ..e }
}

#[test]
fn criterion_06b_normalized_sensitivity_trend() {
    let [lo, hi] = NS_DIMS;
    let c_lo = normalized_sensitivity(&construction(lo, 7), 700);
    let c_hi = normalized_sensitivity(&construction(hi, 7), 701);
    let q_lo = normalized_sensitivity(&TilingBody::unit_cube(lo).unwrap(), 702);
    let q_hi = normalized_sensitivity(&TilingBody::unit_cube(hi).unwrap(), 703);
    let decreases = c_hi.value + K_SIGMA * separated(&c_lo, &c_hi) < c_lo.value;
    let cube_flat = (q_hi.value - q_lo.value).abs() <= K_SIGMA * separated(&q_lo, &q_hi);
    report(
        "6b (normalized sensitivity trend)",
        decreases && cube_flat,
        format!(
            "NS/(n sigma) construction {:.3}+-{:.3} @{lo} -> {:.3}+-{:.3} @{hi}; cube {:.3} -> {:.3}",
            c_lo.value, c_lo.stderr, c_hi.value, c_hi.stderr, q_lo.value, q_hi.value
        ),
    );
}

#[test]
fn criterion_07a_cube_area_self_consistency() {
    let n = AREA_DIM;
    let d1 = 1.0 / (n * n) as f64;
    let d2 = 4.0 * d1;
    let cal = calibrate_area(n, d1, AREA_SAMPLES, 710, AREA_SUBDIV).unwrap();
    let a = estimate_surface_area(&TilingBody::unit_cube(n).unwrap(), d2, AREA_SAMPLES, 711, AREA_SUBDIV, &cal)
        .unwrap();
    let ratio = a.area / (2.0 * n as f64);
    report(
        "7a (cube area self-consistency)",
        (ratio - 1.0).abs() <= CUBE_SELF_TOLERANCE,
        format!("n={n}, calibrated at delta={d1:e}, measured at {d2:e}: area/2n = {ratio:.4}"),
    );
}

#[test]
fn criterion_07b_construction_area_below_cube() {
    let n = AREA_DIM;
    let delta = 1.0 / (n * n) as f64;
    let cal = calibrate_area(n, delta, AREA_SAMPLES, 720, AREA_SUBDIV).unwrap();
    let a = estimate_surface_area(&construction(n, 7), delta, AREA_SAMPLES, 721, AREA_SUBDIV, &cal).unwrap();
    let cube = 2.0 * n as f64;
    report(
        "7b (construction area below 2n)",
        a.area + K_SIGMA * a.area_stderr < cube,
        format!("n={n}: area {:.1} +- {:.1} vs cube {cube}", a.area, a.area_stderr),
    );
}

#[test]
fn criterion_08_game_exactness() {
    let v31 = brute_force_value(3, 1).unwrap();
    let v51 = brute_force_value(5, 1).unwrap();
    let mut counterexamples = 0;
    let mut checked = 0;
    for (n, t) in [(3, 1), (5, 1), (3, 2)] {
        let inst = GameInstance::new(n, t).unwrap();
        for s in symmetric_strategies(&inst).unwrap() {
            counterexamples += equivalence_check(&inst, &s).unwrap().counterexamples_mod2;
            checked += 1;
        }
    }
    report(
        "8 (game exactness)",
        v31 == Ratio::new(5, 6) && v51 == Ratio::new(9, 10) && counterexamples == 0,
        format!("value(3,1) = {v31}, value(5,1) = {v51}, {checked} strategies, {counterexamples} counterexamples"),
    );
}

#[test]
fn criterion_09_tiling_strategy() {
    let n = GAME_CYCLE;
    let mut pass = true;
    let mut prev: Option<MCEstimate> = None;
    let mut lines = Vec::new();
    for t in 1..=4 {
        let inst = GameInstance::new(n, t).unwrap();
        let body = TilingBody::construction(TilingParams::game_scale(t, 9).unwrap());
        let strat = TilingStrategy::new(body.clone(), inst, TilingStrategy::DEFAULT_PER_BOX, 900).unwrap();
        let e = evaluate_strategy(&inst, &strat, GAME_SAMPLES, 910 + t as u64).unwrap();
        let ind = strat.indecisive_rate(GAME_BOXES, 920 + t as u64).unwrap();
        let k = default_k(n, t);
        let esc = step_escape(&body, n, k, GAME_SAMPLES, 930 + t as u64).unwrap();

        pass &= e.success.value >= GAME_FLOOR;
        if let Some(p) = prev {
            pass &= e.success.value <= p.value + K_SIGMA * separated(&p, &e.success);
        }
        pass &= e.abort.value <= ind.value + K_SIGMA * separated(&e.abort, &ind);
        let kf = k as f64;
        let sd = (esc.delta.stderr.powi(2) + (kf * esc.eta.stderr).powi(2)).sqrt();
        pass &= esc.delta.value <= kf * esc.eta.value + K_SIGMA * sd;
        lines.push(format!(
            "t={t} success {:.3} abort {:.3} indecisive {:.3} delta {:.3} k*eta {:.3}",
            e.success.value,
            e.abort.value,
            ind.value,
            esc.delta.value,
            kf * esc.eta.value
        ));
        prev = Some(e.success);
    }
    report("9 (tiling strategy)", pass, lines.join("; "));
}

fn cli(args: &[&str]) -> Vec<u8> {
    let mut out = Vec::new();
    foamlab::cli::run(std::iter::once("foamlab").chain(args.iter().copied()), &mut out).unwrap();
    out
}

#[test]
fn criterion_10_determinism_across_workers() {
    let runs: [&[&str]; 6] = [
        &["estimate", "ns", "--body", "cube,construction", "--n", "64", "--eps-list", "1e-1,1e-2", "--samples", "3000", "--conditions"],
        &["estimate", "escape", "--body", "construction", "--n", "64", "--samples", "3000"],
        &["estimate", "area", "--body", "cube,construction", "--n", "64", "--samples", "3000"],
        &["estimate", "lb", "--body", "construction", "--n", "128", "--samples", "1000"],
        &["game", "eval", "--n", "15", "--t", "3", "--samples", "5000"],
        &["game", "decency", "--n", "15", "--t", "2", "--samples", "5000"],
    ];
    let mut mismatches = Vec::new();
    for args in runs {
        let base = cli(&[args, &["--seed", "10"]].concat());
        for w in ["1", "2", "3"] {
            if cli(&[args, &["--seed", "10", "--workers", w]].concat()) != base {
                mismatches.push(format!("{} {} with {w} workers", args[0], args[1]));
            }
        }
    }
    report(
        "10 (determinism)",
        mismatches.is_empty(),
        format!("6 commands x 3 worker counts, mismatches: {mismatches:?}"),
    );
}
