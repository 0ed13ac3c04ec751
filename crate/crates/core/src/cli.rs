//! The `foamlab` command line.
//!
//! Every command resolves its options from flags, then an optional JSON config
//! file with the same (kebab-case) keys, then `FOAMLAB_SEED` for the seed, then
//! built-in defaults. The resolved options are echoed as the first line of the
//! output (`# {json}`), so a run can be repeated exactly.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::energy::{run_lb_experiment, EnergyParams};
use crate::error::Error;
use crate::game::{
    brute_force_value, default_k, equivalence_check, evaluate_strategy, mean_decency_failure,
    step_escape, strategy_table, symmetric_strategies, ConstantStrategy, EquivReport, GameInstance,
    ParityStrategy, SymStrategy, TilingStrategy,
};
use crate::needle::{
    calibrate_area, estimate_condition_failure, estimate_escape, estimate_noise_sensitivity,
    estimate_surface_area, StepFamily,
};
use crate::parallel::with_workers;
use crate::scoring::TilingParams;
use crate::tiling::{BodyDescriptor, TilingBody};

pub const SEED_ENV: &str = "FOAMLAB_SEED";
const DEFAULT_SEED: u64 = 0;

/// Failure of a command, with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(Error::InvalidParams(_) | Error::Domain(_)) => 2,
            CliError::Lib(Error::SamplingBudget { .. } | Error::Calibration(_)) => 3,
            CliError::Lib(Error::StateSpaceTooLarge(_)) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "foamlab", version, about = "Symmetric lattice tilings, needle estimators and odd cycle games")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print a body descriptor and its fingerprint as JSON.
    BuildBody(BuildArgs),
    /// Monte Carlo estimators, one CSV row per (scale, body).
    #[command(subcommand)]
    Estimate(EstimateCmd),
    /// Odd cycle game experiments.
    #[command(subcommand)]
    Game(GameCmd),
}

#[derive(Subcommand, Debug)]
enum EstimateCmd {
    /// Noise sensitivity Pr[R(y) != R(y + u)].
    Ns(EstimateArgs),
    /// Probability that the segment y -> y + u leaves the cell.
    Escape(EstimateArgs),
    /// Calibrated surface area from needle crossings.
    Area(EstimateArgs),
    /// Energy events of the lower-bound experiment.
    Lb(EstimateArgs),
}

#[derive(Subcommand, Debug)]
enum GameCmd {
    /// Exact value over all symmetric strategies (tiny instances).
    Brute(GameArgs),
    /// Monte Carlo success of a strategy.
    Eval(GameArgs),
    /// Exhaustive check that success matches cell membership mod 2.
    Equiv(GameArgs),
    /// One-step and k-step escape rates and the mean decency failure.
    Decency(GameArgs),
    /// JSON table of a strategy's answers.
    Table(GameArgs),
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct BuildArgs {
    /// JSON file with defaults for any of these options.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of intervals.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct EstimateArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// `cube`, `construction`, or a descriptor file; comma separated.
    #[arg(long, value_delimiter = ',')]
    body: Vec<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Seed of the construction (defaults to --seed).
    #[arg(long)]
    body_seed: Option<u64>,
    /// Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// `gaussian`, `bernoulli` or `disjoint-bernoulli`.
    #[arg(long)]
    family: Option<String>,
    /// Absolute Gaussian standard deviations.
    #[arg(long, value_delimiter = ',')]
    sigma: Vec<f64>,
    /// Gaussian: sigma = eps sqrt(ln n) / n. Bernoulli: the step probability.
    #[arg(long, value_delimiter = ',')]
    eps_list: Vec<f64>,
    /// Needle variances for `area` (default 1/n^2).
    #[arg(long, value_delimiter = ',')]
    delta: Vec<f64>,
    /// sigma multipliers c for `lb`: sigma = c sqrt(ln n) / n.
    #[arg(long, value_delimiter = ',')]
    c: Vec<f64>,
    #[arg(long)]
    k_subdiv: Option<usize>,
    /// Also estimate the failure rate of the same-cell conditions (`ns`, construction only).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    conditions: Option<bool>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct GameArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Cycle length (odd).
    #[arg(long)]
    n: Option<usize>,
    /// Repetition count.
    #[arg(long)]
    t: Option<usize>,
    /// `cube`, `construction` or a descriptor file of dimension t.
    #[arg(long)]
    body: Option<String>,
    /// `tiling`, `parity`, `constant`, or `all` (equiv only).
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    body_seed: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    per_box: Option<usize>,
    /// Random boxes used for the indecisive-rate estimate.
    #[arg(long)]
    boxes: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Overlays the set flags on the config file, if any.
fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> CliResult<T> {
    let Some(path) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(flags).unwrap()).unwrap());
    };
    let text = std::fs::read_to_string(path)?;
    let mut base: Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    let obj = base
        .as_object_mut()
        .ok_or_else(|| usage(format!("config {} is not a JSON object", path.display())))?;
    if let Value::Object(over) = serde_json::to_value(flags).unwrap() {
        for (k, v) in over {
            let unset = v.is_null() || v.as_array().is_some_and(|a| a.is_empty());
            if !unset {
                obj.insert(k, v);
            }
        }
    }
    serde_json::from_value(base).map_err(|e| usage(format!("config {}: {e}", path.display())))
}

fn resolve_seed(seed: Option<u64>) -> CliResult<u64> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| usage(format!("{SEED_ENV}={v:?} is not an integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(command: &str, resolved: &impl Serialize) -> String {
    let mut v = serde_json::to_value(resolved).unwrap();
    if let Value::Object(map) = &mut v {
        // Worker count and destination never change the results.
        map.retain(|k, x| {
            k != "workers" && k != "output" && !x.is_null() && !x.as_array().is_some_and(|a| a.is_empty())
        });
        map.insert("command".into(), json!(command));
    }
    format!("# {}\n", serde_json::to_string(&v).unwrap())
}

fn csv_row(cells: &[String]) -> String {
    let mut s = cells.join(",");
    s.push('\n');
    s
}

/// Reads a descriptor file: a bare descriptor, or `build-body` output whose
/// fingerprint is then checked.
fn load_descriptor(path: &Path) -> CliResult<TilingBody> {
    let text = std::fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let (desc, fp) = match v.get("descriptor") {
        Some(d) => (d.clone(), v.get("fingerprint").and_then(Value::as_str).map(str::to_owned)),
        None => (v, None),
    };
    let desc: BodyDescriptor =
        serde_json::from_value(desc).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let body = desc.to_body()?;
    if let Some(fp) = fp {
        if body.fingerprint()? != fp {
            return Err(usage(format!("{}: fingerprint does not match the descriptor", path.display())));
        }
    }
    Ok(body)
}

fn make_body(entry: &str, n: usize, m: Option<usize>, body_seed: u64) -> CliResult<TilingBody> {
    match entry {
        "cube" | "unit-cube" => Ok(TilingBody::unit_cube(n)?),
        "construction" => {
            let mut p = TilingParams::new(n, body_seed)?;
            if let Some(m) = m {
                p = p.with_m(m)?;
            }
            Ok(TilingBody::construction(p))
        }
        path => load_descriptor(Path::new(path)),
    }
}

fn emit(output: Option<&Path>, text: &str, out: &mut dyn Write) -> CliResult<()> {
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn build_body(args: &BuildArgs) -> CliResult<String> {
    let mut a = merge(args, args.config.as_deref())?;
    let n = a.n.ok_or_else(|| usage("--n is required"))?;
    a.seed = Some(resolve_seed(a.seed)?);
    let mut p = TilingParams::new(n, a.seed.unwrap())?;
    if let Some(m) = a.m {
        p = p.with_m(m)?;
    }
    let body = TilingBody::construction(p);
    let out = json!({
        "descriptor": body.descriptor(),
        "fingerprint": body.fingerprint()?,
    });
    Ok(format!("{}\n", serde_json::to_string_pretty(&out).unwrap()))
}

/// A step family with the scale columns it is reported under.
struct Scale {
    family: StepFamily,
    eps: Option<f64>,
    sigma: Option<f64>,
}

fn scales(a: &EstimateArgs, n: usize) -> CliResult<Vec<Scale>> {
    let kind = a.family.as_deref().unwrap_or("gaussian");
    let mut out = Vec::new();
    match kind {
        "gaussian" => {
            for &s in &a.sigma {
                out.push(Scale { family: StepFamily::Gaussian { sigma: s }, eps: None, sigma: Some(s) });
            }
            for &e in &a.eps_list {
                let s = e * (n as f64).ln().sqrt() / n as f64;
                out.push(Scale { family: StepFamily::Gaussian { sigma: s }, eps: Some(e), sigma: Some(s) });
            }
        }
        "bernoulli" | "disjoint-bernoulli" => {
            if !a.sigma.is_empty() {
                return Err(usage("--sigma applies to the gaussian family only"));
            }
            for &e in &a.eps_list {
                let family = if kind == "bernoulli" {
                    StepFamily::Bernoulli { eps: e, n }
                } else {
                    StepFamily::DisjointBernoulli { eps: e, n }
                };
                out.push(Scale { family, eps: Some(e), sigma: None });
            }
        }
        other => return Err(usage(format!("unknown step family {other:?}"))),
    }
    for s in &out {
        s.family.validate()?;
    }
    Ok(out)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

fn estimate(which: &str, args: &EstimateArgs) -> CliResult<String> {
    let mut a = merge(args, args.config.as_deref())?;
    a.seed = Some(resolve_seed(a.seed)?);
    a.body_seed = Some(a.body_seed.unwrap_or(a.seed.unwrap()));
    if a.body.is_empty() {
        a.body = vec!["construction".into()];
    }
    a.n.get_or_insert(1024);
    a.family.get_or_insert_with(|| "gaussian".into());
    let default_samples = if which == "lb" { 1000 } else { 10_000 };
    a.samples.get_or_insert(default_samples);
    let default_k = match which {
        "escape" => 8,
        "area" => 16,
        "lb" => 64,
        _ => 1,
    };
    a.k_subdiv.get_or_insert(default_k);
    match which {
        "ns" | "escape" if a.sigma.is_empty() && a.eps_list.is_empty() => a.eps_list = vec![1e-3],
        "area" if a.delta.is_empty() => {
            let n = a.n.unwrap() as f64;
            a.delta = vec![1.0 / (n * n)];
        }
        "lb" if a.c.is_empty() => a.c = vec![1.0],
        _ => {}
    }
    let (seed, samples, k) = (a.seed.unwrap(), a.samples.unwrap(), a.k_subdiv.unwrap());
    let bodies: Vec<(String, TilingBody)> = a
        .body
        .iter()
        .map(|b| Ok((b.clone(), make_body(b, a.n.unwrap(), a.m, a.body_seed.unwrap())?)))
        .collect::<CliResult<_>>()?;

    let mut text = header(&format!("estimate {which}"), &a);
    let run = || -> CliResult<String> {
        let mut t = String::new();
        match which {
            "ns" => {
                t += "body,n,family,eps,sigma,samples,value,stderr,condition_failure,condition_stderr\n";
                for (label, body) in &bodies {
                    for s in scales(&a, body.dim())? {
                        let e = estimate_noise_sensitivity(body, &s.family, samples, seed)?;
                        let cond = if a.conditions == Some(true) && body.params().is_some() {
                            Some(estimate_condition_failure(body, &s.family, samples, seed)?)
                        } else {
                            None
                        };
                        t += &csv_row(&[
                            label.clone(),
                            body.dim().to_string(),
                            s.family.label(),
                            opt(s.eps),
                            opt(s.sigma),
                            samples.to_string(),
                            fmt(e.value),
                            fmt(e.stderr),
                            opt(cond.map(|c| c.value)),
                            opt(cond.map(|c| c.stderr)),
                        ]);
                    }
                }
            }
            "escape" => {
                t += "body,n,family,eps,sigma,k_subdiv,samples,value,stderr\n";
                for (label, body) in &bodies {
                    for s in scales(&a, body.dim())? {
                        let e = estimate_escape(body, &s.family, samples, seed, k)?;
                        t += &csv_row(&[
                            label.clone(),
                            body.dim().to_string(),
                            s.family.label(),
                            opt(s.eps),
                            opt(s.sigma),
                            k.to_string(),
                            samples.to_string(),
                            fmt(e.value),
                            fmt(e.stderr),
                        ]);
                    }
                }
            }
            "area" => {
                t += "body,n,delta,k_subdiv,samples,mean_crossings,crossings_stderr,area,area_stderr,area_over_cube,calibration_constant\n";
                for &delta in &a.delta {
                    for (label, body) in &bodies {
                        let n = body.dim();
                        let cal = calibrate_area(n, delta, samples, seed.wrapping_add(1), k)?;
                        let e = estimate_surface_area(body, delta, samples, seed, k, &cal)?;
                        t += &csv_row(&[
                            label.clone(),
                            n.to_string(),
                            fmt(delta),
                            k.to_string(),
                            samples.to_string(),
                            fmt(e.raw.value),
                            fmt(e.raw.stderr),
                            fmt(e.area),
                            fmt(e.area_stderr),
                            fmt(e.area / (2.0 * n as f64)),
                            fmt(cal.constant),
                        ]);
                    }
                }
            }
            _ => {
                t += "body,n,c,z,sigma,k_subdiv,samples";
                let events = [
                    "escape_rate",
                    "pr_energy_forward_gt_backward",
                    "goodness_rate",
                    "e1",
                    "e2",
                    "e3",
                    "e4",
                    "e5",
                    "joint",
                    "joint_without_e5",
                ];
                for e in events {
                    t += &format!(",{e},{e}_stderr");
                }
                t.push('\n');
                for &c in &a.c {
                    for (label, body) in &bodies {
                        let params = EnergyParams::for_dim(body.dim(), c)?;
                        let r = run_lb_experiment(body, &params, samples, seed, k)?;
                        let mut row = vec![
                            label.clone(),
                            body.dim().to_string(),
                            fmt(c),
                            fmt(params.z),
                            fmt(params.sigma),
                            k.to_string(),
                            samples.to_string(),
                        ];
                        for e in [
                            r.escape_rate,
                            r.pr_energy_forward_gt_backward,
                            r.goodness_rate,
                            r.e1,
                            r.e2,
                            r.e3,
                            r.e4,
                            r.e5,
                            r.joint,
                            r.joint_without_e5,
                        ] {
                            row.push(fmt(e.value));
                            row.push(fmt(e.stderr));
                        }
                        t += &csv_row(&row);
                    }
                }
            }
        }
        Ok(t)
    };
    text += &with_workers(a.workers, run)??;
    Ok(text)
}

fn game_body(a: &GameArgs, t: usize) -> CliResult<TilingBody> {
    let entry = a.body.as_deref().unwrap_or("construction");
    let body = match entry {
        "cube" | "unit-cube" => TilingBody::unit_cube(t)?,
        "construction" => TilingBody::construction(TilingParams::game_scale(t, a.body_seed.unwrap())?),
        path => load_descriptor(Path::new(path))?,
    };
    if body.dim() != t {
        return Err(usage(format!("body dimension {} differs from t = {t}", body.dim())));
    }
    Ok(body)
}

fn strategy_for(a: &GameArgs, inst: GameInstance) -> CliResult<(String, Box<dyn SymStrategy>)> {
    match a.strategy.as_deref().unwrap_or("tiling") {
        "tiling" => {
            let body = game_body(a, inst.t)?;
            let id = format!("tiling-{}", a.body.as_deref().unwrap_or("construction"));
            let s = TilingStrategy::new(body, inst, a.per_box.unwrap(), a.seed.unwrap())?;
            Ok((id, Box::new(s)))
        }
        "parity" => Ok(("parity".into(), Box::new(ParityStrategy))),
        "constant" => Ok(("constant".into(), Box::new(ConstantStrategy(0)))),
        other => Err(usage(format!("unknown strategy {other:?}"))),
    }
}

fn game(which: &str, args: &GameArgs) -> CliResult<String> {
    let mut a = merge(args, args.config.as_deref())?;
    a.seed = Some(resolve_seed(a.seed)?);
    a.body_seed = Some(a.body_seed.unwrap_or(a.seed.unwrap()));
    let n = a.n.ok_or_else(|| usage("--n is required"))?;
    let t = *a.t.get_or_insert(1);
    let inst = GameInstance::new(n, t)?;
    a.per_box.get_or_insert(TilingStrategy::DEFAULT_PER_BOX);
    a.samples.get_or_insert(10_000);
    if matches!(which, "eval" | "decency") {
        a.body.get_or_insert_with(|| "construction".into());
    }
    match which {
        "eval" => {
            a.strategy.get_or_insert_with(|| "tiling".into());
            a.boxes.get_or_insert(2000);
        }
        "equiv" => {
            a.strategy.get_or_insert_with(|| "all".into());
        }
        "table" => {
            a.strategy.get_or_insert_with(|| "tiling".into());
        }
        "decency" => {
            a.k.get_or_insert(default_k(n, t));
        }
        _ => {}
    }
    let seed = a.seed.unwrap();
    let samples = a.samples.unwrap();
    let mut text = if which == "table" { String::new() } else { header(&format!("game {which}"), &a) };
    let run = || -> CliResult<String> {
        let mut out = String::new();
        match which {
            "brute" => {
                let v = brute_force_value(n, t)?;
                out += "n,t,value,value_approx\n";
                out += &csv_row(&[
                    n.to_string(),
                    t.to_string(),
                    format!("{}/{}", v.numer(), v.denom()),
                    fmt(*v.numer() as f64 / *v.denom() as f64),
                ]);
            }
            "eval" => {
                let (id, s) = strategy_for(&a, inst)?;
                let e = evaluate_strategy(&inst, s.as_ref(), samples, seed)?;
                let indecisive = if a.strategy.as_deref() == Some("tiling") {
                    let ts = TilingStrategy::new(game_body(&a, t)?, inst, a.per_box.unwrap(), seed)?;
                    Some(ts.indecisive_rate(a.boxes.unwrap(), seed.wrapping_add(1))?)
                } else {
                    None
                };
                out += "n,t,strategy,samples,success,stderr,abort_rate,abort_stderr,indecisive_rate,indecisive_stderr\n";
                out += &csv_row(&[
                    n.to_string(),
                    t.to_string(),
                    id,
                    samples.to_string(),
                    fmt(e.success.value),
                    fmt(e.success.stderr),
                    fmt(e.abort.value),
                    fmt(e.abort.stderr),
                    opt(indecisive.map(|i| i.value)),
                    opt(indecisive.map(|i| i.stderr)),
                ]);
            }
            "equiv" => {
                let mut total = EquivReport { pairs: 0, counterexamples_mod2: 0, exact_mismatches: 0 };
                let mut count = 0u64;
                let mut add = |r: EquivReport| {
                    total.pairs += r.pairs;
                    total.counterexamples_mod2 += r.counterexamples_mod2;
                    total.exact_mismatches += r.exact_mismatches;
                    count += 1;
                };
                if a.strategy.as_deref() == Some("all") {
                    for s in symmetric_strategies(&inst)? {
                        add(equivalence_check(&inst, &s)?);
                    }
                } else {
                    let (_, s) = strategy_for(&a, inst)?;
                    add(equivalence_check(&inst, s.as_ref())?);
                }
                out += "n,t,strategy,strategies,pairs,counterexamples_mod2,exact_mismatches\n";
                out += &csv_row(&[
                    n.to_string(),
                    t.to_string(),
                    a.strategy.clone().unwrap(),
                    count.to_string(),
                    total.pairs.to_string(),
                    total.counterexamples_mod2.to_string(),
                    total.exact_mismatches.to_string(),
                ]);
                out += &format!("# {} counterexamples\n", total.counterexamples_mod2);
            }
            "decency" => {
                let body = game_body(&a, t)?;
                let k = a.k.unwrap();
                let esc = step_escape(&body, n, k, samples, seed)?;
                let probe = mean_decency_failure(&body, n, k, samples, seed.wrapping_add(1))?;
                out += "n,t,k,samples,eta,eta_stderr,delta,delta_stderr,k_eta,mean_decency_failure,decency_stderr,union_bound\n";
                out += &csv_row(&[
                    n.to_string(),
                    t.to_string(),
                    k.to_string(),
                    samples.to_string(),
                    fmt(esc.eta.value),
                    fmt(esc.eta.stderr),
                    fmt(esc.delta.value),
                    fmt(esc.delta.stderr),
                    fmt(k as f64 * esc.eta.value),
                    fmt(probe.value),
                    fmt(probe.stderr),
                    fmt(2.0 * (esc.eta.value + esc.delta.value)),
                ]);
            }
            _ => {
                let (id, s) = strategy_for(&a, inst)?;
                let rows = strategy_table(&inst, s.as_ref())?;
                let mut cfg = serde_json::to_value(&a).unwrap();
                if let Value::Object(m) = &mut cfg {
                    m.retain(|k, x| k != "workers" && k != "output" && !x.is_null());
                }
                let v = json!({ "config": cfg, "strategy": id, "rows": rows });
                out += &serde_json::to_string_pretty(&v).unwrap();
                out.push('\n');
            }
        }
        Ok(out)
    };
    text += &with_workers(a.workers, run)??;
    Ok(text)
}

/// Parses `args` (including the program name) and runs the command, writing
/// to `out` unless `--output` names a file.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            out.write_all(e.to_string().as_bytes())?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    match &cli.command {
        Command::BuildBody(a) => emit(a.output.as_deref(), &build_body(a)?, out),
        Command::Estimate(cmd) => {
            let (which, a) = match cmd {
                EstimateCmd::Ns(a) => ("ns", a),
                EstimateCmd::Escape(a) => ("escape", a),
                EstimateCmd::Area(a) => ("area", a),
                EstimateCmd::Lb(a) => ("lb", a),
            };
            emit(a.output.as_deref(), &estimate(which, a)?, out)
        }
        Command::Game(cmd) => {
            let (which, a) = match cmd {
                GameCmd::Brute(a) => ("brute", a),
                GameCmd::Eval(a) => ("eval", a),
                GameCmd::Equiv(a) => ("equiv", a),
                GameCmd::Decency(a) => ("decency", a),
                GameCmd::Table(a) => ("table", a),
            };
            emit(a.output.as_deref(), &game(which, a)?, out)
        }
    }
}

/// Runs the command line of the current process and returns its exit code.
pub fn main_exit() -> i32 {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(std::env::args_os(), &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> CliResult<String> {
        let mut buf = Vec::new();
        run(std::iter::once("foamlab").chain(args.iter().copied()), &mut buf)?;
        Ok(String::from_utf8(buf).unwrap())
    }

    #[test]
    fn build_body_reports_default_m() {
        let out = call(&["build-body", "--n", "1024", "--seed", "7"]).unwrap();
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["descriptor"]["m"], 10);
        assert_eq!(v["descriptor"]["seed"], 7);
        assert_eq!(out, call(&["build-body", "--n", "1024", "--seed", "7"]).unwrap());
        let v: Value = serde_json::from_str(&call(&["build-body", "--n", "1024", "--m", "3"]).unwrap()).unwrap();
        assert_eq!(v["descriptor"]["m"], 3);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(call(&["build-body", "--n", "4"]).unwrap_err().exit_code(), 2);
        assert_eq!(call(&["nonsense"]).unwrap_err().exit_code(), 2);
        assert_eq!(call(&["game", "brute", "--n", "4"]).unwrap_err().exit_code(), 2);
        assert_eq!(call(&["game", "brute", "--n", "5", "--t", "3"]).unwrap_err().exit_code(), 4);
        assert_eq!(CliError::Lib(Error::SamplingBudget { budget: 1 }).exit_code(), 3);
    }

    #[test]
    fn brute_prints_fraction() {
        let out = call(&["game", "brute", "--n", "3", "--t", "1"]).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert!(lines[0].starts_with("# {"));
        assert_eq!(lines[1], "n,t,value,value_approx");
        assert!(lines[2].starts_with("3,1,5/6,8.3333333333333337e-1"));
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"n": 5, "t": 1, "seed": 3}"#).unwrap();
        let out = call(&["game", "brute", "--config", cfg.to_str().unwrap()]).unwrap();
        assert!(out.contains("\n5,1,9/10,"));
        let out = call(&["game", "brute", "--config", cfg.to_str().unwrap(), "--n", "3"]).unwrap();
        assert!(out.contains("\n3,1,5/6,"));
        std::fs::write(&cfg, r#"{"n": 5, "bogus": 1}"#).unwrap();
        assert_eq!(call(&["game", "brute", "--config", cfg.to_str().unwrap()]).unwrap_err().exit_code(), 2);
    }
}
