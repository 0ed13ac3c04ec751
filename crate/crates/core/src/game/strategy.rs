use std::collections::HashMap;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{judge, GameInstance, SymStrategy};
use crate::error::{Error, Result};
use crate::needle::{count_hits, sample_step, MCEstimate, StepFamily};
use crate::tiling::{LatticeVector, TilingBody};

/// The rounding of `(C_n + Z)^t` induced by a strategy: a point is an integer
/// vector `k` standing for `k / n`, and `R(k)_i = (A(c)_i + c_i) mod 2 + q_i`
/// where `k = q n + c` with `0 <= c < n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeRounding {
    pub inst: GameInstance,
    table: Vec<Vec<u8>>,
}

impl LatticeRounding {
    pub fn round(&self, k: &[i64]) -> Vec<i64> {
        let n = self.inst.n as i64;
        let c: Vec<usize> = k.iter().map(|&v| v.rem_euclid(n) as usize).collect();
        let a = &self.table[self.inst.index(&c)];
        k.iter()
            .zip(&c)
            .zip(a)
            .map(|((&v, &ci), &ai)| (ai as i64 + ci as i64) % 2 + v.div_euclid(n))
            .collect()
    }

    /// Whether `k / n` lies in the zero cell `R^{-1}(0)`.
    pub fn in_zero_cell(&self, k: &[i64]) -> bool {
        self.round(k).iter().all(|&r| r == 0)
    }
}

/// Tabulates a non-aborting strategy as a lattice rounding.
pub fn strategy_to_rounding<S: SymStrategy + ?Sized>(
    strategy: &S,
    inst: &GameInstance,
) -> Result<LatticeRounding> {
    let points = inst
        .num_points()
        .filter(|&p| p <= 1_000_000)
        .ok_or_else(|| Error::StateSpaceTooLarge(format!("{}^{} points", inst.n, inst.t)))?;
    let table = (0..points)
        .map(|p| {
            let x = inst.point(p);
            strategy
                .answer(&x)
                .ok_or_else(|| Error::params(format!("strategy aborts at {x:?}")))
        })
        .collect::<Result<_>>()?;
    Ok(LatticeRounding { inst: *inst, table })
}

/// Outcome of comparing game success with cell membership over all challenges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivReport {
    pub pairs: u64,
    /// Challenges where success disagrees with `R(x) = R(x + u) mod 2`.
    pub counterexamples_mod2: u64,
    /// Challenges where success disagrees with `R(x) = R(x + u)` exactly.
    pub exact_mismatches: u64,
}

/// Checks, for every `x` in `C_n^t` and every `u` in `{-1, 0, 1}^t`, that the
/// players succeed on `(x, x + u)` exactly when both points round alike.
///
/// Equality holds coordinatewise mod 2 only: a wrap from `n - 1` to `n` and a
/// non-wrapping step can move `R` by 2 while the answers stay consistent.
pub fn equivalence_check<S: SymStrategy + ?Sized>(inst: &GameInstance, strategy: &S) -> Result<EquivReport> {
    let rounding = strategy_to_rounding(strategy, inst)?;
    let t = inst.t;
    let mut report = EquivReport { pairs: 0, counterexamples_mod2: 0, exact_mismatches: 0 };
    for p in 0..inst.num_points().unwrap() {
        let x = inst.point(p);
        let kx: Vec<i64> = x.iter().map(|&v| v as i64).collect();
        let rx = rounding.round(&kx);
        let ax = &rounding.table[p];
        for code in 0..3usize.pow(t as u32) {
            let mut c = code;
            let ky: Vec<i64> = kx
                .iter()
                .map(|&v| {
                    let d = (c % 3) as i64 - 1;
                    c /= 3;
                    v + d
                })
                .collect();
            let y: Vec<usize> = ky.iter().map(|&v| v.rem_euclid(inst.n as i64) as usize).collect();
            let ry = rounding.round(&ky);
            let win = judge(&x, &y, Some(ax), Some(&rounding.table[inst.index(&y)]));
            let same_mod2 = rx.iter().zip(&ry).all(|(a, b)| (a - b).rem_euclid(2) == 0);
            report.pairs += 1;
            report.counterexamples_mod2 += (win != same_mod2) as u64;
            report.exact_mismatches += (win != (rx == ry)) as u64;
        }
    }
    Ok(report)
}

/// Majority cell of a box `B_a = prod [a_i/n, (a_i + 1)/n)` from `n` samples.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxSummary {
    /// `-R(p)` for the most frequent cell, ties to the smallest label.
    pub label: LatticeVector,
    pub count: u64,
    pub n: u64,
}

impl BoxSummary {
    pub fn frequency(&self) -> f64 {
        self.count as f64 / self.n as f64
    }

    pub fn stderr(&self) -> f64 {
        let f = self.frequency();
        (f * (1.0 - f) / self.n as f64).sqrt()
    }

    /// Unanimous, or the majority frequency clears `threshold` by three standard errors.
    pub fn decisive(&self, threshold: f64) -> bool {
        self.count == self.n || self.frequency() - 3.0 * self.stderr() > threshold
    }
}

fn box_seed(seed: u64, a: &[usize]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    a.iter().fold(mix(seed), |h, &v| mix(h ^ (v as u64).wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

fn box_summary(body: &TilingBody, a: &[usize], n: usize, samples: usize, seed: u64) -> Result<BoxSummary> {
    if a.len() != body.dim() {
        return Err(Error::domain(format!("box of dimension {} for a body of dimension {}", a.len(), body.dim())));
    }
    if let Some(&v) = a.iter().find(|&&v| v >= n) {
        return Err(Error::domain(format!("box index {v} outside 0..{n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(box_seed(seed, a));
    let mut counts: HashMap<Vec<i64>, u64> = HashMap::new();
    let mut p = vec![0.0; a.len()];
    for _ in 0..samples {
        for (pi, &ai) in p.iter_mut().zip(a) {
            *pi = (ai as f64 + rng.random::<f64>()) / n as f64;
        }
        let label: Vec<i64> = body.round_point(&p)?.entries.iter().map(|&e| -e).collect();
        *counts.entry(label).or_default() += 1;
    }
    let (label, count) = counts
        .into_iter()
        .max_by(|(la, ca), (lb, cb)| ca.cmp(cb).then_with(|| lb.cmp(la)))
        .unwrap();
    Ok(BoxSummary { label: LatticeVector { entries: label }, count, n: samples as u64 })
}

/// The cell label holding more than `threshold` of the box `B_a` (with a
/// three standard error margin), or `None` when no cell is decisive.
pub fn box_majority(
    body: &TilingBody,
    a: &[usize],
    n: usize,
    samples: usize,
    threshold: f64,
    seed: u64,
) -> Result<Option<LatticeVector>> {
    if samples < 100 {
        return Err(Error::params(format!("need at least 100 samples per box, got {samples}")));
    }
    let s = box_summary(body, a, n, samples, seed)?;
    Ok(s.decisive(threshold).then_some(s.label))
}

/// The players' strategy read off a tiling: on `x`, find the decisive cell `z`
/// of the box `B_x` and answer `(z + x) mod 2`.
///
/// Box decisions are keyed by the sorted box index and memoized, so permuted
/// challenges get exactly permuted answers.
pub struct TilingStrategy {
    pub body: TilingBody,
    pub inst: GameInstance,
    pub n_per_box: usize,
    pub seed: u64,
    cache: Mutex<HashMap<Vec<usize>, Option<BoxSummary>>>,
}

/// Majority threshold used when answering.
const ANSWER_THRESHOLD: f64 = 0.5;
/// Threshold defining a decisive box in the indecisive-rate estimate.
const DECISIVE_THRESHOLD: f64 = 2.0 / 3.0;

impl TilingStrategy {
    pub const DEFAULT_PER_BOX: usize = 400;

    pub fn new(body: TilingBody, inst: GameInstance, n_per_box: usize, seed: u64) -> Result<Self> {
        if body.dim() != inst.t {
            return Err(Error::params(format!(
                "body dimension {} differs from repetition count {}",
                body.dim(),
                inst.t
            )));
        }
        if n_per_box < 100 {
            return Err(Error::params(format!("need at least 100 samples per box, got {n_per_box}")));
        }
        Ok(TilingStrategy { body, inst, n_per_box, seed, cache: Mutex::new(HashMap::new()) })
    }

    /// Summary of the box with sorted index `key`; `None` if sampling failed.
    fn summary(&self, key: &[usize]) -> Option<BoxSummary> {
        if let Some(s) = self.cache.lock().unwrap().get(key) {
            return s.clone();
        }
        let s = box_summary(&self.body, key, self.inst.n, self.n_per_box, self.seed).ok();
        let mut cache = self.cache.lock().unwrap();
        let stored = cache.entry(key.to_vec()).or_insert_with(|| s.clone());
        assert_eq!(*stored, s, "box decision differs between writers");
        s
    }

    /// Fraction of uniformly random boxes with no cell above 2/3.
    pub fn indecisive_rate(&self, boxes: usize, seed: u64) -> Result<MCEstimate> {
        count_hits(seed, boxes, |rng| {
            let mut key: Vec<usize> = (0..self.inst.t).map(|_| rng.random_range(0..self.inst.n)).collect();
            key.sort_unstable();
            Ok(!self.summary(&key).is_some_and(|s| s.decisive(DECISIVE_THRESHOLD)))
        })
    }

    pub fn cached_boxes(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

impl SymStrategy for TilingStrategy {
    fn answer(&self, x: &[usize]) -> Option<Vec<u8>> {
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by_key(|&i| x[i]);
        let key: Vec<usize> = order.iter().map(|&i| x[i]).collect();
        let s = self.summary(&key)?;
        if !s.decisive(ANSWER_THRESHOLD) {
            return None;
        }
        let bits: Vec<u8> = key
            .iter()
            .zip(&s.label.entries)
            .map(|(&k, &z)| (z + k as i64).rem_euclid(2) as u8)
            .collect();
        // Tied coordinates must agree or equivariance would break.
        if key.windows(2).zip(bits.windows(2)).any(|(k, b)| k[0] == k[1] && b[0] != b[1]) {
            return None;
        }
        let mut out = vec![0u8; x.len()];
        for (j, &i) in order.iter().enumerate() {
            out[i] = bits[j];
        }
        Some(out)
    }
}

fn check_steps(u: &[i8]) -> Result<()> {
    if u.iter().any(|&d| !(-1..=1).contains(&d)) {
        return Err(Error::domain("step entries must lie in {-1, 0, 1}"));
    }
    Ok(())
}

fn outside(body: &TilingBody, x: &[f64], u: &[f64], scale: f64) -> Result<bool> {
    let p: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + scale * b).collect();
    Ok(!body.round_point(&p)?.is_zero())
}

/// Conditional probability, over a disjoint split `u = u1 + u2` of the step
/// `u / n`, that one of `x + u1`, `x + u2`, `x + k u1`, `x + k u2` leaves the
/// zero cell. Each nonzero coordinate goes to `u1` or `u2` with probability 1/2.
pub fn decency_probe(
    body: &TilingBody,
    x: &[f64],
    u: &[i8],
    n: usize,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<MCEstimate> {
    check_steps(u)?;
    if u.len() != x.len() {
        return Err(Error::domain("x and u differ in length"));
    }
    if !body.round_point(x)?.is_zero() {
        return Err(Error::domain("x must lie in the zero cell"));
    }
    let h = 1.0 / n as f64;
    count_hits(seed, samples, |rng| {
        let mut u1 = vec![0.0; u.len()];
        let mut u2 = vec![0.0; u.len()];
        for (i, &d) in u.iter().enumerate() {
            if d != 0 {
                let side = if rng.random::<bool>() { &mut u1 } else { &mut u2 };
                side[i] = d as f64 * h;
            }
        }
        Ok(outside(body, x, &u1, 1.0)?
            || outside(body, x, &u2, 1.0)?
            || outside(body, x, &u1, k as f64)?
            || outside(body, x, &u2, k as f64)?)
    })
}

/// Mean of [`decency_probe`] over `x` uniform in the zero cell and `u ~ B(1/4)`,
/// sampled jointly as a disjoint pair `(u1, u2)`.
pub fn mean_decency_failure(
    body: &TilingBody,
    n: usize,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<MCEstimate> {
    let family = StepFamily::DisjointBernoulli { eps: 0.25, n };
    count_hits(seed, samples, |rng| {
        let x = body.sample_in_cell(rng)?;
        let crate::needle::Step::Pair(u1, u2) = sample_step(&family, x.len(), rng) else {
            unreachable!("disjoint steps come in pairs")
        };
        Ok(outside(body, &x, &u1, 1.0)?
            || outside(body, &x, &u2, 1.0)?
            || outside(body, &x, &u1, k as f64)?
            || outside(body, &x, &u2, k as f64)?)
    })
}

/// One-step and `k`-step escape probabilities from a uniform point of the zero cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepEscape {
    /// `Pr[y + u` leaves the cell`]` for `u ~ B(1/4)` with steps `1/n`.
    pub eta: MCEstimate,
    /// `Pr[y + k u` leaves the cell`]`.
    pub delta: MCEstimate,
    pub k: usize,
}

pub fn step_escape(body: &TilingBody, n: usize, k: usize, samples: usize, seed: u64) -> Result<StepEscape> {
    if k == 0 {
        return Err(Error::params("k must be positive"));
    }
    let family = StepFamily::Bernoulli { eps: 0.25, n };
    let counts = crate::parallel::map_blocks(seed, samples, |rng, count| {
        let (mut one, mut many) = (0u64, 0u64);
        for _ in 0..count {
            let y = body.sample_in_cell(rng)?;
            let u = sample_step(&family, y.len(), rng).total();
            one += outside(body, &y, &u, 1.0)? as u64;
            many += outside(body, &y, &u, k as f64)? as u64;
        }
        Ok((one, many))
    })?;
    let total = samples as u64;
    Ok(StepEscape {
        eta: MCEstimate::from_count(counts.iter().map(|c| c.0).sum(), total, seed),
        delta: MCEstimate::from_count(counts.iter().map(|c| c.1).sum(), total, seed),
        k,
    })
}

fn is_prime(p: usize) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

/// Amplification length: the least prime at least `max(2, ceil(n sqrt(ln t) / t))`.
pub fn default_k(n: usize, t: usize) -> usize {
    let raw = (n as f64 * (t as f64).ln().max(0.0).sqrt() / t as f64).ceil() as usize;
    (raw.max(2)..).find(|&p| is_prime(p)).unwrap()
}
