//! The pair energy `Psi(a) = sum_{i<j} exp(-Z d(a_i, a_j))` and its linearisation
//! along a direction `u`, plus the needle experiment built on them.
//!
//! Any body that tiles space symmetrically must let a short Gaussian needle
//! escape with constant probability. The experiment measures the events that
//! argument is built from.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::needle::{segment_escapes, MCEstimate};
use crate::parallel::map_blocks;
use crate::tiling::TilingBody;
use crate::torus::{gap_distance, gap_sign, split};

/// Decay rate `Z` and needle scale `sigma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub z: f64,
    pub sigma: f64,
}

impl EnergyParams {
    /// `Z = n / (10 ln n)` and `sigma = c sqrt(ln n) / n`.
    pub fn for_dim(n: usize, c: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::params(format!("need n >= 3, got {n}")));
        }
        let nf = n as f64;
        let p = EnergyParams { z: nf / (10.0 * nf.ln()), sigma: c * nf.ln().sqrt() / nf };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z.is_finite() && self.z > 0.0) {
            return Err(Error::params(format!("Z must be positive, got {}", self.z)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::params(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }
}

fn check_len(a: &[f64]) -> Result<()> {
    if a.len() < 2 {
        return Err(Error::domain(format!("energy needs at least 2 points, got {}", a.len())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite coordinate"));
    }
    Ok(())
}

fn sorted(a: &[f64]) -> Vec<f64> {
    let mut v = a.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Reference `O(n^2)` energy. Sums in sorted order, so permuting `a` gives the
/// same bits.
pub fn energy(a: &[f64], z: f64) -> Result<f64> {
    check_len(a)?;
    let v = sorted(a);
    let mut s = 0.0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            s += (-z * gap_distance(v[i], v[j])).exp();
        }
    }
    Ok(s)
}

/// Energy keeping only pairs whose fractional parts are within circular distance
/// `ln(1e18) / Z`; every dropped term is below `1e-18`.
pub fn energy_windowed(a: &[f64], z: f64) -> Result<f64> {
    check_len(a)?;
    let width = 1e18f64.ln() / z;
    if width >= 0.5 {
        return energy(a, z);
    }
    let mut v: Vec<(f64, f64)> = a.iter().map(|&x| (split(x).1, x)).collect();
    v.sort_unstable_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        // forward neighbours, wrapping; each unordered pair is visited once
        for step in 1..n {
            let j = (i + step) % n;
            let mut gap = v[j].0 - v[i].0;
            if gap < 0.0 {
                gap += 1.0;
            }
            if gap >= width {
                break;
            }
            s += (-z * gap_distance(v[i].1, v[j].1)).exp();
        }
    }
    Ok(s)
}

/// Reference `O(n^2)` linearised energy
/// `sum_{i<j} exp(-Z (d(a_i, a_j) + gamma(a_i, a_j) (u_i - u_j)))`.
pub fn linearized_energy(a: &[f64], u: &[f64], z: f64) -> Result<f64> {
    check_len(a)?;
    if u.len() != a.len() {
        return Err(Error::domain("a and u differ in length"));
    }
    let mut idx: Vec<usize> = (0..a.len()).collect();
    idx.sort_unstable_by(|&i, &j| a[i].total_cmp(&a[j]).then(u[i].total_cmp(&u[j])));
    let mut s = 0.0;
    for (p, &i) in idx.iter().enumerate() {
        for &j in &idx[p + 1..] {
            let g = gap_sign(a[i], a[j]) as f64;
            s += (-z * (gap_distance(a[i], a[j]) + g * (u[i] - u[j]))).exp();
        }
    }
    Ok(s)
}

/// Most distinct integer parts handled by the fast path.
const MAX_GROUPS: usize = 64;
/// Largest `Z * (spread of f + u)` handled by the fast path before `exp` overflows.
const MAX_EXPONENT: f64 = 600.0;

/// Evaluates `u -> Psi(a, u)` for a fixed base point in `O(n (log n + K))`,
/// `K` being the number of distinct integer parts of `a`.
///
/// Write `a_k = n_k + f_k` and sort by `f`. For `f_j <= f_i` the pair is of one of
/// two kinds: `d = f_i - f_j` with sign `+1`, when `n_i != n_j` and either
/// `f_i - f_j <= 1/2` or `n_j = n_i + 1`; otherwise `d = 1 - (f_i - f_j)` with sign
/// `-1`. With `E = exp(Z (f + u))` the terms are `E_j / E_i` and
/// `exp(-Z) E_i / E_j`, so per-integer-part prefix sums of `E` and `1/E` over
/// the sorted order give every row of the double sum at once.
///
/// Pairs where both signs attain `d` (equal or half-integer-apart coordinates)
/// can come out with the other sign than [`gap_sign`]'s tie rule.
#[derive(Clone, Debug)]
pub struct LinearizedEnergy {
    z: f64,
    /// Original indices in sorted order.
    order: Vec<usize>,
    f: Vec<f64>,
    group: Vec<usize>,
    next_group: Vec<Option<usize>>,
    n_groups: usize,
    lo: Vec<usize>,
    /// Base point, kept for the reference fallback.
    a: Vec<f64>,
    fast: bool,
}

impl LinearizedEnergy {
    pub fn new(a: &[f64], z: f64) -> Result<Self> {
        check_len(a)?;
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::params(format!("Z must be positive, got {z}")));
        }
        let parts: Vec<(f64, f64)> = a.iter().map(|&x| split(x)).collect();
        let mut order: Vec<usize> = (0..a.len()).collect();
        order.sort_unstable_by(|&i, &j| {
            parts[i].1.total_cmp(&parts[j].1).then(a[i].total_cmp(&a[j]))
        });
        let f: Vec<f64> = order.iter().map(|&i| parts[i].1).collect();
        let ints: Vec<i64> = order.iter().map(|&i| parts[i].0 as i64).collect();
        let mut distinct = ints.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let group: Vec<usize> = ints.iter().map(|k| distinct.binary_search(k).unwrap()).collect();
        let next_group = ints.iter().map(|k| distinct.binary_search(&(k + 1)).ok()).collect();
        let lo = f.iter().map(|&fi| f.partition_point(|&fj| fj < fi - 0.5)).collect();
        let fast = distinct.len() <= MAX_GROUPS;
        Ok(LinearizedEnergy {
            z,
            order,
            f,
            group,
            next_group,
            n_groups: distinct.len(),
            lo,
            a: a.to_vec(),
            fast,
        })
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    /// `Psi(a)`, i.e. the linearisation at `u = 0`.
    pub fn base(&self) -> f64 {
        self.eval(&vec![0.0; self.len()])
    }

    /// `Psi(a, u)`. Panics if `u` has the wrong length.
    pub fn eval(&self, u: &[f64]) -> f64 {
        assert_eq!(u.len(), self.len(), "direction has the wrong length");
        let n = self.len();
        let g: Vec<f64> = (0..n).map(|k| self.f[k] + u[self.order[k]]).collect();
        let gmin = g.iter().copied().fold(f64::INFINITY, f64::min);
        let gmax = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !self.fast || self.z * (gmax - gmin) > MAX_EXPONENT {
            return linearized_energy(&self.a, u, self.z).expect("validated at construction");
        }
        let e: Vec<f64> = g.iter().map(|&v| (self.z * (v - gmin)).exp()).collect();
        let k = self.n_groups;
        // pe[grp][p] = sum of E over sorted positions < p in group grp
        // si[grp][p] = sum of 1/E over sorted positions >= p in group grp
        let mut pe = vec![vec![0.0; n + 1]; k];
        let mut si = vec![vec![0.0; n + 1]; k];
        for grp in 0..k {
            let row = &mut pe[grp];
            for p in 0..n {
                row[p + 1] = row[p] + if self.group[p] == grp { e[p] } else { 0.0 };
            }
            let row = &mut si[grp];
            for p in (0..n).rev() {
                row[p] = row[p + 1] + if self.group[p] == grp { 1.0 / e[p] } else { 0.0 };
            }
        }
        let decay = (-self.z).exp();
        let mut total = 0.0;
        for i in 0..n {
            let lo = self.lo[i];
            let gi = self.group[i];
            let gn = self.next_group[i];
            let mut x = 0.0;
            let mut y = 0.0;
            for grp in 0..k {
                if grp != gi {
                    x += pe[grp][i] - pe[grp][lo];
                } else {
                    y += si[grp][lo] - si[grp][i];
                }
                if Some(grp) == gn {
                    x += pe[grp][lo];
                } else {
                    y += si[grp][0] - si[grp][lo];
                }
            }
            total += x / e[i] + decay * e[i] * y;
        }
        total
    }
}

/// `Psi(a)` through the fast evaluator.
pub fn fast_energy(a: &[f64], z: f64) -> Result<f64> {
    Ok(LinearizedEnergy::new(a, z)?.base())
}

/// `C_i = sum_{j != i} exp(-Z d(a_i, a_j))`.
pub fn coordinate_load(a: &[f64], i: usize, z: f64) -> Result<f64> {
    check_len(a)?;
    if i >= a.len() {
        return Err(Error::domain(format!("index {i} out of range")));
    }
    Ok((0..a.len())
        .filter(|&j| j != i)
        .map(|j| (-z * gap_distance(a[i], a[j])).exp())
        .sum())
}

/// All loads `C_i`; they sum to `2 Psi(a)`.
pub fn coordinate_loads(a: &[f64], z: f64) -> Result<Vec<f64>> {
    check_len(a)?;
    let n = a.len();
    let mut c = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let t = (-z * gap_distance(a[i], a[j])).exp();
            c[i] += t;
            c[j] += t;
        }
    }
    Ok(c)
}

/// Whether every circular window of length `10 ln n / n` holds between `ln n`
/// and `100 ln n` of the fractional parts of `a` (windows are closed).
///
/// The window count only changes when an endpoint passes a point, so it is
/// enough to look at windows starting at `f_i`, at `f_i - L`, and halfway
/// between consecutive such starts.
pub fn is_good(a: &[f64]) -> Result<bool> {
    let n = a.len();
    if n < 3 {
        return Err(Error::domain(format!("goodness needs ln n >= 1, got n = {n}")));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite coordinate"));
    }
    let ln = (n as f64).ln();
    let len = 10.0 * ln / n as f64;
    let (lo, hi) = (ln, 100.0 * ln);
    let mut f: Vec<f64> = a.iter().map(|&x| split(x).1).collect();
    f.sort_unstable_by(f64::total_cmp);
    if len >= 1.0 {
        let c = n as f64;
        return Ok(c >= lo && c <= hi);
    }
    let count_in = |s: f64, e: f64| -> usize {
        // points in [s, e] with 0 <= s <= e < 1
        f.partition_point(|&v| v <= e) - f.partition_point(|&v| v < s)
    };
    let count = |s: f64| -> usize {
        let s = split(s).1;
        let e = s + len;
        if e < 1.0 {
            count_in(s, e)
        } else {
            count_in(s, 1.0 - f64::EPSILON / 2.0) + count_in(0.0, e - 1.0)
        }
    };
    let mut starts: Vec<f64> = f.iter().flat_map(|&v| [v, split(v - len).1]).collect();
    starts.sort_unstable_by(f64::total_cmp);
    starts.dedup();
    let k = starts.len();
    for idx in 0..k {
        let s = starts[idx];
        let next = if idx + 1 < k { starts[idx + 1] } else { starts[0] + 1.0 };
        for probe in [s, 0.5 * (s + next)] {
            let c = count(probe) as f64;
            if c < lo || c > hi {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn gaussian<R: Rng + ?Sized>(n: usize, sigma: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Monte Carlo mean of `Psi(a, u)` over `u ~ N(0, sigma^2 I)`. Its expectation is
/// exactly `Psi(a) exp((Z sigma)^2)`.
pub fn linearized_mean(a: &[f64], params: &EnergyParams, draws: usize, seed: u64) -> Result<MCEstimate> {
    params.validate()?;
    let ev = LinearizedEnergy::new(a, params.z)?;
    let sums = map_blocks(seed, draws, |rng, count| {
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..count {
            let v = ev.eval(&gaussian(a.len(), params.sigma, rng));
            s += v;
            s2 += v * v;
        }
        Ok((s, s2))
    })?;
    let (s, s2) = sums.iter().fold((0.0, 0.0), |p, q| (p.0 + q.0, p.1 + q.1));
    Ok(MCEstimate::from_moments(s, s2, draws as u64, seed))
}

/// Event frequencies of the needle experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbReport {
    pub n: usize,
    pub params: EnergyParams,
    pub k_subdiv: usize,
    /// The segment `a + [0, 1] u` leaves `D`.
    pub escape_rate: MCEstimate,
    /// `Psi(a + u) > Psi(a - u)`.
    pub pr_energy_forward_gt_backward: MCEstimate,
    pub goodness_rate: MCEstimate,
    /// The segment stays in `D`.
    pub e1: MCEstimate,
    /// `Psi(a) <= 1`.
    pub e2: MCEstimate,
    /// Some `|u_i| > 1/20`.
    pub e3: MCEstimate,
    /// `Psi(a, u) > (1 + (Z sigma)^4 / 2) Psi(a)`.
    pub e4: MCEstimate,
    /// `Psi(a + u) > Psi(a)`.
    pub e5: MCEstimate,
    /// `E1 and not E2 and not E3 and E4`.
    pub joint: MCEstimate,
    /// `joint` without `E5`; zero whenever the linearisation is accurate.
    pub joint_without_e5: MCEstimate,
}

/// Samples `a` uniform in `D` and `u ~ N(0, sigma^2 I)` and tallies the events.
/// Segment containment is checked at `k_subdiv` points.
pub fn run_lb_experiment(
    body: &TilingBody,
    params: &EnergyParams,
    n_samples: usize,
    seed: u64,
    k_subdiv: usize,
) -> Result<LbReport> {
    params.validate()?;
    if n_samples < 1000 {
        return Err(Error::params(format!("need at least 1000 samples, got {n_samples}")));
    }
    if k_subdiv == 0 {
        return Err(Error::params("k_subdiv must be positive"));
    }
    let n = body.dim();
    if n < 3 {
        return Err(Error::params("the experiment needs dimension at least 3"));
    }
    let z = params.z;
    let lift = 1.0 + (z * params.sigma).powi(4) / 2.0;
    const EVENTS: usize = 10;
    let counts = map_blocks(seed, n_samples, |rng, count| {
        let mut c = [0u64; EVENTS];
        for _ in 0..count {
            let a = body.sample_in_cell(rng)?;
            let u = gaussian(n, params.sigma, rng);
            let escaped = segment_escapes(body, &a, &u, k_subdiv)?;
            let ev = LinearizedEnergy::new(&a, z)?;
            let psi = ev.base();
            let psi_lin = ev.eval(&u);
            let fwd: Vec<f64> = a.iter().zip(&u).map(|(x, y)| x + y).collect();
            let bwd: Vec<f64> = a.iter().zip(&u).map(|(x, y)| x - y).collect();
            let psi_f = fast_energy(&fwd, z)?;
            let psi_b = fast_energy(&bwd, z)?;
            let e1 = !escaped;
            let e2 = psi <= 1.0;
            let e3 = u.iter().any(|v| v.abs() > 0.05);
            let e4 = psi_lin > lift * psi;
            let e5 = psi_f > psi;
            let joint = e1 && !e2 && !e3 && e4;
            let flags = [escaped, psi_f > psi_b, is_good(&a)?, e1, e2, e3, e4, e5, joint, joint && !e5];
            for (ci, fl) in c.iter_mut().zip(flags) {
                *ci += fl as u64;
            }
        }
        Ok(c)
    })?;
    let mut tot = [0u64; EVENTS];
    for c in counts {
        for (t, v) in tot.iter_mut().zip(c) {
            *t += v;
        }
    }
    let est = |i: usize| MCEstimate::from_count(tot[i], n_samples as u64, seed);
    Ok(LbReport {
        n,
        params: *params,
        k_subdiv,
        escape_rate: est(0),
        pr_energy_forward_gt_backward: est(1),
        goodness_rate: est(2),
        e1: est(3),
        e2: est(4),
        e3: est(5),
        e4: est(6),
        e5: est(7),
        joint: est(8),
        joint_without_e5: est(9),
    })
}
