//! Needle Monte Carlo: random segments `y -> y + u` from a uniform point of the
//! zero cell, used to estimate noise sensitivity, escape probability and
//! (through crossing counts) surface area.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::map_blocks;
use crate::tiling::{round_with_center, TilingBody};
use crate::torus::segment_contains_level;

/// Distribution of the perturbation `u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepFamily {
    /// i.i.d. `N(0, sigma^2)` coordinates.
    Gaussian { sigma: f64 },
    /// Each coordinate is `+1/n` or `-1/n` with probability `eps` each, else 0.
    Bernoulli { eps: f64, n: usize },
    /// A pair `(u1, u2)` with disjoint supports whose sum is `Bernoulli { eps, n }`.
    DisjointBernoulli { eps: f64, n: usize },
}

/// One draw of a step family.
#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Single(Vec<f64>),
    Pair(Vec<f64>, Vec<f64>),
}

impl Step {
    /// The total displacement (`u1 + u2` for a pair).
    pub fn total(self) -> Vec<f64> {
        match self {
            Step::Single(u) => u,
            Step::Pair(a, b) => a.iter().zip(&b).map(|(x, y)| x + y).collect(),
        }
    }
}

impl StepFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepFamily::Gaussian { sigma } if !(sigma.is_finite() && sigma > 0.0) => {
                Err(Error::params(format!("sigma must be positive, got {sigma}")))
            }
            StepFamily::Bernoulli { eps, n } | StepFamily::DisjointBernoulli { eps, n }
                if !(eps > 0.0 && eps <= 0.5) || n == 0 =>
            {
                Err(Error::params(format!("need eps in (0, 1/2] and n > 0, got eps={eps}, n={n}")))
            }
            _ => Ok(()),
        }
    }

    /// Short label used in reports, e.g. `gaussian(0.001)`.
    pub fn label(&self) -> String {
        match self {
            StepFamily::Gaussian { sigma } => format!("gaussian({sigma})"),
            StepFamily::Bernoulli { eps, n } => format!("bernoulli({eps},{n})"),
            StepFamily::DisjointBernoulli { eps, n } => format!("disjoint-bernoulli({eps},{n})"),
        }
    }
}

/// Draws a step of dimension `dim`.
pub fn sample_step<R: Rng + ?Sized>(family: &StepFamily, dim: usize, rng: &mut R) -> Step {
    match *family {
        StepFamily::Gaussian { sigma } => Step::Single(
            (0..dim).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect(),
        ),
        StepFamily::Bernoulli { eps, n } => {
            let h = 1.0 / n as f64;
            Step::Single(
                (0..dim)
                    .map(|_| {
                        let v: f64 = rng.random();
                        if v < eps {
                            h
                        } else if v < 2.0 * eps {
                            -h
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            )
        }
        StepFamily::DisjointBernoulli { eps, n } => {
            let h = 1.0 / n as f64;
            let mut a = vec![0.0; dim];
            let mut b = vec![0.0; dim];
            for i in 0..dim {
                let v: f64 = rng.random();
                if v < 0.5 * eps {
                    a[i] = h;
                } else if v < eps {
                    a[i] = -h;
                } else if v < 1.5 * eps {
                    b[i] = h;
                } else if v < 2.0 * eps {
                    b[i] = -h;
                }
            }
            Step::Pair(a, b)
        }
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl MCEstimate {
    /// Frequency estimate with `stderr = sqrt(p (1 - p) / N)`.
    pub fn from_count(hits: u64, n: u64, seed: u64) -> Self {
        let p = hits as f64 / n as f64;
        MCEstimate { value: p, stderr: (p * (1.0 - p) / n as f64).sqrt(), n_samples: n, seed }
    }

    /// Mean estimate from a running sum and sum of squares.
    pub fn from_moments(sum: f64, sum_sq: f64, n: u64, seed: u64) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        MCEstimate { value: mean, stderr: (var / nf).sqrt(), n_samples: n, seed }
    }

    /// `value - k * stderr`.
    pub fn lower(&self, k: f64) -> f64 {
        self.value - k * self.stderr
    }

    /// `value + k * stderr`.
    pub fn upper(&self, k: f64) -> f64 {
        self.value + k * self.stderr
    }
}

const MIN_SAMPLES: usize = 1000;

fn check_samples(n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::params(format!("need at least {MIN_SAMPLES} samples, got {n}")));
    }
    Ok(())
}

fn add(y: &[f64], u: &[f64], t: f64) -> Vec<f64> {
    y.iter().zip(u).map(|(a, b)| a + t * b).collect()
}

pub(crate) fn count_hits<F>(seed: u64, n_samples: usize, hit: F) -> Result<MCEstimate>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<bool> + Sync,
{
    let counts = map_blocks(seed, n_samples, |rng, count| {
        let mut c = 0u64;
        for _ in 0..count {
            c += hit(rng)? as u64;
        }
        Ok(c)
    })?;
    Ok(MCEstimate::from_count(counts.iter().sum(), n_samples as u64, seed))
}

/// Estimates `Pr[R(y) != R(y + u)]` for `y` uniform in the zero cell and `u`
/// drawn from `family` (pairs contribute their sum).
pub fn estimate_noise_sensitivity(
    body: &TilingBody,
    family: &StepFamily,
    n_samples: usize,
    seed: u64,
) -> Result<MCEstimate> {
    check_samples(n_samples)?;
    family.validate()?;
    let dim = body.dim();
    count_hits(seed, n_samples, |rng| {
        let y = body.sample_in_cell(rng)?;
        let u = sample_step(family, dim, rng).total();
        Ok(!body.round_point(&add(&y, &u, 1.0))?.is_zero())
    })
}

/// Estimates the probability that the segment `y -> y + u` leaves the zero cell,
/// checking the cell at `k_subdiv` equally spaced points after `y`.
/// With `k_subdiv = 1` this is the endpoint noise sensitivity.
pub fn estimate_escape(
    body: &TilingBody,
    family: &StepFamily,
    n_samples: usize,
    seed: u64,
    k_subdiv: usize,
) -> Result<MCEstimate> {
    check_samples(n_samples)?;
    family.validate()?;
    if k_subdiv == 0 {
        return Err(Error::params("k_subdiv must be positive"));
    }
    let dim = body.dim();
    count_hits(seed, n_samples, |rng| {
        let y = body.sample_in_cell(rng)?;
        let u = sample_step(family, dim, rng).total();
        segment_escapes(body, &y, &u, k_subdiv)
    })
}

/// Whether any of the points `y + (j/k) u`, `j = 1..=k`, lies outside the zero cell.
pub fn segment_escapes(body: &TilingBody, y: &[f64], u: &[f64], k: usize) -> Result<bool> {
    for j in 1..=k {
        if !body.round_point(&add(y, u, j as f64 / k as f64))?.is_zero() {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Number of consecutive checkpoints `x + ((j-1)/k) u`, `x + (j/k) u` lying in
/// different cells. A lower bound on the boundary crossings of the segment.
///
/// Checkpoints for `k` are a subset of those for any multiple of `k`, so
/// refining never lowers the count.
pub fn count_crossings(body: &TilingBody, x: &[f64], u: &[f64], k_subdiv: usize) -> Result<u32> {
    if k_subdiv == 0 {
        return Err(Error::params("k_subdiv must be positive"));
    }
    let mut prev = body.round_point(x)?;
    let mut count = 0;
    for j in 1..=k_subdiv {
        let next = body.round_point(&add(x, u, j as f64 / k_subdiv as f64))?;
        if next != prev {
            count += 1;
        }
        prev = next;
    }
    Ok(count)
}

/// Mean number of crossings of Gaussian needles `N(0, delta I)` from a uniform point of `D`.
pub fn mean_crossings(
    body: &TilingBody,
    delta: f64,
    n_samples: usize,
    seed: u64,
    k_subdiv: usize,
) -> Result<MCEstimate> {
    check_samples(n_samples)?;
    let family = StepFamily::Gaussian { sigma: delta.sqrt() };
    family.validate()?;
    let dim = body.dim();
    let sums = map_blocks(seed, n_samples, |rng, count| {
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..count {
            let y = body.sample_in_cell(rng)?;
            let u = sample_step(&family, dim, rng).total();
            let c = count_crossings(body, &y, &u, k_subdiv)? as f64;
            s += c;
            s2 += c * c;
        }
        Ok((s, s2))
    })?;
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(MCEstimate::from_moments(s, s2, n_samples as u64, seed))
}

/// Crossings per unit of `sqrt(delta) * area`, measured on the unit cube
/// whose boundary has area exactly `2n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub n: usize,
    pub delta: f64,
    pub constant: f64,
    pub rel_stderr: f64,
}

/// Largest relative standard error accepted for the cube calibration run.
pub const MAX_CALIBRATION_REL_STDERR: f64 = 0.05;

pub fn calibrate_area(
    n: usize,
    delta: f64,
    n_samples: usize,
    seed: u64,
    k_subdiv: usize,
) -> Result<Calibration> {
    let cube = TilingBody::unit_cube(n)?;
    let raw = mean_crossings(&cube, delta, n_samples, seed, k_subdiv)?;
    let rel = raw.stderr / raw.value;
    if !(rel <= MAX_CALIBRATION_REL_STDERR) {
        return Err(Error::Calibration(format!(
            "cube crossing mean {} has relative stderr {rel:.3}",
            raw.value
        )));
    }
    Ok(Calibration { n, delta, constant: raw.value / (delta.sqrt() * 2.0 * n as f64), rel_stderr: rel })
}

/// Calibrated surface area of a body.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaEstimate {
    /// Mean crossings per needle.
    pub raw: MCEstimate,
    pub area: f64,
    /// Combines the needle and calibration errors.
    pub area_stderr: f64,
    pub calibration: Calibration,
}

/// `area = mean crossings / (C * sqrt(delta))` with `C` from `calibration`.
pub fn estimate_surface_area(
    body: &TilingBody,
    delta: f64,
    n_samples: usize,
    seed: u64,
    k_subdiv: usize,
    calibration: &Calibration,
) -> Result<AreaEstimate> {
    let raw = mean_crossings(body, delta, n_samples, seed, k_subdiv)?;
    let area = raw.value / (calibration.constant * delta.sqrt());
    let rel = if raw.value > 0.0 { raw.stderr / raw.value } else { 0.0 };
    let area_stderr = area * (rel * rel + calibration.rel_stderr.powi(2)).sqrt();
    Ok(AreaEstimate { raw, area, area_stderr, calibration: *calibration })
}

/// Frequency with which the sufficient conditions for `y` and `y + u` to share a
/// cell fail: either the cut point changes, or some coordinate segment crosses it.
/// Only defined for the construction.
pub fn estimate_condition_failure(
    body: &TilingBody,
    family: &StepFamily,
    n_samples: usize,
    seed: u64,
) -> Result<MCEstimate> {
    check_samples(n_samples)?;
    family.validate()?;
    if body.params().is_none() {
        return Err(Error::domain("condition failure needs the construction body"));
    }
    let dim = body.dim();
    count_hits(seed, n_samples, |rng| {
        let (y, z) = body.sample_in_cell_with_center(rng)?;
        let z = z.expect("construction has a cut point");
        let u = sample_step(family, dim, rng).total();
        let moved = add(&y, &u, 1.0);
        let same_center = body.center_of(&moved)?.z == z;
        let crosses = y.iter().zip(&u).any(|(&a, &b)| segment_contains_level(a, b, z));
        let fail = !same_center || crosses;
        if !fail {
            debug_assert!(round_with_center(&moved, z).is_zero());
        }
        Ok(fail)
    })
}
