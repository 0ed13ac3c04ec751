//! Center selection for the symmetric rounding scheme.
//!
//! The circle is cut into `m` intervals `I_j` with centers `z_j`. Each center
//! receives the score `r_j = prod g_j(y)` over the configuration points `y`
//! in `I_j`, where `g_j` vanishes near `z_j` and is `1` far from it. A center is
//! then drawn with probability proportional to its score using a shared
//! randomness stream (correlated sampling), so that nearby configurations
//! select the same center with high probability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{TorusConfig, TorusPoint};

/// Parameters that pin down one body of the randomized construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TilingParams {
    /// Dimension of the ambient space.
    pub n: usize,
    /// Number of intervals the circle is cut into.
    pub m: usize,
    /// Inverse score width, `50 n / ln n` by default.
    pub width_inv: f64,
    /// Seed of the shared randomness stream.
    pub seed: u64,
    /// Hard cap on correlated-sampling rounds.
    pub max_sampling_rounds: u64,
}

impl TilingParams {
    /// Default parameters for dimension `n >= 8`: `m = round(n^(1/3))`,
    /// `width_inv = 50 n / ln n` and a budget of `1000 m` sampling rounds.
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        if n < 8 {
            return Err(Error::params(format!("dimension must be at least 8, got {n}")));
        }
        let m = (n as f64).cbrt().round() as usize;
        Self::build(n, m, seed)
    }

    /// Replaces the interval count, keeping the other defaults.
    pub fn with_m(self, m: usize) -> Result<Self> {
        Self::build(self.n, m, self.seed)
    }

    fn build(n: usize, m: usize, seed: u64) -> Result<Self> {
        if m < 2 {
            return Err(Error::params(format!("interval count must be at least 2, got {m}")));
        }
        let nf = n as f64;
        Self::custom(n, m, 50.0 * nf / nf.ln(), seed, 1000 * m as u64)
    }

    /// Parameters for the low dimensions used by the repeated game (`t >= 1`).
    ///
    /// `ln t` is floored at `ln 2` and `m = max(1, floor(t^(1/3)))`, so every
    /// dimension below 8 uses a single interval.
    pub fn game_scale(t: usize, seed: u64) -> Result<Self> {
        if t == 0 {
            return Err(Error::params("dimension must be positive"));
        }
        let tf = t as f64;
        let m = ((tf.cbrt() + 1e-9).floor() as usize).max(1);
        Self::custom(t, m, 50.0 * tf / tf.max(2.0).ln(), seed, 1000 * m as u64)
    }

    /// Fully explicit parameters. Checks that the non-trivial part of every
    /// score function stays inside its own interval.
    pub fn custom(
        n: usize,
        m: usize,
        width_inv: f64,
        seed: u64,
        max_sampling_rounds: u64,
    ) -> Result<Self> {
        let p = TilingParams { n, m, width_inv, seed, max_sampling_rounds };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::params("n and m must be positive"));
        }
        if !(self.width_inv.is_finite() && self.width_inv > 0.0) {
            return Err(Error::params(format!("width_inv must be positive, got {}", self.width_inv)));
        }
        if self.max_sampling_rounds == 0 {
            return Err(Error::params("max_sampling_rounds must be positive"));
        }
        let outer = 2.0 / self.width_inv;
        if outer >= 0.5 / self.m as f64 {
            return Err(Error::params(format!(
                "score support radius {outer} does not fit in intervals of width {}",
                1.0 / self.m as f64
            )));
        }
        Ok(())
    }

    /// Center `z_j = (j + 1/2) / m` of interval `j` (0-based).
    #[inline]
    pub fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) / self.m as f64
    }

    /// Index of the half-open interval `[j/m, (j+1)/m)` containing `t`.
    #[inline]
    pub fn interval_of(&self, t: f64) -> usize {
        ((t * self.m as f64) as usize).min(self.m - 1)
    }
}

#[inline]
fn quintic(t: f64) -> f64 {
    if t <= 1.0 {
        0.0
    } else if t >= 2.0 {
        1.0
    } else {
        let s = t - 1.0;
        s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    }
}

/// The C² scoring profile: `0` on `[0, 1]`, `1` on `[2, inf)` and
/// `10 s^3 - 15 s^4 + 6 s^5` with `s = t - 1` in between.
pub fn smooth_step(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("smooth_step needs t >= 0, got {t}")));
    }
    Ok(quintic(t))
}

/// Score `g_j(t) = f(width_inv * |t - z_j|)` of a point of interval `j`.
pub fn center_score(params: &TilingParams, j: usize, t: TorusPoint) -> Result<f64> {
    if j >= params.m || params.interval_of(t.value()) != j {
        return Err(Error::domain(format!("{} is not in interval {j}", t.value())));
    }
    Ok(quintic(params.width_inv * (t.value() - params.center(j)).abs()))
}

/// Per-interval products of point scores.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector {
    pub r: Vec<f64>,
    pub total: f64,
}

pub fn interval_products(params: &TilingParams, cfg: &TorusConfig) -> ScoreVector {
    scores_of(params, cfg.coords())
}

/// Interval products of an unordered slice of points.
///
/// Only points within `2 / width_inv` of a center contribute a factor below 1.
/// Those factors are sorted before multiplying, so the result is a function of
/// the multiset of points, bit for bit, without sorting the whole slice.
fn scores_of(params: &TilingParams, points: &[TorusPoint]) -> ScoreVector {
    let cutoff = 2.0 / params.width_inv;
    let mf = params.m as f64;
    // conservative test in units of 1/m, exact test only for survivors
    let scaled_cutoff = cutoff * mf * (1.0 + 1e-9);
    let mut factors: Vec<(usize, f64)> = Vec::new();
    for t in points.iter().map(|p| p.value()) {
        let u = t * mf;
        let j = (u as usize).min(params.m - 1);
        if (u - (j as f64 + 0.5)).abs() >= scaled_cutoff {
            continue;
        }
        let dist = (t - params.center(j)).abs();
        if dist < cutoff {
            factors.push((j, quintic(params.width_inv * dist)));
        }
    }
    factors.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut r = vec![1.0; params.m];
    for (j, f) in factors {
        r[j] *= f;
    }
    let total = r.iter().sum();
    ScoreVector { r, total }
}

/// Normalises a score vector into a probability vector.
pub fn normalize_scores(scores: &ScoreVector) -> Result<Vec<f64>> {
    if !(scores.total > 0.0) {
        return Err(Error::domain("all interval scores vanish"));
    }
    Ok(scores.r.iter().map(|r| r / scores.total).collect())
}

/// The distribution `p_j = r_j / sum r` over interval centers.
pub fn choice_distribution(params: &TilingParams, cfg: &TorusConfig) -> Result<Vec<f64>> {
    normalize_scores(&interval_products(params, cfg))
}

/// Draws an index from `p` by walking the shared stream `(i_k, h_k)` derived
/// from `seed` and stopping at the first `k` with `h_k <= p[i_k]`.
///
/// Two calls with the same seed on distributions `p` and `q` disagree with
/// probability at most `|p - q|_1` over the seed. Returns the index and the
/// number of rounds used.
pub fn correlated_sample(p: &[f64], seed: u64, max_rounds: u64) -> Result<(usize, u64)> {
    if p.is_empty() {
        return Err(Error::domain("empty distribution"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for round in 1..=max_rounds {
        let i = rng.random_range(0..p.len());
        let h: f64 = rng.random();
        if p[i] > 0.0 && h <= p[i] {
            return Ok((i, round));
        }
    }
    Err(Error::SamplingBudget { budget: max_rounds })
}

/// Which branch of the selection rule produced the center.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CenterCase {
    /// Some interval has a positive score; chosen by correlated sampling.
    A,
    /// Every score vanishes and `1/2` is not a coordinate.
    B1,
    /// Every score vanishes and `1/2` is a coordinate; first free grid point.
    B2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CenterChoice {
    pub z: TorusPoint,
    pub case: CenterCase,
    /// Sampling rounds consumed, 0 outside case A.
    pub rounds_used: u64,
}

/// Chooses the cut point `z` for a configuration. Never returns `0` or a coordinate.
pub fn select_center(params: &TilingParams, cfg: &TorusConfig) -> Result<CenterChoice> {
    select_center_unordered(params, cfg.coords())
}

/// [`select_center`] on the fractional parts in any order; the result does not
/// depend on the order.
pub(crate) fn select_center_unordered(
    params: &TilingParams,
    points: &[TorusPoint],
) -> Result<CenterChoice> {
    let scores = scores_of(params, points);
    if scores.total > 0.0 {
        let p = normalize_scores(&scores)?;
        let (j, rounds) = correlated_sample(&p, params.seed, params.max_sampling_rounds)?;
        return Ok(CenterChoice {
            z: TorusPoint::new(params.center(j))?,
            case: CenterCase::A,
            rounds_used: rounds,
        });
    }
    if !points.iter().any(|p| p.value() == 0.5) {
        return Ok(CenterChoice { z: TorusPoint::new(0.5)?, case: CenterCase::B1, rounds_used: 0 });
    }
    let k = points.len();
    let gap = 1.0 / (4 * k) as f64;
    for i in 1..=2 * k {
        let c = TorusPoint::new((2 * i - 1) as f64 * gap)?;
        if points.iter().all(|p| p.circular_distance(c) >= gap) {
            return Ok(CenterChoice { z: c, case: CenterCase::B2, rounds_used: 0 });
        }
    }
    // n points can block at most n of the 2n grid candidates.
    unreachable!("no free grid point for a configuration of {k} points")
}
