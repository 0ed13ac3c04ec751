//! The odd cycle game and its symmetric `t`-fold repetition.
//!
//! Vertices of the cycle `C_n` are `i/n`; a challenge is a pair of `t`-tuples of
//! vertex indices `(x, y)` with `x` uniform and `y = x + u` for a lazy step `u`
//! (stay with probability 1/2, move to either neighbour with probability 1/4).
//! Each player answers one bit per coordinate; equal vertices must get equal
//! bits and neighbouring vertices different bits.

mod exact;
mod strategy;

pub use exact::{
    brute_force_value, exact_success, symmetric_strategies, TableStrategy, EXACT_STRATEGY_BITS,
};
pub use strategy::{
    box_majority, decency_probe, default_k, equivalence_check, mean_decency_failure, step_escape,
    strategy_to_rounding,
    BoxSummary, EquivReport, LatticeRounding, StepEscape, TilingStrategy,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::needle::MCEstimate;
use crate::parallel::map_blocks;

/// The game `C_n` repeated `t` times symmetrically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameInstance {
    pub n: usize,
    pub t: usize,
}

impl GameInstance {
    pub fn new(n: usize, t: usize) -> Result<Self> {
        if n < 3 || n % 2 == 0 {
            return Err(Error::params(format!("cycle length must be odd and at least 3, got {n}")));
        }
        if t == 0 {
            return Err(Error::params("repetition count must be positive"));
        }
        Ok(GameInstance { n, t })
    }

    /// `n^t`, or `None` on overflow.
    pub fn num_points(&self) -> Option<usize> {
        self.n.checked_pow(self.t as u32)
    }

    /// Decodes a point index into its base-`n` digits, most significant first.
    pub fn point(&self, mut idx: usize) -> Vec<usize> {
        let mut x = vec![0; self.t];
        for slot in x.iter_mut().rev() {
            *slot = idx % self.n;
            idx /= self.n;
        }
        x
    }

    pub fn index(&self, x: &[usize]) -> usize {
        x.iter().fold(0, |acc, &v| acc * self.n + v)
    }

    /// Vertex `(x_i + s_i) mod n` for steps `s_i` in `{-1, 0, 1}`.
    pub fn step(&self, x: &[usize], s: &[i8]) -> Vec<usize> {
        x.iter()
            .zip(s)
            .map(|(&v, &d)| (v as i64 + d as i64).rem_euclid(self.n as i64) as usize)
            .collect()
    }
}

/// A strategy: answers a tuple of vertex indices with one bit per coordinate,
/// or aborts with `None`.
pub trait SymStrategy: Sync {
    fn answer(&self, x: &[usize]) -> Option<Vec<u8>>;
}

/// Answers `0` everywhere.
#[derive(Clone, Copy, Debug)]
pub struct ConstantStrategy(pub u8);

impl SymStrategy for ConstantStrategy {
    fn answer(&self, x: &[usize]) -> Option<Vec<u8>> {
        Some(vec![self.0; x.len()])
    }
}

/// Colours vertex `i` with `i mod 2`; only the edge between `n - 1` and `0` is
/// coloured badly.
#[derive(Clone, Copy, Debug)]
pub struct ParityStrategy;

impl SymStrategy for ParityStrategy {
    fn answer(&self, x: &[usize]) -> Option<Vec<u8>> {
        Some(x.iter().map(|&v| (v % 2) as u8).collect())
    }
}

impl<F> SymStrategy for F
where
    F: Fn(&[usize]) -> Option<Vec<u8>> + Sync,
{
    fn answer(&self, x: &[usize]) -> Option<Vec<u8>> {
        self(x)
    }
}

/// Draws a challenge: `x` uniform, then per coordinate stay with probability
/// 1/2 or move by `+-1` with probability 1/4 each.
pub fn sample_challenge<R: Rng + ?Sized>(inst: &GameInstance, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let x: Vec<usize> = (0..inst.t).map(|_| rng.random_range(0..inst.n)).collect();
    let s: Vec<i8> = (0..inst.t)
        .map(|_| match rng.random_range(0..4u8) {
            0 | 1 => 0,
            2 => 1,
            _ => -1,
        })
        .collect();
    let y = inst.step(&x, &s);
    (x, y)
}

/// The verifier: equal vertices need equal answers, distinct ones distinct answers.
/// An abort (`None`) loses.
pub fn judge(x: &[usize], y: &[usize], a: Option<&[u8]>, b: Option<&[u8]>) -> bool {
    let (Some(a), Some(b)) = (a, b) else {
        return false;
    };
    x.iter()
        .zip(y)
        .zip(a.iter().zip(b))
        .all(|((xi, yi), (ai, bi))| (xi == yi) == (ai == bi))
}

/// Monte Carlo result of both players running one strategy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameEval {
    pub success: MCEstimate,
    /// Fraction of individual answers that abort (two per challenge).
    pub abort: MCEstimate,
}

pub fn evaluate_strategy<S: SymStrategy + ?Sized>(
    inst: &GameInstance,
    strategy: &S,
    n_samples: usize,
    seed: u64,
) -> Result<GameEval> {
    if n_samples < 1000 {
        return Err(Error::params(format!("need at least 1000 samples, got {n_samples}")));
    }
    let counts = map_blocks(seed, n_samples, |rng, count| {
        let (mut wins, mut aborts) = (0u64, 0u64);
        for _ in 0..count {
            let (x, y) = sample_challenge(inst, rng);
            let a = strategy.answer(&x);
            let b = strategy.answer(&y);
            aborts += a.is_none() as u64 + b.is_none() as u64;
            wins += judge(&x, &y, a.as_deref(), b.as_deref()) as u64;
        }
        Ok((wins, aborts))
    })?;
    let wins = counts.iter().map(|c| c.0).sum();
    let aborts = counts.iter().map(|c| c.1).sum();
    Ok(GameEval {
        success: MCEstimate::from_count(wins, n_samples as u64, seed),
        abort: MCEstimate::from_count(aborts, 2 * n_samples as u64, seed),
    })
}

/// One row of a strategy table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub x: Vec<usize>,
    pub answer: Option<Vec<u8>>,
}

/// Answers on every point of `C_n^t`, for small instances.
pub fn strategy_table<S: SymStrategy + ?Sized>(inst: &GameInstance, strategy: &S) -> Result<Vec<TableRow>> {
    let total = inst
        .num_points()
        .filter(|&p| p <= 100_000)
        .ok_or_else(|| Error::StateSpaceTooLarge(format!("{}^{} points", inst.n, inst.t)))?;
    Ok((0..total)
        .map(|i| {
            let x = inst.point(i);
            let answer = strategy.answer(&x);
            TableRow { x, answer }
        })
        .collect())
}
