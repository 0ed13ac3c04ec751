use num_rational::Ratio;

use super::{judge, GameInstance, SymStrategy};
use crate::error::{Error, Result};

/// Largest number of free answer bits a brute-force search will enumerate.
pub const EXACT_STRATEGY_BITS: usize = 20;
const MAX_POINTS: usize = 3000;

/// Every challenge `(x, y)` with its weight out of `n^t 4^t`.
fn challenges(inst: &GameInstance) -> Result<Vec<(usize, usize, u64)>> {
    let points = inst
        .num_points()
        .filter(|&p| p <= MAX_POINTS)
        .ok_or_else(|| Error::StateSpaceTooLarge(format!("{}^{} points", inst.n, inst.t)))?;
    let steps = 3usize.pow(inst.t as u32);
    let mut out = Vec::with_capacity(points * steps);
    for xi in 0..points {
        let x = inst.point(xi);
        for code in 0..steps {
            let mut c = code;
            let mut s = vec![0i8; inst.t];
            let mut w = 1u64;
            for slot in s.iter_mut() {
                *slot = (c % 3) as i8 - 1;
                c /= 3;
                w *= if *slot == 0 { 2 } else { 1 };
            }
            out.push((xi, inst.index(&inst.step(&x, &s)), w));
        }
    }
    Ok(out)
}

fn denominator(inst: &GameInstance) -> u64 {
    (inst.n as u64).pow(inst.t as u32) * 4u64.pow(inst.t as u32)
}

/// Exact success probability when the first player uses `a` and the second `b`.
pub fn exact_success<A, B>(inst: &GameInstance, a: &A, b: &B) -> Result<Ratio<u64>>
where
    A: SymStrategy + ?Sized,
    B: SymStrategy + ?Sized,
{
    let mut wins = 0u64;
    for (xi, yi, w) in challenges(inst)? {
        let (x, y) = (inst.point(xi), inst.point(yi));
        if judge(&x, &y, a.answer(&x).as_deref(), b.answer(&y).as_deref()) {
            wins += w;
        }
    }
    Ok(Ratio::new(wins, denominator(inst)))
}

/// Symmetric strategies as bit vectors: the answer at coordinate `i` of `x` is
/// one bit chosen per (orbit of `x`, value `x_i`). Coordinates with equal values
/// get equal answers, which is exactly what equivariance forces.
struct Layout {
    orbit: Vec<usize>,
    /// Per point and coordinate: rank of `x_i` among the distinct values of `x`.
    local: Vec<Vec<usize>>,
    offset: Vec<usize>,
    width: Vec<usize>,
    bits: usize,
}

impl Layout {
    fn new(inst: &GameInstance, points: usize) -> Self {
        let mut keys: Vec<Vec<usize>> = Vec::new();
        let mut orbit = Vec::with_capacity(points);
        let mut local = Vec::with_capacity(points);
        for p in 0..points {
            let x = inst.point(p);
            let mut key = x.clone();
            key.sort_unstable();
            key.dedup();
            local.push(x.iter().map(|v| key.binary_search(v).unwrap()).collect());
            let id = match keys.iter().position(|k| sorted_eq(k, &x)) {
                Some(id) => id,
                None => {
                    let mut full = x.clone();
                    full.sort_unstable();
                    keys.push(full);
                    keys.len() - 1
                }
            };
            orbit.push(id);
        }
        let width: Vec<usize> = keys
            .iter()
            .map(|k| {
                let mut d = k.clone();
                d.dedup();
                d.len()
            })
            .collect();
        let mut offset = Vec::with_capacity(width.len());
        let mut bits = 0;
        for w in &width {
            offset.push(bits);
            bits += w;
        }
        Layout { orbit, local, offset, width, bits }
    }

    fn answer_bit(&self, mask: u64, p: usize, i: usize) -> u8 {
        ((mask >> (self.offset[self.orbit[p]] + self.local[p][i])) & 1) as u8
    }
}

fn sorted_eq(sorted_key: &[usize], x: &[usize]) -> bool {
    let mut s = x.to_vec();
    s.sort_unstable();
    s == sorted_key
}

/// A strategy given by an explicit answer table indexed by point index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableStrategy {
    pub inst: GameInstance,
    pub table: Vec<Vec<u8>>,
}

impl SymStrategy for TableStrategy {
    fn answer(&self, x: &[usize]) -> Option<Vec<u8>> {
        Some(self.table[self.inst.index(x)].clone())
    }
}

/// Every permutation-equivariant non-aborting strategy of a small instance.
pub fn symmetric_strategies(inst: &GameInstance) -> Result<Vec<TableStrategy>> {
    let points = inst
        .num_points()
        .filter(|&p| p <= MAX_POINTS)
        .ok_or_else(|| Error::StateSpaceTooLarge(format!("{}^{} points", inst.n, inst.t)))?;
    let layout = Layout::new(inst, points);
    if layout.bits > EXACT_STRATEGY_BITS {
        return Err(Error::StateSpaceTooLarge(format!("{} answer bits", layout.bits)));
    }
    Ok((0..(1u64 << layout.bits))
        .map(|mask| TableStrategy {
            inst: *inst,
            table: (0..points)
                .map(|p| (0..inst.t).map(|i| layout.answer_bit(mask, p, i)).collect())
                .collect(),
        })
        .collect())
}

/// The value of the symmetric game: the best success probability over pairs of
/// permutation-equivariant strategies, as an exact fraction.
///
/// Enumerates the first player's strategies and takes the best response of the
/// second player orbit by orbit.
pub fn brute_force_value(n: usize, t: usize) -> Result<Ratio<u64>> {
    let inst = GameInstance::new(n, t)?;
    let pairs = challenges(&inst)?;
    let points = inst.num_points().unwrap();
    let layout = Layout::new(&inst, points);
    if layout.bits > EXACT_STRATEGY_BITS {
        return Err(Error::StateSpaceTooLarge(format!(
            "{} answer bits exceed the limit of {EXACT_STRATEGY_BITS}",
            layout.bits
        )));
    }
    let orbits = layout.width.len();
    let mut best = 0u64;
    let mut score: Vec<Vec<u64>> = layout.width.iter().map(|&w| vec![0; 1 << w]).collect();
    for mask in 0..(1u64 << layout.bits) {
        for row in score.iter_mut() {
            row.iter_mut().for_each(|v| *v = 0);
        }
        for &(xp, yp, w) in &pairs {
            let o = layout.orbit[yp];
            let x = inst.point(xp);
            let y = inst.point(yp);
            for choice in 0..(1usize << layout.width[o]) {
                let ok = (0..t).all(|i| {
                    let a = layout.answer_bit(mask, xp, i);
                    let b = ((choice >> layout.local[yp][i]) & 1) as u8;
                    (x[i] == y[i]) == (a == b)
                });
                if ok {
                    score[o][choice] += w;
                }
            }
        }
        let total: u64 = (0..orbits).map(|o| *score[o].iter().max().unwrap()).sum();
        best = best.max(total);
    }
    Ok(Ratio::new(best, denominator(&inst)))
}
