//! Arithmetic on the circle `R/Z`.
//!
//! Besides fractional parts this module provides the *gap distance*
//! `d(x, y) = min_{z != 0} |(x + z) - y|`, which measures how close two reals
//! are to differing by a nonzero integer. Note that `d` is a function of
//! `x - y` and not of the fractional parts alone: `d(0.15, 0.05) = 0.9` while
//! `d(1.15, 0.05) = 0.1`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the circle, stored as its representative in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[repr(transparent)]
pub struct TorusPoint(f64);

impl TorusPoint {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..1.0).contains(&value) {
            Ok(TorusPoint(value))
        } else {
            Err(Error::domain(format!("{value} is not in [0, 1)")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Circular distance `min(|a - b|, 1 - |a - b|)`.
    pub fn circular_distance(self, other: TorusPoint) -> f64 {
        let d = (self.0 - other.0).abs();
        d.min(1.0 - d)
    }
}

/// Splits `x` into `(floor, frac)` with `frac` in `[0, 1)` and `floor + frac == x`
/// up to the rounding of the subtraction.
///
/// When `x - floor(x)` rounds up to `1.0` (tiny negative inputs) the split is
/// renormalised to `(floor + 1, 0.0)` so that the two parts stay consistent.
#[inline]
pub(crate) fn split(x: f64) -> (f64, f64) {
    let fl = fast_floor(x);
    let fr = x - fl;
    if fr >= 1.0 {
        (fl + 1.0, 0.0)
    } else {
        (fl, fr)
    }
}

/// `floor` through an integer cast, which avoids a libm call on targets without
/// a rounding instruction. Exact for `|x| < 2^52`; larger values are integers.
#[inline]
fn fast_floor(x: f64) -> f64 {
    if x.abs() < 4_503_599_627_370_496.0 {
        let t = (x as i64) as f64;
        if t > x {
            t - 1.0
        } else {
            t
        }
    } else {
        x.floor()
    }
}

/// Fractional part `x - floor(x)`.
pub fn frac(x: f64) -> Result<TorusPoint> {
    if !x.is_finite() {
        return Err(Error::domain(format!("frac of non-finite value {x}")));
    }
    Ok(TorusPoint(split(x).1))
}

/// Scans the nonzero shifts around `floor(y - x)` and reports the minimum
/// of `|(x + z) - y|` together with which signs of `(x + z) - y` attain it.
#[inline]
fn gap_scan(x: f64, y: f64) -> (f64, bool, bool) {
    let base = (y - x).floor();
    let mut best = f64::INFINITY;
    let mut pos = false;
    let mut neg = false;
    for k in -2..=2 {
        let z = base + k as f64;
        if z == 0.0 {
            continue;
        }
        let v = (x + z) - y;
        let a = v.abs();
        if a < best {
            best = a;
            pos = v >= 0.0;
            neg = v <= 0.0;
        } else if a == best {
            pos |= v >= 0.0;
            neg |= v <= 0.0;
        }
    }
    (best, pos, neg)
}

/// Gap distance `min over nonzero integers z of |(x + z) - y|`, a value in `[0, 1]`.
///
/// Non-finite input yields NaN.
pub fn gap_distance(x: f64, y: f64) -> f64 {
    if !(x.is_finite() && y.is_finite()) {
        return f64::NAN;
    }
    gap_scan(x, y).0
}

/// Sign `+1` if some nonzero shift realises `d(x, y) = (x + z) - y`, else `-1`.
///
/// When both signs realise the minimum (`x == y`, or `x - y` a half-integer of
/// absolute value at least 3/2) the result is `+1`.
pub fn gap_sign(x: f64, y: f64) -> i8 {
    let (_, pos, _) = gap_scan(x, y);
    if pos {
        1
    } else {
        -1
    }
}

/// Whether the segment `x + lambda * delta`, `lambda` in `[0, 1]`, passes through
/// a lift `z + w` (`w` integer) of the circle point `z`.
pub fn segment_contains_level(x: f64, delta: f64, z: TorusPoint) -> bool {
    let a = x - z.0;
    let b = x + delta - z.0;
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    lo.ceil() <= hi.floor()
}

/// A multiset of `n >= 2` circle points kept in ascending order.
///
/// Everything computed from a configuration is therefore invariant under
/// permutations of the raw input.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusConfig {
    coords: Vec<TorusPoint>,
}

impl TorusConfig {
    pub fn coords(&self) -> &[TorusPoint] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Whether `z` occurs as a coordinate, by exact equality.
    pub fn contains(&self, z: f64) -> bool {
        self.coords
            .binary_search_by(|p| p.0.total_cmp(&z))
            .is_ok()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.coords.iter().map(|p| p.0)
    }
}

/// Fractional parts of `raw`, sorted ascending.
pub fn canonical_config(raw: &[f64]) -> Result<TorusConfig> {
    if raw.len() < 2 {
        return Err(Error::domain(format!(
            "a configuration needs at least 2 points, got {}",
            raw.len()
        )));
    }
    let mut coords = Vec::with_capacity(raw.len());
    for &x in raw {
        coords.push(frac(x)?);
    }
    coords.sort_unstable_by(|a, b| cmp_points(*a, *b));
    Ok(TorusConfig { coords })
}

#[inline]
fn cmp_points(a: TorusPoint, b: TorusPoint) -> Ordering {
    a.0.total_cmp(&b.0)
}
