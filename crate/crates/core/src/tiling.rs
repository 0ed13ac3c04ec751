//! Rounding maps `R: R^n -> Z^n` whose zero cell `D = R^{-1}(0)` tiles space
//! under integer translations.
//!
//! The construction rounds every coordinate down or up depending on whether its
//! fractional part lies below or above a cut point `z` chosen from the multiset
//! of fractional parts. Since `z` only sees that multiset, the map commutes with
//! integer translations and coordinate permutations.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scoring::{select_center_unordered, CenterChoice, TilingParams};
use crate::torus::{frac, segment_contains_level, split, TorusPoint};

/// A point of the integer lattice, the label of a cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeVector {
    pub entries: Vec<i64>,
}

impl LatticeVector {
    pub fn zero(n: usize) -> Self {
        LatticeVector { entries: vec![0; n] }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&e| e == 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BodyKind {
    /// The symmetric body built from correlated center selection.
    Construction,
    /// `[0, 1)^n`, rounding by floor.
    UnitCube,
}

/// A fundamental domain of `Z^n`, given implicitly by its rounding map.
#[derive(Clone, Debug, PartialEq)]
pub enum TilingBody {
    Construction(TilingParams),
    UnitCube { n: usize },
}

/// Rounds with a fixed cut point: floor below `z`, ceil above.
///
/// Panics if a fractional part equals `z`; the center selection never allows it.
pub fn round_with_center(x: &[f64], z: TorusPoint) -> LatticeVector {
    let z = z.value();
    let entries = x
        .iter()
        .map(|&xi| {
            let (fl, fr) = split(xi);
            assert!(fr != z, "fractional part {fr} collides with the cut point");
            if fr < z {
                fl as i64
            } else {
                fl as i64 + 1
            }
        })
        .collect();
    LatticeVector { entries }
}

impl TilingBody {
    pub fn construction(params: TilingParams) -> Self {
        TilingBody::Construction(params)
    }

    pub fn unit_cube(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::params("dimension must be positive"));
        }
        Ok(TilingBody::UnitCube { n })
    }

    pub fn dim(&self) -> usize {
        match self {
            TilingBody::Construction(p) => p.n,
            TilingBody::UnitCube { n } => *n,
        }
    }

    pub fn kind(&self) -> BodyKind {
        match self {
            TilingBody::Construction(_) => BodyKind::Construction,
            TilingBody::UnitCube { .. } => BodyKind::UnitCube,
        }
    }

    pub fn params(&self) -> Option<&TilingParams> {
        match self {
            TilingBody::Construction(p) => Some(p),
            TilingBody::UnitCube { .. } => None,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::domain(format!(
                "point has {} coordinates, body has dimension {}",
                x.len(),
                self.dim()
            )));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite coordinate {v}")));
        }
        Ok(())
    }

    /// The cut point chosen for `x`. Only defined for the construction.
    pub fn center_of(&self, x: &[f64]) -> Result<CenterChoice> {
        self.check_point(x)?;
        match self {
            TilingBody::Construction(p) => {
                let fr: Vec<TorusPoint> = x.iter().map(|&v| frac(v)).collect::<Result<_>>()?;
                select_center_unordered(p, &fr)
            }
            TilingBody::UnitCube { .. } => {
                Err(Error::domain("the unit cube has no cut point"))
            }
        }
    }

    /// The label `R(x)` of the cell containing `x`.
    pub fn round_point(&self, x: &[f64]) -> Result<LatticeVector> {
        self.check_point(x)?;
        match self {
            TilingBody::Construction(_) => Ok(round_with_center(x, self.center_of(x)?.z)),
            TilingBody::UnitCube { .. } => Ok(LatticeVector {
                entries: x.iter().map(|&v| split(v).0 as i64).collect(),
            }),
        }
    }

    /// The representative `x - R(x)` of `x` in `D`.
    pub fn mod_cell(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = self.round_point(x)?;
        Ok(x.iter().zip(&r.entries).map(|(&v, &k)| v - k as f64).collect())
    }

    /// A uniform point of `D`, obtained by reducing a uniform point of `[0, 1)^n`.
    pub fn sample_in_cell<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        Ok(self.sample_in_cell_with_center(rng)?.0)
    }

    /// Like [`sample_in_cell`](Self::sample_in_cell), also returning the cut point
    /// of the sample (`None` for the cube).
    ///
    /// Uniform draws are multiples of `2^-53`, so `x - R(x)` is computed exactly
    /// and the sample has the same fractional parts, hence the same cut point, as `x`.
    pub fn sample_in_cell_with_center<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<(Vec<f64>, Option<TorusPoint>)> {
        let x = sample_unit_cube(self.dim(), rng);
        match self {
            TilingBody::Construction(_) => {
                let z = self.center_of(&x)?.z;
                let r = round_with_center(&x, z);
                let y = x.iter().zip(&r.entries).map(|(&v, &k)| v - k as f64).collect();
                Ok((y, Some(z)))
            }
            TilingBody::UnitCube { .. } => Ok((x, None)),
        }
    }

    /// Checks the two sufficient conditions for `x` and `x + delta` to share a cell:
    /// both pick the same cut point, and no coordinate segment crosses its level.
    pub fn check_u1(&self, x: &[f64], delta: &[f64]) -> Result<U1Report> {
        if delta.len() != x.len() {
            return Err(Error::domain("x and delta differ in length"));
        }
        let moved: Vec<f64> = x.iter().zip(delta).map(|(a, b)| a + b).collect();
        let c0 = self.center_of(x)?;
        let c1 = self.center_of(&moved)?;
        let cond1_holds = c0.z == c1.z;
        let cond2_holds = x
            .iter()
            .zip(delta)
            .all(|(&xi, &di)| !segment_contains_level(xi, di, c0.z));
        let same_cell = self.round_point(x)? == self.round_point(&moved)?;
        Ok(U1Report { cond1_holds, cond2_holds, same_cell })
    }

    pub fn descriptor(&self) -> BodyDescriptor {
        match self {
            TilingBody::Construction(p) => BodyDescriptor {
                kind: BodyKind::Construction,
                n: p.n,
                m: Some(p.m),
                seed: Some(p.seed),
                width_inv: Some(p.width_inv),
                max_sampling_rounds: Some(p.max_sampling_rounds),
            },
            TilingBody::UnitCube { n } => BodyDescriptor {
                kind: BodyKind::UnitCube,
                n: *n,
                m: None,
                seed: None,
                width_inv: None,
                max_sampling_rounds: None,
            },
        }
    }

    /// SHA-256 over the descriptor and 1000 probe roundings, as lowercase hex.
    pub fn fingerprint(&self) -> Result<String> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x0f1e_2d3c_4b5a_6978);
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.descriptor()).expect("descriptor serializes"));
        let mut x = vec![0.0; self.dim()];
        for _ in 0..1000 {
            for v in x.iter_mut() {
                *v = rng.random_range(-2.0..2.0);
            }
            for e in self.round_point(&x)?.entries {
                h.update(e.to_le_bytes());
            }
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// A uniform point of `[0, 1)^n`.
pub fn sample_unit_cube<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// True iff no two coordinates of `y` differ by a nonzero integer, up to a
/// relative tolerance of `1e-12` (so that `0.3` and `1.3` are caught).
///
/// Points of `D` never do: such a pair would put a permuted copy of `y` in a
/// different translate of `D`.
pub fn no_integer_gap_check(y: &[f64]) -> bool {
    let mut v: Vec<(f64, f64)> = y.iter().map(|&a| (split(a).1, a)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let gap = |a: f64, b: f64| {
        let d = a - b;
        let k = d.round();
        k != 0.0 && (d - k).abs() <= 1e-12 * d.abs().max(1.0)
    };
    let wrap = v.len() > 2 && gap(v[0].1, v[v.len() - 1].1);
    !wrap && v.windows(2).all(|w| !gap(w[0].1, w[1].1))
}

/// Outcome of [`TilingBody::check_u1`]. The two conditions together imply `same_cell`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct U1Report {
    pub cond1_holds: bool,
    pub cond2_holds: bool,
    pub same_cell: bool,
}

/// JSON form of a body, enough to rebuild it exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyDescriptor {
    pub kind: BodyKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_inv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sampling_rounds: Option<u64>,
}

impl BodyDescriptor {
    /// Rebuilds the body. Missing construction fields fall back to the defaults for `n`.
    pub fn to_body(&self) -> Result<TilingBody> {
        match self.kind {
            BodyKind::UnitCube => TilingBody::unit_cube(self.n),
            BodyKind::Construction => {
                if let (Some(m), Some(w), Some(r)) = (self.m, self.width_inv, self.max_sampling_rounds) {
                    let p = TilingParams::custom(self.n, m, w, self.seed.unwrap_or(0), r)?;
                    return Ok(TilingBody::Construction(p));
                }
                let mut p = TilingParams::new(self.n, self.seed.unwrap_or(0))?;
                if let Some(m) = self.m {
                    p = p.with_m(m)?;
                }
                let width_inv = self.width_inv.unwrap_or(p.width_inv);
                let rounds = self.max_sampling_rounds.unwrap_or(p.max_sampling_rounds);
                Ok(TilingBody::Construction(TilingParams::custom(
                    p.n, p.m, width_inv, p.seed, rounds,
                )?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn body(n: usize, seed: u64) -> TilingBody {
        TilingBody::construction(TilingParams::new(n, seed).unwrap())
    }

    /// Grid points `k / 2^20` plus a fixed offset with few significant bits.
    fn dyadic_point(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let offset = 0.318_309_886_183_790_7_f64;
        let offset = (offset * (1u64 << 40) as f64).round() / (1u64 << 40) as f64;
        (0..n)
            .map(|_| rng.random_range(-(3 << 20)..(3 << 20)) as f64 / (1 << 20) as f64 + offset)
            .collect()
    }

    #[test]
    fn forced_center_example() {
        let z = TorusPoint::new(0.5).unwrap();
        assert_eq!(round_with_center(&[0.3, 1.7, -0.2], z).entries, vec![0, 2, 0]);
        let z = TorusPoint::new(0.99).unwrap();
        assert!(round_with_center(&[0.1, 0.5, 0.98], z).is_zero());
    }

    #[test]
    #[should_panic(expected = "collides")]
    fn forced_center_collision_panics() {
        round_with_center(&[0.5, 0.1], TorusPoint::new(0.5).unwrap());
    }

    #[test]
    fn unit_cube_is_floor() {
        let b = TilingBody::unit_cube(3).unwrap();
        assert_eq!(b.round_point(&[0.3, -1.2, 2.0]).unwrap().entries, vec![0, -2, 2]);
        let y = b.mod_cell(&[0.3, -1.25, 2.0]).unwrap();
        assert_eq!(y, vec![0.3, 0.75, 0.0]);
        assert!(b.round_point(&[0.1, 0.2]).is_err());
        assert!(b.round_point(&[0.1, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn translation_equivariance_on_dyadic_grid() {
        let b = body(64, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let x = dyadic_point(64, &mut rng);
            let t: Vec<i64> = (0..64).map(|_| rng.random_range(-3..=3)).collect();
            let xt: Vec<f64> = x.iter().zip(&t).map(|(a, &k)| a + k as f64).collect();
            let r = b.round_point(&x).unwrap();
            let rt = b.round_point(&xt).unwrap();
            let shifted: Vec<i64> = r.entries.iter().zip(&t).map(|(a, b)| a + b).collect();
            assert_eq!(rt.entries, shifted);
        }
    }

    #[test]
    fn permutation_equivariance() {
        let b = body(128, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x: Vec<f64> = (0..128).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut perm: Vec<usize> = (0..128).collect();
            perm.shuffle(&mut rng);
            let px: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
            let r = b.round_point(&x).unwrap();
            let pr = b.round_point(&px).unwrap();
            let expect: Vec<i64> = perm.iter().map(|&i| r.entries[i]).collect();
            assert_eq!(pr.entries, expect);
        }
    }

    #[test]
    fn mod_cell_is_a_projection() {
        let b = body(64, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = dyadic_point(64, &mut rng);
            let y = b.mod_cell(&x).unwrap();
            assert!(b.round_point(&y).unwrap().is_zero());
            assert_eq!(b.mod_cell(&y).unwrap(), y);
            // x = y + t lands back on y
            let t: Vec<f64> = (0..64).map(|_| rng.random_range(-2..=2) as f64).collect();
            let yt: Vec<f64> = y.iter().zip(&t).map(|(a, b)| a + b).collect();
            assert_eq!(b.mod_cell(&yt).unwrap(), y);
        }
    }

    #[test]
    fn samples_are_uniform_and_in_cell() {
        let b = body(16, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 20_000;
        let mut sum = vec![0.0; 16];
        for _ in 0..n {
            let (y, z) = b.sample_in_cell_with_center(&mut rng).unwrap();
            assert_eq!(b.center_of(&y).unwrap().z, z.unwrap());
            assert!(b.round_point(&y).unwrap().is_zero());
            assert!(no_integer_gap_check(&y));
            for (s, v) in sum.iter_mut().zip(&y) {
                *s += split(*v).1;
            }
        }
        let sigma = (1.0f64 / 12.0 / n as f64).sqrt();
        for s in sum {
            assert!((s / n as f64 - 0.5).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn integer_gap_examples() {
        assert!(no_integer_gap_check(&[0.3, 0.3]));
        assert!(!no_integer_gap_check(&[0.3, 1.3]));
        assert!(no_integer_gap_check(&[0.3, 0.7, -0.1]));
        // fractional parts 1e-15 and 1 - 1e-15 sit at opposite ends of the order
        assert!(!no_integer_gap_check(&[1.0, 0.5, -1e-15]));
    }

    #[test]
    fn u1_examples() {
        let b = body(27, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..27).map(|_| rng.random::<f64>()).collect();
        let rep = b.check_u1(&x, &[0.0; 27]).unwrap();
        assert!(rep.cond1_holds && rep.cond2_holds && rep.same_cell);

        // move one coordinate across the cut point
        let z = b.center_of(&x).unwrap().z.value();
        let mut y = x.clone();
        y[0] = z - 0.001;
        let z2 = b.center_of(&y).unwrap().z.value();
        if z2 == z {
            let mut delta = vec![0.0; 27];
            delta[0] = 0.002;
            assert!(!b.check_u1(&y, &delta).unwrap().cond2_holds);
        }
    }

    #[test]
    fn u1_soundness_random() {
        let b = body(64, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut both = 0;
        for _ in 0..2000 {
            let x: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..2.0)).collect();
            let scale = 10f64.powf(rng.random_range(-5.0..-1.0));
            let d: Vec<f64> = (0..64).map(|_| rng.random_range(-scale..scale)).collect();
            let r = b.check_u1(&x, &d).unwrap();
            if r.cond1_holds && r.cond2_holds {
                both += 1;
                assert!(r.same_cell);
            }
        }
        assert!(both > 100);
    }

    #[test]
    fn descriptor_round_trip() {
        let b = TilingBody::construction(TilingParams::new(1024, 7).unwrap().with_m(3).unwrap());
        let json = serde_json::to_string(&b.descriptor()).unwrap();
        assert!(json.contains("\"kind\":\"construction\""));
        let back: BodyDescriptor = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_body().unwrap(), b);

        let game = TilingBody::construction(TilingParams::game_scale(3, 2).unwrap());
        let json = serde_json::to_string(&game.descriptor()).unwrap();
        let back: BodyDescriptor = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_body().unwrap(), game);

        let cube = TilingBody::unit_cube(5).unwrap();
        let json = serde_json::to_string(&cube.descriptor()).unwrap();
        assert_eq!(json, r#"{"kind":"unit-cube","n":5}"#);
    }

    #[test]
    fn fingerprint_is_deterministic_and_seed_sensitive() {
        let a = body(64, 1).fingerprint().unwrap();
        assert_eq!(a, body(64, 1).fingerprint().unwrap());
        assert_eq!(a.len(), 64);
        assert_ne!(a, body(64, 2).fingerprint().unwrap());
    }

    proptest! {
        #[test]
        fn round_then_mod_cell_is_zero(seed in any::<u64>(), raw in proptest::collection::vec(-4.0f64..4.0, 8..40)) {
            let n = raw.len();
            let b = TilingBody::construction(TilingParams::custom(n, 2, 1000.0, seed, 2000).unwrap());
            let y = b.mod_cell(&raw).unwrap();
            prop_assert!(b.round_point(&y).unwrap().is_zero());
            prop_assert!(no_integer_gap_check(&y));
        }
    }
}
