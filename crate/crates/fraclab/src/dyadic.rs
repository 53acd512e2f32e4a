//! Shifted dyadic lattices.
//!
//! For a shift `t` in `{0, 1/3}^n` the lattice at level `k` consists of the
//! cubes `2^k ([0,1)^n + m + (-1)^k t)`, `m` in `Z^n`. The alternating sign
//! makes consecutive levels nest: because `3t` is an integer per axis, the
//! parent of the cube with index `m` at level `k` is the cube with index
//! `floor((m + (-1)^k 3t) / 2)` at level `k + 1`, which is pure integer
//! arithmetic. Geometric predicates (containment, wall avoidance) are
//! available both in floating point and in exact rational arithmetic; the
//! exact path is the ground truth for every certificate.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::grid::Cube;

#[derive(Debug, Error)]
pub enum DyadicError {
    #[error("cube side {0} is not an exact power of two")]
    SideNotPowerOfTwo(f64),
    #[error("no containing shifted cube with side in ({low}, {high}] for cube of side {side}")]
    NoContainingCube { side: f64, low: f64, high: f64 },
    #[error("value {0} has no exact rational representation")]
    NotRepresentable(f64),
}

/// Shift mask: bit `a` set means `t_a = 1/3` on axis `a`.
pub type Shift = u8;

/// All `2^n` shifts in ascending mask order.
pub fn shifts(n: usize) -> impl Iterator<Item = Shift> {
    (0..(1u8 << n)).map(|m| m as Shift)
}

/// `(-1)^level`.
pub fn level_sign(level: i32) -> i64 {
    if level % 2 == 0 {
        1
    } else {
        -1
    }
}

/// `2^k` as an exact rational for any sign of `k`.
pub fn pow2(k: i32) -> BigRational {
    if k >= 0 {
        BigRational::from_integer(BigInt::one() << k as usize)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-k) as usize)
    }
}

/// Exact rational from a finite double.
pub fn rational_from_f64(x: f64) -> Result<BigRational, DyadicError> {
    BigRational::from_float(x).ok_or(DyadicError::NotRepresentable(x))
}

/// Returns `k` when `x == 2^k` exactly.
pub fn exact_log2(x: f64) -> Option<i32> {
    if !(x.is_finite() && x > 0.0) {
        return None;
    }
    let k = x.log2().round();
    if (k as i32 as f64) == k && (k).exp2() == x {
        Some(k as i32)
    } else {
        None
    }
}

/// An axis-aligned cube with exact rational corners.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalCube {
    pub n: usize,
    pub lower: [BigRational; 3],
    pub side: BigRational,
}

impl RationalCube {
    pub fn from_f64(cube: &Cube) -> Result<Self, DyadicError> {
        let zero = BigRational::zero();
        let mut lower = [zero.clone(), zero.clone(), zero];
        for a in 0..cube.n {
            lower[a] = rational_from_f64(cube.lower[a])?;
        }
        Ok(RationalCube {
            n: cube.n,
            lower,
            side: rational_from_f64(cube.side)?,
        })
    }
}

/// One cube of a shifted dyadic lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    pub n: usize,
    pub level: i32,
    pub index: [i64; 3],
    pub shift: Shift,
}

impl DyadicCube {
    pub fn side_f64(&self) -> f64 {
        (self.level as f64).exp2()
    }

    fn shift_bit(&self, axis: usize) -> i64 {
        ((self.shift >> axis) & 1) as i64
    }

    /// Lower corner on an axis as an exact rational:
    /// `2^level (3 m + sign * u) / 3` with `u` the shift bit.
    pub fn lower_rational(&self, axis: usize) -> BigRational {
        let sign = level_sign(self.level);
        let numer = BigInt::from(3 * self.index[axis] + sign * self.shift_bit(axis));
        pow2(self.level) * BigRational::new(numer, BigInt::from(3))
    }

    pub fn lower_f64(&self, axis: usize) -> f64 {
        let sign = level_sign(self.level) as f64;
        let u = self.shift_bit(axis) as f64;
        self.side_f64() * (self.index[axis] as f64 + sign * u / 3.0)
    }

    /// Lossy floating-point view of the cube.
    pub fn to_cube(&self) -> Cube {
        let mut lower = [0.0; 3];
        for a in 0..self.n {
            lower[a] = self.lower_f64(a);
        }
        Cube::new(self.n, lower, self.side_f64())
    }

    /// The unique cube one level up containing this cube.
    pub fn parent(&self) -> DyadicCube {
        let sign = level_sign(self.level);
        let mut index = [0i64; 3];
        for a in 0..self.n {
            index[a] = (self.index[a] + sign * self.shift_bit(a)).div_euclid(2);
        }
        DyadicCube {
            n: self.n,
            level: self.level + 1,
            index,
            shift: self.shift,
        }
    }

    /// The `2^n` cubes one level down tiling this cube, in lexicographic
    /// order of their per-axis offsets.
    pub fn children(&self) -> Vec<DyadicCube> {
        let child_level = self.level - 1;
        let child_sign = level_sign(child_level);
        let mut base = [0i64; 3];
        for a in 0..self.n {
            base[a] = 2 * self.index[a] - child_sign * self.shift_bit(a);
        }
        let mut out = Vec::with_capacity(1 << self.n);
        let count = 1usize << self.n;
        for off in 0..count {
            let mut index = base;
            for a in 0..self.n {
                index[a] += ((off >> a) & 1) as i64;
            }
            out.push(DyadicCube {
                n: self.n,
                level: child_level,
                index,
                shift: self.shift,
            });
        }
        out
    }

    /// Whether `q` is contained in this cube, decided exactly.
    pub fn contains_rational(&self, q: &RationalCube) -> bool {
        let side = pow2(self.level);
        for a in 0..self.n {
            let lo = self.lower_rational(a);
            let hi = lo.clone() + side.clone();
            let q_hi = q.lower[a].clone() + q.side.clone();
            if q.lower[a] < lo || q_hi > hi {
                return false;
            }
        }
        true
    }

    /// Whether the point lies in the half-open cube, decided in f64.
    pub fn contains_point(&self, x: &[f64; 3]) -> bool {
        let side = self.side_f64();
        for a in 0..self.n {
            let lo = self.lower_f64(a);
            if x[a] < lo || x[a] >= lo + side {
                return false;
            }
        }
        true
    }

    /// Whether `self` is an ancestor of (or equal to) `q`, via the integer
    /// parent chain.
    pub fn is_ancestor_of(&self, q: &DyadicCube) -> bool {
        if self.shift != q.shift || self.level < q.level {
            return false;
        }
        let mut walk = *q;
        while walk.level < self.level {
            walk = walk.parent();
        }
        walk == *self
    }
}

/// Locates the lattice cube containing a point (floating point path).
pub fn locate(n: usize, x: &[f64; 3], level: i32, shift: Shift) -> DyadicCube {
    let scale = (-(level as f64)).exp2();
    let sign = level_sign(level) as f64;
    let mut index = [0i64; 3];
    for a in 0..n {
        let u = ((shift >> a) & 1) as f64;
        index[a] = (x[a] * scale - sign * u / 3.0).floor() as i64;
    }
    DyadicCube {
        n,
        level,
        index,
        shift,
    }
}

/// Locates the lattice cube containing a rational point, exactly.
pub fn locate_rational(
    n: usize,
    x: &[BigRational; 3],
    level: i32,
    shift: Shift,
) -> DyadicCube {
    let inv_side = pow2(-level);
    let sign = level_sign(level);
    let mut index = [0i64; 3];
    for a in 0..n {
        let u = BigInt::from(((shift >> a) & 1) as i64 * sign);
        let r = x[a].clone() * inv_side.clone() - BigRational::new(u, BigInt::from(3));
        let floored = r.floor().to_integer();
        index[a] = i64::try_from(floored).expect("dyadic index overflows i64");
    }
    DyadicCube {
        n,
        level,
        index,
        shift,
    }
}

/// A containment certificate produced by the shifted-cube search.
#[derive(Debug, Clone)]
pub struct Containment {
    pub container: DyadicCube,
    /// Exact ratio `side(container) / side(query)`.
    pub side_ratio: BigRational,
}

/// Finds a shifted dyadic cube containing `q` with side in `(l, 6l]`,
/// `l = side(q)`, scanning levels from below and shifts in mask order.
///
/// Containment is decided in exact rational arithmetic. The two wall
/// families on an axis (unshifted and third-shifted) are `2^k/3` apart at
/// level `k`, so once `2^k > 3l` an interval of length `l` contains a wall
/// of at most one family in its interior and some shift must succeed; this
/// bound lands inside the scanned window, hence the search cannot fail.
pub fn third_trick(q: &RationalCube) -> Result<Containment, DyadicError> {
    let six = BigRational::from_integer(BigInt::from(6));
    let upper = q.side.clone() * six;
    // Smallest level with 2^k > side.
    let mut level = {
        let approx = side_to_f64(&q.side).log2().floor() as i32;
        let mut k = approx - 2;
        while pow2(k) <= q.side {
            k += 1;
        }
        k
    };
    while pow2(level) <= upper {
        for shift in shifts(q.n) {
            let cand = locate_rational(q.n, &q.lower, level, shift);
            if cand.contains_rational(q) {
                return Ok(Containment {
                    side_ratio: pow2(level) / q.side.clone(),
                    container: cand,
                });
            }
        }
        level += 1;
    }
    let side = side_to_f64(&q.side);
    Err(DyadicError::NoContainingCube {
        side,
        low: side,
        high: 6.0 * side,
    })
}

/// For a cube of side exactly `2^j`, finds a containing shifted cube at
/// level `j + 3`; the three-level gap always suffices.
pub fn third_trick_level(q: &RationalCube) -> Result<Containment, DyadicError> {
    let j = rational_exact_log2(&q.side)
        .ok_or_else(|| DyadicError::SideNotPowerOfTwo(side_to_f64(&q.side)))?;
    let level = j + 3;
    for shift in shifts(q.n) {
        let cand = locate_rational(q.n, &q.lower, level, shift);
        if cand.contains_rational(q) {
            return Ok(Containment {
                side_ratio: pow2(level) / q.side.clone(),
                container: cand,
            });
        }
    }
    let side = side_to_f64(&q.side);
    Err(DyadicError::NoContainingCube {
        side,
        low: side,
        high: 8.0 * side,
    })
}

fn side_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Returns `k` when the rational equals `2^k` exactly.
pub fn rational_exact_log2(r: &BigRational) -> Option<i32> {
    if !r.is_positive() {
        return None;
    }
    let reduced = r.reduced();
    let num = reduced.numer();
    let den = reduced.denom();
    let pow_of_two = |v: &BigInt| -> Option<u64> {
        let bits = v.bits();
        if bits == 0 {
            return None;
        }
        if (v & (v - BigInt::one())) == BigInt::zero() {
            Some(bits - 1)
        } else {
            None
        }
    };
    if den.is_one() {
        pow_of_two(num).map(|k| k as i32)
    } else if num.is_one() {
        pow_of_two(den).map(|k| -(k as i32))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rat(x: f64) -> BigRational {
        rational_from_f64(x).unwrap()
    }

    #[test]
    fn pow2_round_trips_exact_log() {
        for k in [-12, -3, 0, 1, 7, 30] {
            assert_eq!(rational_exact_log2(&pow2(k)), Some(k));
        }
        assert_eq!(rational_exact_log2(&rat(0.75)), None);
        assert_eq!(exact_log2(0.25), Some(-2));
        assert_eq!(exact_log2(3.0), None);
    }

    #[test]
    fn parent_contains_child_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let n = if rng.random_bool(0.5) { 2 } else { 3 };
            let cube = DyadicCube {
                n,
                level: rng.random_range(-8..9),
                index: [
                    rng.random_range(-1000..1000),
                    rng.random_range(-1000..1000),
                    rng.random_range(-1000..1000),
                ],
                shift: rng.random_range(0..(1u8 << n)),
            };
            let parent = cube.parent();
            assert_eq!(parent.level, cube.level + 1);
            let zero = BigRational::zero();
            let mut lower = [zero.clone(), zero.clone(), zero];
            for a in 0..n {
                lower[a] = cube.lower_rational(a);
            }
            let as_rational = RationalCube {
                n,
                lower,
                side: pow2(cube.level),
            };
            assert!(
                parent.contains_rational(&as_rational),
                "parent {parent:?} fails to contain {cube:?}"
            );
        }
    }

    #[test]
    fn children_tile_parent() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let n = if rng.random_bool(0.5) { 2 } else { 3 };
            let cube = DyadicCube {
                n,
                level: rng.random_range(-6..7),
                index: [
                    rng.random_range(-50..50),
                    rng.random_range(-50..50),
                    if n == 3 { rng.random_range(-50..50) } else { 0 },
                ],
                shift: rng.random_range(0..(1u8 << n)),
            };
            let kids = cube.children();
            assert_eq!(kids.len(), 1 << n);
            let mut seen = std::collections::BTreeSet::new();
            for kid in &kids {
                assert_eq!(kid.parent(), cube, "child {kid:?} of {cube:?}");
                assert!(seen.insert(kid.index), "duplicate child {kid:?}");
            }
        }
    }

    #[test]
    fn locate_agrees_between_float_and_rational_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let n = 2;
            // Dyadic sample-like points: odd multiples of 2^-9.
            let x0 = (2 * rng.random_range(-2000..2000i64) + 1) as f64 / 512.0;
            let x1 = (2 * rng.random_range(-2000..2000i64) + 1) as f64 / 512.0;
            let x = [x0, x1, 0.0];
            let level = rng.random_range(-5..6);
            let shift = rng.random_range(0u8..4);
            let via_f64 = locate(n, &x, level, shift);
            let xr = [rat(x0), rat(x1), BigRational::zero()];
            let via_rat = locate_rational(n, &xr, level, shift);
            assert_eq!(via_f64, via_rat, "x={x:?} level={level} shift={shift}");
            assert!(via_f64.contains_point(&x));
        }
    }

    #[test]
    fn third_trick_finds_container_within_six_times_side() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let six = BigRational::from_integer(BigInt::from(6));
        for _ in 0..300 {
            let n = if rng.random_bool(0.5) { 2 } else { 3 };
            let side = rng.random_range(0.001..10.0f64);
            let q = RationalCube {
                n,
                lower: [
                    rat(rng.random_range(-20.0..20.0)),
                    rat(rng.random_range(-20.0..20.0)),
                    rat(rng.random_range(-20.0..20.0)),
                ],
                side: rat(side),
            };
            let cert = third_trick(&q).unwrap();
            assert!(cert.container.contains_rational(&q));
            assert!(cert.side_ratio > BigRational::one());
            assert!(cert.side_ratio <= six, "ratio {} too big", cert.side_ratio);
        }
    }

    #[test]
    fn third_trick_level_sits_exactly_three_levels_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..300 {
            let n = if rng.random_bool(0.5) { 2 } else { 3 };
            let j = rng.random_range(-8..9);
            let side = (j as f64).exp2();
            let q = RationalCube {
                n,
                lower: [
                    rat((rng.random_range(-4000..4000i64)) as f64 * side / 64.0),
                    rat((rng.random_range(-4000..4000i64)) as f64 * side / 64.0),
                    rat((rng.random_range(-4000..4000i64)) as f64 * side / 64.0),
                ],
                side: rat(side),
            };
            let cert = third_trick_level(&q).unwrap();
            assert_eq!(cert.container.level, j + 3);
            assert!(cert.container.contains_rational(&q));
        }
    }

    #[test]
    fn ancestor_chain_matches_containment() {
        let cube = DyadicCube {
            n: 2,
            level: -3,
            index: [5, -7, 0],
            shift: 0b01,
        };
        let anc = cube.parent().parent().parent();
        assert!(anc.is_ancestor_of(&cube));
        assert!(!cube.is_ancestor_of(&anc));
        // Different shifts never relate.
        let shifted = DyadicCube { shift: 0b10, ..cube };
        assert!(!anc.is_ancestor_of(&shifted));
    }

    #[test]
    fn grid_sample_points_avoid_all_cube_walls() {
        // Samples sit at odd multiples of h/2 on a dyadic box, so for the
        // unshifted lattice x / 2^k is never an integer for k >= log2(h),
        // and for the third-shift the wall positions are non-dyadic.
        let h = rat(0.0625);
        let half = h.clone() / BigRational::from_integer(BigInt::from(2));
        for i in -40..40i64 {
            let x = BigRational::from_integer(BigInt::from(2 * i + 1)) * half.clone();
            for level in -4..8i32 {
                for shift_bit in [0i64, 1] {
                    let sign = BigInt::from(level_sign(level) * shift_bit);
                    let wall_frac = x.clone() * pow2(-level)
                        - BigRational::new(sign, BigInt::from(3));
                    assert!(
                        !wall_frac.is_integer(),
                        "sample {x} on wall at level {level} shift {shift_bit}"
                    );
                }
            }
        }
    }
}
