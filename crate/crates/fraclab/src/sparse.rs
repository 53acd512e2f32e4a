//! Stopping-time sparse families of shifted dyadic cubes.
//!
//! The construction runs a Calderon-Zygmund stopping time on the cube
//! averages of `|f|^s`: for each integer generation `k`, the maximal cubes
//! whose normalized `L^s` average exceeds `a^k` (with `a = 2^((n+1)/s)`)
//! join the family. A cube maximal for several consecutive generations is
//! kept once, tagged with the largest one. Each member `Q` owns the set
//! `E_Q`: `Q` minus its next-generation stopping cubes, and these sets are
//! pairwise disjoint with `|E_Q| >= |Q|/2`.
//!
//! Cube masses come from the bottom-up aggregate tables, so a parent mass
//! is the floating-point sum of its children and all certificate
//! inequalities can be verified on the stored values. Volume bookkeeping
//! uses arbitrary-precision integers in units of the finest cube, keeping
//! the sparseness certificate exact.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::dyadic::{locate, DyadicCube, Shift};
use crate::grid::{EvalSet, GridFunction};
use crate::numeric::pairwise_sum;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("exponent s={s} out of range; need 1 <= s < n/alpha = {limit}")]
    ExponentOutOfRange { s: f64, limit: f64 },
    #[error("structural certificates are only defined for stopping-time families")]
    NotStoppingTime,
}

/// One member of a sparse family with its certificate data.
#[derive(Debug, Clone)]
pub struct SparseCube {
    pub cube: DyadicCube,
    /// Stopping generation: the largest `k` with `a^k < avg`.
    pub generation: i32,
    /// Normalized `L^s` average of `f` over the cube.
    pub avg: f64,
    /// Average of the tree parent (window certificate input).
    pub parent_avg: f64,
    /// Largest average among all proper ancestors in the tree.
    pub ancestor_max: f64,
    /// Whether the cube lies above the sampled mass (constant-mass chain).
    pub is_virtual: bool,
    /// Next-generation stopping cubes inside; `E_Q` is the complement.
    pub stopping: Vec<DyadicCube>,
}

enum Origin {
    StoppingTime,
    Manual,
}

/// Sparse collection of shifted dyadic cubes with `L^s` averages attached.
pub struct SparseFamily {
    pub n: usize,
    pub shift: Shift,
    pub s: f64,
    /// Generation ratio `a = 2^((n+1)/s)`.
    pub ratio_base: f64,
    pub cubes: Vec<SparseCube>,
    finest: i32,
    origin: Origin,
    /// Family members keyed by level for point evaluation.
    members: BTreeMap<i32, BTreeMap<[i64; 3], f64>>,
    /// All positive-mass tree cubes (the discrete operator side).
    tree: BTreeMap<i32, BTreeMap<[i64; 3], f64>>,
}

struct Node {
    cube: DyadicCube,
    mass: f64,
    avg: f64,
    parent: Option<usize>,
    children: Vec<usize>,
    is_virtual: bool,
    ancestor_max: f64,
}

fn ls_average(mass: f64, level: i32, n: usize, s: f64) -> f64 {
    let avg = mass * 2.0f64.powi(-(level * n as i32));
    if s == 1.0 {
        avg
    } else {
        avg.powf(1.0 / s)
    }
}

/// Largest `k` with `base^k < value`; assumes `value > 0` and `base > 1`.
fn generation_below(base: f64, value: f64) -> i32 {
    let mut k = (value.log2() / base.log2()).floor() as i32;
    while base.powi(k + 1) < value {
        k += 1;
    }
    while base.powi(k) >= value {
        k -= 1;
    }
    k
}

/// Smallest `k` with `base^k >= bound`; assumes `bound > 0`.
fn generation_at_or_above(base: f64, bound: f64) -> i32 {
    let mut k = (bound.log2() / base.log2()).ceil() as i32;
    while base.powi(k) < bound {
        k += 1;
    }
    while base.powi(k - 1) >= bound {
        k -= 1;
    }
    k
}

/// Runs the stopping-time construction for one shifted grid.
///
/// Virtual ancestors extend each aggregation root upward, halving the
/// average by `2^(n/s)` per level, until the top average drops below the
/// smallest generation any sampled cube can open. Chain tops never join
/// the family, so every member has an in-tree parent.
pub fn build_sparse(grid: &GridFunction, s: f64, shift: Shift) -> Result<SparseFamily, SparseError> {
    if !(1.0..f64::INFINITY).contains(&s) {
        return Err(SparseError::ExponentOutOfRange {
            s,
            limit: f64::INFINITY,
        });
    }
    let n = grid.n();
    let a = 2.0f64.powf((n as f64 + 1.0) / s);
    let values: Vec<f64> = grid.values().iter().map(|v| v.abs().powf(s)).collect();
    let aggr = crate::potentials::CubeAggregates::build(grid, &values, shift);
    let finest = aggr.finest;

    let mut nodes: Vec<Node> = Vec::new();
    let mut by_key: BTreeMap<(i32, [i64; 3]), usize> = BTreeMap::new();
    for lvl in &aggr.levels {
        for (&index, &mass) in &lvl.masses {
            let cube = DyadicCube {
                n,
                level: lvl.level,
                index,
                shift,
            };
            let id = nodes.len();
            nodes.push(Node {
                cube,
                mass,
                avg: ls_average(mass, lvl.level, n, s),
                parent: None,
                children: Vec::new(),
                is_virtual: false,
                ancestor_max: 0.0,
            });
            by_key.insert((lvl.level, index), id);
        }
    }
    let top_level = aggr.levels.last().map(|l| l.level).unwrap_or(finest);
    for id in 0..nodes.len() {
        let cube = nodes[id].cube;
        if cube.level == top_level {
            continue;
        }
        let parent = cube.parent();
        let pid = by_key[&(parent.level, parent.index)];
        nodes[id].parent = Some(pid);
        nodes[pid].children.push(id);
    }

    // Smallest generation reachable by a sampled cube sets the chain depth.
    let k_floor = nodes
        .iter()
        .filter(|node| node.avg > 0.0)
        .map(|node| generation_below(a, node.avg))
        .min();
    let Some(k_floor) = k_floor else {
        // All-zero input: empty family.
        return Ok(SparseFamily {
            n,
            shift,
            s,
            ratio_base: a,
            cubes: Vec::new(),
            finest,
            origin: Origin::StoppingTime,
            members: BTreeMap::new(),
            tree: BTreeMap::new(),
        });
    };
    let floor_avg = a.powi(k_floor);
    let roots: Vec<usize> = (0..nodes.len()).filter(|&id| nodes[id].parent.is_none()).collect();
    for root in roots {
        let mut top = root;
        let mut guard = 0;
        while nodes[top].avg > floor_avg {
            guard += 1;
            assert!(guard < 4096, "virtual ancestor chain exploded");
            let cube = nodes[top].cube.parent();
            let mass = nodes[top].mass;
            let id = nodes.len();
            nodes.push(Node {
                cube,
                mass,
                avg: ls_average(mass, cube.level, n, s),
                parent: None,
                children: vec![top],
                is_virtual: true,
                ancestor_max: 0.0,
            });
            nodes[top].parent = Some(id);
            top = id;
        }
    }

    // Ancestor maxima flow down from the chain tops.
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by_key(|&id| std::cmp::Reverse(nodes[id].cube.level));
    for &id in &order {
        if let Some(pid) = nodes[id].parent {
            nodes[id].ancestor_max = nodes[pid].ancestor_max.max(nodes[pid].avg);
        }
    }

    let mut cubes: Vec<SparseCube> = Vec::new();
    for id in 0..nodes.len() {
        let node = &nodes[id];
        let Some(pid) = node.parent else {
            continue;
        };
        if node.avg <= 0.0 {
            continue;
        }
        let k_hi = generation_below(a, node.avg);
        let k_lo = generation_at_or_above(a, node.ancestor_max.max(f64::MIN_POSITIVE));
        if k_lo > k_hi {
            continue;
        }
        // Next-generation stopping cubes inside, found top-down.
        let threshold = a.powi(k_hi + 1);
        let mut stopping = Vec::new();
        let mut stack: Vec<usize> = node.children.clone();
        while let Some(cid) = stack.pop() {
            if nodes[cid].avg > threshold {
                stopping.push(nodes[cid].cube);
            } else {
                stack.extend(nodes[cid].children.iter().copied());
            }
        }
        stopping.sort_by_key(|c| (c.level, c.index));
        cubes.push(SparseCube {
            cube: node.cube,
            generation: k_hi,
            avg: node.avg,
            parent_avg: nodes[pid].avg,
            ancestor_max: node.ancestor_max,
            is_virtual: node.is_virtual,
            stopping,
        });
    }
    cubes.sort_by_key(|c| (c.cube.level, c.cube.index));

    let mut members: BTreeMap<i32, BTreeMap<[i64; 3], f64>> = BTreeMap::new();
    for c in &cubes {
        members
            .entry(c.cube.level)
            .or_default()
            .insert(c.cube.index, c.avg);
    }
    let mut tree: BTreeMap<i32, BTreeMap<[i64; 3], f64>> = BTreeMap::new();
    for node in &nodes {
        if !node.is_virtual && node.avg > 0.0 {
            tree.entry(node.cube.level)
                .or_default()
                .insert(node.cube.index, node.avg);
        }
    }

    Ok(SparseFamily {
        n,
        shift,
        s,
        ratio_base: a,
        cubes,
        finest,
        origin: Origin::StoppingTime,
        members,
        tree,
    })
}

/// Structural certificate of a stopping-time family.
#[derive(Debug, Clone)]
pub struct SparseCertificate {
    /// `|Q| <= 2 |E_Q|` for every member, in exact integer units.
    pub sparseness_ok: bool,
    /// Worst `|Q| / |E_Q|` over the family.
    pub worst_volume_ratio: f64,
    /// `avg > a^gen`, `ancestor_max <= a^gen`, `avg <= 2^(n/s) a^gen`.
    pub window_ok: bool,
    /// Members of one generation are pairwise disjoint.
    pub generations_disjoint: bool,
    /// Every nested member pair is separated by a stopping cube.
    pub e_sets_disjoint: bool,
    pub members: usize,
    pub nested_pairs: usize,
}

impl SparseCertificate {
    pub fn all_ok(&self) -> bool {
        self.sparseness_ok && self.window_ok && self.generations_disjoint && self.e_sets_disjoint
    }
}

impl SparseFamily {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// Wraps an explicit cube list as a family, attaching `L^s` averages
    /// computed from the grid. The structural certificates do not apply.
    pub fn from_cubes(
        grid: &GridFunction,
        s: f64,
        shift: Shift,
        list: &[DyadicCube],
    ) -> Result<SparseFamily, SparseError> {
        if s < 1.0 {
            return Err(SparseError::ExponentOutOfRange {
                s,
                limit: f64::INFINITY,
            });
        }
        let n = grid.n();
        let values: Vec<f64> = grid.values().iter().map(|v| v.abs().powf(s)).collect();
        let aggr = crate::potentials::CubeAggregates::build(grid, &values, shift);
        let mut cubes = Vec::with_capacity(list.len());
        let mut members: BTreeMap<i32, BTreeMap<[i64; 3], f64>> = BTreeMap::new();
        for &cube in list {
            let avg = ls_average(aggr.mass(&cube), cube.level, n, s);
            cubes.push(SparseCube {
                cube,
                generation: 0,
                avg,
                parent_avg: 0.0,
                ancestor_max: 0.0,
                is_virtual: false,
                stopping: Vec::new(),
            });
            members.entry(cube.level).or_default().insert(cube.index, avg);
        }
        Ok(SparseFamily {
            n,
            shift,
            s,
            ratio_base: 2.0f64.powf((n as f64 + 1.0) / s),
            cubes,
            finest: aggr.finest,
            origin: Origin::Manual,
            members,
            tree: BTreeMap::new(),
        })
    }

    fn check_alpha(&self, alpha: f64) -> Result<(), SparseError> {
        let limit = self.n as f64 / alpha;
        if self.s >= limit {
            return Err(SparseError::ExponentOutOfRange { s: self.s, limit });
        }
        Ok(())
    }

    /// Sparse fractional operator at one point: sum over members
    /// containing the point of `side^alpha` times the member average.
    pub fn evaluate_at(&self, alpha: f64, x: &[f64; 3]) -> f64 {
        let mut terms = Vec::new();
        for (&level, layer) in &self.members {
            let probe = locate(self.n, x, level, self.shift);
            if let Some(&avg) = layer.get(&probe.index) {
                terms.push(probe.side_f64().powf(alpha) * avg);
            }
        }
        pairwise_sum(&terms)
    }

    /// Evaluates the sparse operator on a set of points, rejecting
    /// exponents in the divergent range `s >= n/alpha`.
    pub fn apply(&self, alpha: f64, eval: &EvalSet) -> Result<Vec<f64>, SparseError> {
        self.check_alpha(alpha)?;
        Ok(eval
            .points
            .par_iter()
            .map(|x| self.evaluate_at(alpha, x))
            .collect())
    }

    /// Discrete fractional potential over the full positive-mass tree of
    /// the same grid and masses (the dominated side).
    pub fn tree_potential_at(&self, alpha: f64, x: &[f64; 3]) -> f64 {
        let mut terms = Vec::new();
        for (&level, layer) in &self.tree {
            let probe = locate(self.n, x, level, self.shift);
            if let Some(&avg) = layer.get(&probe.index) {
                terms.push(probe.side_f64().powf(alpha) * avg);
            }
        }
        pairwise_sum(&terms)
    }

    fn volume_units(&self, cube: &DyadicCube) -> BigUint {
        let depth = (cube.level - self.finest) as u64 * self.n as u64;
        BigUint::one() << depth
    }

    /// Verifies the structural certificates with exact integer volume
    /// arithmetic and the stored floating-point averages.
    pub fn certify(&self) -> Result<SparseCertificate, SparseError> {
        if !matches!(self.origin, Origin::StoppingTime) {
            return Err(SparseError::NotStoppingTime);
        }
        let a = self.ratio_base;
        let window_factor = 2.0f64.powf(self.n as f64 / self.s) * (1.0 + 1e-12);
        let mut sparseness_ok = true;
        let mut window_ok = true;
        let mut worst_ratio = 0.0f64;
        for member in &self.cubes {
            let gen_cut = a.powi(member.generation);
            if !(member.avg > gen_cut) || member.ancestor_max > gen_cut {
                window_ok = false;
            }
            // Two-step window: avg <= 2^(n/s) parent_avg and parent_avg
            // <= ancestor_max <= a^gen, so avg <= 2^(n/s) a^gen.
            if member.avg > window_factor * member.parent_avg
                || member.avg > window_factor * gen_cut
            {
                window_ok = false;
            }
            let q_units = self.volume_units(&member.cube);
            let mut covered = BigUint::zero();
            for stop in &member.stopping {
                covered += self.volume_units(stop);
            }
            if covered > q_units {
                sparseness_ok = false;
                continue;
            }
            let e_units = &q_units - &covered;
            if q_units > (&e_units) * 2u32 {
                sparseness_ok = false;
            }
            if let (Some(q), Some(e)) = (q_units.to_f64(), e_units.to_f64()) {
                if e > 0.0 {
                    worst_ratio = worst_ratio.max(q / e);
                } else {
                    sparseness_ok = false;
                }
            }
        }

        // Same-generation members must be pairwise disjoint: walk each
        // member's ancestor levels and require no same-generation hit.
        let mut by_generation: BTreeMap<i32, BTreeMap<(i32, [i64; 3]), ()>> = BTreeMap::new();
        for member in &self.cubes {
            by_generation
                .entry(member.generation)
                .or_default()
                .insert((member.cube.level, member.cube.index), ());
        }
        let max_level = self.cubes.iter().map(|m| m.cube.level).max().unwrap_or(self.finest);
        let mut generations_disjoint = true;
        for member in &self.cubes {
            let group = &by_generation[&member.generation];
            let mut walk = member.cube;
            while walk.level < max_level {
                walk = walk.parent();
                if group.contains_key(&(walk.level, walk.index)) {
                    generations_disjoint = false;
                }
            }
        }

        // Nested member pairs: the nearest family ancestor must separate
        // the inner member behind one of its stopping cubes.
        let member_keys: BTreeMap<(i32, [i64; 3]), usize> = self
            .cubes
            .iter()
            .enumerate()
            .map(|(i, m)| ((m.cube.level, m.cube.index), i))
            .collect();
        let mut e_sets_disjoint = true;
        let mut nested_pairs = 0usize;
        for member in &self.cubes {
            let mut walk = member.cube;
            let mut nearest = None;
            while walk.level < max_level {
                walk = walk.parent();
                if let Some(&idx) = member_keys.get(&(walk.level, walk.index)) {
                    nearest = Some(idx);
                    break;
                }
            }
            let Some(outer_idx) = nearest else { continue };
            nested_pairs += 1;
            let outer = &self.cubes[outer_idx];
            let separated = outer.stopping.iter().any(|stop| {
                *stop == member.cube || stop.is_ancestor_of(&member.cube)
            });
            if !separated {
                e_sets_disjoint = false;
            }
        }

        Ok(SparseCertificate {
            sparseness_ok,
            worst_volume_ratio: worst_ratio,
            window_ok,
            generations_disjoint,
            e_sets_disjoint,
            members: self.cubes.len(),
            nested_pairs,
        })
    }
}

/// Pointwise comparison of the discrete potential against its sparse
/// domination on an evaluation set.
#[derive(Debug, Clone)]
pub struct DominationReport {
    /// Proven constant `a / (1 - 2^(-alpha))`.
    pub constant: f64,
    /// Largest observed `tree / sparse` ratio.
    pub worst_ratio: f64,
    pub mean_ratio: f64,
    /// Points where both sides vanish (skipped in the ratios).
    pub trivial_points: usize,
}

/// Measures `sup_x I^tree(x) / I^sparse(x)` over the evaluation set.
pub fn domination_report(
    family: &SparseFamily,
    alpha: f64,
    eval: &EvalSet,
) -> Result<DominationReport, SparseError> {
    family.check_alpha(alpha)?;
    let pairs: Vec<(f64, f64)> = eval
        .points
        .par_iter()
        .map(|x| {
            (
                family.tree_potential_at(alpha, x),
                family.evaluate_at(alpha, x),
            )
        })
        .collect();
    let mut worst = 0.0f64;
    let mut ratios = Vec::new();
    let mut trivial = 0usize;
    for (tree, sparse) in pairs {
        if tree == 0.0 && sparse == 0.0 {
            trivial += 1;
            continue;
        }
        let ratio = tree / sparse;
        worst = worst.max(ratio);
        ratios.push(ratio);
    }
    let mean = if ratios.is_empty() {
        0.0
    } else {
        pairwise_sum(&ratios) / ratios.len() as f64
    };
    Ok(DominationReport {
        constant: family.ratio_base / (1.0 - 2.0f64.powf(-alpha)),
        worst_ratio: worst,
        mean_ratio: mean,
        trivial_points: trivial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::shifts;
    use crate::grid::corpus::{sample, CorpusParams};
    use crate::grid::BoxSpec;

    fn unit_cube_grid(res: usize) -> GridFunction {
        let spec = BoxSpec::symmetric(2, 8.0).unwrap();
        let params = CorpusParams::default().set("side", 1.0);
        sample("indicator_cube", &params, spec, res).unwrap()
    }

    #[test]
    fn family_on_unit_cube_selects_the_expected_scale() {
        let f = unit_cube_grid(64);
        let family = build_sparse(&f, 1.0, 0).unwrap();
        assert!(!family.is_empty());
        // The cube [0,2)^2 has average 1/4 while its ancestors stay below
        // 1/16, so generation -1 (a = 8) must select it.
        let hit = family.cubes.iter().find(|m| {
            m.cube.level == 1 && m.cube.index == [0, 0, 0] && !m.is_virtual
        });
        let hit = hit.expect("side-2 cube missing from family");
        assert_eq!(hit.generation, -1);
        assert!((hit.avg - 0.25).abs() < 1e-14);
        let cert = family.certify().unwrap();
        assert!(cert.all_ok(), "certificate failed: {cert:?}");
    }

    #[test]
    fn certificates_pass_on_smooth_corpus_all_shifts() {
        let spec = BoxSpec::symmetric(2, 8.0).unwrap();
        let f = sample("two_bumps", &CorpusParams::default(), spec, 64).unwrap();
        for shift in shifts(2) {
            for s in [1.0, 1.2] {
                let family = build_sparse(&f, s, shift).unwrap();
                let cert = family.certify().unwrap();
                assert!(
                    cert.all_ok(),
                    "shift {shift} s {s}: {cert:?}"
                );
                assert!(cert.worst_volume_ratio <= 2.0 + 1e-12);
                assert!(cert.members > 0);
            }
        }
    }

    #[test]
    fn domination_stays_under_the_proven_constant() {
        let spec = BoxSpec::symmetric(2, 8.0).unwrap();
        let f = sample("two_bumps", &CorpusParams::default(), spec, 64).unwrap();
        let eval = EvalSet::strided(&f, 5);
        for shift in shifts(2) {
            let family = build_sparse(&f, 1.0, shift).unwrap();
            let report = domination_report(&family, 1.0, &eval).unwrap();
            assert!(
                report.worst_ratio <= report.constant,
                "shift {shift}: ratio {} over constant {}",
                report.worst_ratio,
                report.constant
            );
            assert!(report.worst_ratio > 0.5, "suspiciously small ratio");
        }
    }

    #[test]
    fn manual_tower_reproduces_the_geometric_series() {
        let f = unit_cube_grid(128);
        for top in 1..=4i32 {
            let list: Vec<DyadicCube> = (1..=top)
                .map(|level| DyadicCube {
                    n: 2,
                    level,
                    index: [0, 0, 0],
                    shift: 0,
                })
                .collect();
            let family = SparseFamily::from_cubes(&f, 1.0, 0, &list).unwrap();
            let x = [0.5, 0.5, 0.0];
            let got = family.evaluate_at(1.0, &x);
            // side^1 * side^-2 mass: each level contributes 2^-k.
            let want: f64 = (1..=top).map(|k| 2.0f64.powi(-k)).sum();
            assert!(
                (got - want).abs() < 1e-12,
                "tower {top}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn divergent_exponent_is_rejected() {
        let f = unit_cube_grid(64);
        let family = build_sparse(&f, 2.0, 0).unwrap();
        let eval = EvalSet::strided(&f, 16);
        // s = 2 with alpha = 1 sits exactly at the divergence threshold
        // s = n/alpha.
        let err = family.apply(1.0, &eval).unwrap_err();
        assert!(matches!(err, SparseError::ExponentOutOfRange { .. }));
        assert!(family.apply(0.5, &eval).is_ok());
        assert!(SparseFamily::from_cubes(&f, 0.5, 0, &[]).is_err());
    }

    #[test]
    fn construction_is_deterministic() {
        let spec = BoxSpec::symmetric(2, 8.0).unwrap();
        let f = sample("oscillating_bump", &CorpusParams::default(), spec, 64).unwrap();
        let a = build_sparse(&f, 1.2, 3).unwrap();
        let b = build_sparse(&f, 1.2, 3).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.cubes.iter().zip(&b.cubes) {
            assert_eq!(x.cube, y.cube);
            assert_eq!(x.generation, y.generation);
            assert!(x.avg == y.avg && x.parent_avg == y.parent_avg);
            assert_eq!(x.stopping, y.stopping);
        }
    }

    #[test]
    fn zero_grid_gives_empty_family() {
        let spec = BoxSpec::symmetric(2, 4.0).unwrap();
        let f = sample("zero", &CorpusParams::default(), spec, 32).unwrap();
        let family = build_sparse(&f, 1.0, 0).unwrap();
        assert!(family.is_empty());
        let cert = family.certify().unwrap();
        assert!(cert.all_ok());
    }
}
