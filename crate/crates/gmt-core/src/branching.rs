//! Uniform sets along a geometric stage ladder, greedy uniform-subset
//! extraction with the (2T)^-m cardinality guarantee, exhaustive
//! uniformization, and branching functions.

use crate::dyadic::{Coord, DyadicSet, Scale};
use crate::error::{GmtError, Result};
use crate::exact::{floor_div, log2_exact, rat, Rat};
use crate::frostman::{frostman_constant, FrostmanCertificate};
use crate::lipschitz::PiecewiseAffine;
use num_bigint::BigUint;
use num_traits::One;
use std::collections::BTreeMap;

/// A set certified uniform for the stages `2^-T, 2^-2T, ..., 2^-mT`:
/// every surviving ancestor at stage j-1 has exactly `counts[j-1]` children
/// at stage j, and each count is a power of two.
#[derive(Debug, Clone)]
pub struct UniformStructure {
    pub step: u32,
    pub stages: usize,
    pub counts: Vec<u64>,
    pub subject: DyadicSet,
}

/// Failure location of a uniformity check. `stage` is the stage of the
/// ancestor cells whose child counts disagree (0 = the root stage).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UniformFailure {
    NonConstant {
        stage: usize,
        cell_a: Coord,
        count_a: u64,
        cell_b: Coord,
        count_b: u64,
    },
    NotPowerOfTwo {
        stage: usize,
        cell: Coord,
        count: u64,
    },
}

fn ancestor(c: Coord, shift: u32) -> Coord {
    [
        floor_div(c[0] as i128, 1i128 << shift) as i64,
        floor_div(c[1] as i128, 1i128 << shift) as i64,
    ]
}

/// Per-stage child counts, or the first violation of constancy or of the
/// power-of-two requirement.
pub fn check_uniform(
    p: &DyadicSet,
    step: u32,
) -> Result<std::result::Result<UniformStructure, UniformFailure>> {
    if step == 0 {
        return Err(GmtError::ParameterRange("step must be positive".into()));
    }
    if p.level().0 % step != 0 {
        return Err(GmtError::LevelNotDivisible {
            level: p.level().0,
            step,
        });
    }
    if p.is_empty() {
        return Err(GmtError::EmptySet("check_uniform"));
    }
    let stages = (p.level().0 / step) as usize;
    let mut counts = Vec::with_capacity(stages);
    for j in 1..=stages {
        let child_level = j as u32 * step;
        let parent_shift = step;
        // children at stage j grouped by their stage-(j-1) parent
        let shift_to_child = p.level().0 - child_level;
        let mut children: Vec<Coord> = p
            .cells()
            .iter()
            .map(|&c| ancestor(c, shift_to_child))
            .collect();
        children.sort_unstable();
        children.dedup();
        let mut per_parent: BTreeMap<Coord, u64> = BTreeMap::new();
        for ch in &children {
            *per_parent.entry(ancestor(*ch, parent_shift)).or_insert(0) += 1;
        }
        let mut iter = per_parent.iter();
        let (first_cell, first_count) = iter.next().expect("non-empty");
        for (cell, count) in iter.clone() {
            if count != first_count {
                return Ok(Err(UniformFailure::NonConstant {
                    stage: j - 1,
                    cell_a: *first_cell,
                    count_a: *first_count,
                    cell_b: *cell,
                    count_b: *count,
                }));
            }
        }
        if log2_exact(*first_count).is_none() {
            return Ok(Err(UniformFailure::NotPowerOfTwo {
                stage: j - 1,
                cell: *first_cell,
                count: *first_count,
            }));
        }
        counts.push(*first_count);
    }
    Ok(Ok(UniformStructure {
        step,
        stages,
        counts,
        subject: p.clone(),
    }))
}

/// Greedy per-stage pigeonholing, ascending from the finest stage to the
/// coarsest: group the surviving parents by the dyadic bucket of their child
/// count, keep the bucket retaining the most delta-cells (ties toward the
/// larger count), and trim every kept parent to exactly 2^floor(log2 n)
/// children, keeping the lexicographically smallest. Once a stage has been
/// processed, the stages already finished are touched only by whole-subtree
/// drops, so their per-parent counts stay constant; the output is uniform
/// and carries at least (2T)^-m of the input delta-cells.
pub fn uniformize(p: &DyadicSet, step: u32) -> Result<DyadicSet> {
    if step == 0 {
        return Err(GmtError::ParameterRange("step must be positive".into()));
    }
    if p.level().0 % step != 0 || p.level().0 == 0 {
        return Err(GmtError::LevelNotDivisible {
            level: p.level().0,
            step,
        });
    }
    if p.is_empty() {
        return Err(GmtError::EmptySet("uniformize"));
    }
    let stages = p.level().0 / step;
    let mut survivors: Vec<Coord> = p.cells().to_vec();
    for j in (1..=stages).rev() {
        let child_level = j * step;
        let shift_to_child = p.level().0 - child_level;
        // per parent: distinct children and the delta-mass under each child
        let mut tree: BTreeMap<Coord, BTreeMap<Coord, u64>> = BTreeMap::new();
        for &c in &survivors {
            let ch = ancestor(c, shift_to_child);
            let pa = ancestor(ch, step);
            *tree.entry(pa).or_default().entry(ch).or_insert(0) += 1;
        }
        // bucket parents by floor(log2(#children)); score = retained mass
        // after trimming each parent to its lexicographically smallest 2^k
        // children (the finer stages are already uniform, so every child of
        // a parent carries equal mass and trimming keeps at least half)
        let mut bucket_mass: BTreeMap<u32, u64> = BTreeMap::new();
        for children in tree.values() {
            let n = children.len() as u64;
            let k = 63 - n.leading_zeros();
            let keep = 1usize << k;
            let retained: u64 = children.values().take(keep).sum();
            *bucket_mass.entry(k).or_insert(0) += retained;
        }
        let (&best_k, _) = bucket_mass
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(b.0)))
            .expect("non-empty");
        // keep parents in the winning bucket, trimmed to 2^best_k children
        let mut kept_children: Vec<Coord> = Vec::new();
        for children in tree.values() {
            let n = children.len() as u64;
            let k = 63 - n.leading_zeros();
            if k != best_k {
                continue;
            }
            kept_children.extend(children.keys().take(1 << k));
        }
        kept_children.sort_unstable();
        survivors.retain(|&c| {
            kept_children
                .binary_search(&ancestor(c, shift_to_child))
                .is_ok()
        });
    }
    let out = DyadicSet::new(p.dim(), p.level(), p.ambient(), survivors)?;
    debug_assert!(matches!(check_uniform(&out, step), Ok(Ok(_))));
    Ok(out)
}

fn rat_parts(e: &Rat) -> (u128, u32) {
    use num_traits::ToPrimitive;
    let p = e.numer().to_u128().expect("epsilon numerator fits u128");
    let q = e.denom().to_u32().expect("epsilon denominator fits u32");
    (p, q)
}

/// Smallest step T0 with log2(2 T0) <= eps * T0, i.e. (2T)^q <= 2^(p T).
pub fn uniformization_step_threshold(eps: &Rat) -> u32 {
    let (p, q) = rat_parts(eps);
    let mut t = 1u32;
    loop {
        let lhs = BigUint::from(2u64 * t as u64).pow(q);
        let rhs = BigUint::one() << (p * t as u128);
        if lhs <= rhs {
            return t;
        }
        t += 1;
        if t > 1 << 20 {
            panic!("eps too small for a practical uniformization step");
        }
    }
}

/// Repeated extraction of uniform subsets until the remainder is at most
/// delta^eps of the original: each extracted subset has at least
/// delta^(2 eps) of the original cells.
pub fn exhaustive_uniformize(p: &DyadicSet, step: u32, eps: &Rat) -> Result<Vec<DyadicSet>> {
    let required = uniformization_step_threshold(eps);
    if step < required {
        return Err(GmtError::StepBelowThreshold {
            step,
            required,
            epsilon: eps.to_string(),
        });
    }
    if p.level().0 % step != 0 || p.level().0 == 0 {
        return Err(GmtError::LevelNotDivisible {
            level: p.level().0,
            step,
        });
    }
    if p.is_empty() {
        return Err(GmtError::EmptySet("exhaustive_uniformize"));
    }
    let total = p.len() as u64;
    let k = p.level().0;
    let mut parts: Vec<DyadicSet> = Vec::new();
    let mut remaining: Vec<Coord> = p.cells().to_vec();
    // loop while |remaining| > delta^eps |P|
    while strict_gt_delta_pow(remaining.len() as u64, total, eps, k) {
        let current = DyadicSet::new(p.dim(), p.level(), p.ambient(), remaining.clone())?;
        let extracted = uniformize(&current, step)?;
        let kept: std::collections::HashSet<Coord> = extracted.cells().iter().copied().collect();
        remaining.retain(|c| !kept.contains(c));
        parts.push(extracted);
    }
    Ok(parts)
}

/// Exact test `x > 2^-(e k) * y`, i.e. x^q 2^(pk) > y^q for e = p/q.
fn strict_gt_delta_pow(x: u64, y: u64, e: &Rat, k: u32) -> bool {
    let (p, q) = rat_parts(e);
    let lhs = BigUint::from(x).pow(q) << (p * k as u128);
    let rhs = BigUint::from(y).pow(q);
    lhs > rhs
}

/// The branching function: beta(j) = log2 |P|_{2^-jT} / T at integer stages,
/// linearly interpolated; non-decreasing and dim-Lipschitz.
pub fn branching_function(u: &UniformStructure) -> Result<PiecewiseAffine> {
    let t = u.step as i64;
    let mut pts = vec![(rat(0, 1), rat(0, 1))];
    let mut acc: i64 = 0;
    for (j, n) in u.counts.iter().enumerate() {
        let lg = log2_exact(*n).expect("uniform counts are powers of two") as i64;
        acc += lg;
        pts.push((rat((j + 1) as i64, 1), rat(acc, t)));
    }
    PiecewiseAffine::new(pts, rat(u.subject.dim() as i64, 1))
}

/// Coarsen to the largest stage grid `2^-mT` not finer than the set's level
/// (the padding reduction for levels not divisible by the step).
pub fn coarsen_to_step_grid(p: &DyadicSet, step: u32) -> Result<DyadicSet> {
    if step == 0 {
        return Err(GmtError::ParameterRange("step must be positive".into()));
    }
    let m = p.level().0 / step;
    if m == 0 {
        return Err(GmtError::ParameterRange(format!(
            "set at level {} is coarser than one stage of step {}",
            p.level().0,
            step
        )));
    }
    p.coarsen(Scale(m * step))
}

/// Inheritance check at an intermediate stage scale: the coarsened set must
/// be a (Delta, s, kappa * C)-set for kappa = 4^dim; returns the verdict and
/// the measured optimal constant.
pub fn intermediate_scale_set_check(
    u: &UniformStructure,
    s: &Rat,
    c: &Rat,
    stage_exp: u32,
) -> Result<(bool, FrostmanCertificate)> {
    if stage_exp == 0 || stage_exp % u.step != 0 || stage_exp > u.subject.level().0 {
        return Err(GmtError::OffStageGrid {
            requested: stage_exp,
            step: u.step,
            stages: u.stages,
        });
    }
    let coarse = u.subject.coarsen(Scale(stage_exp))?;
    let measured = frostman_constant(&coarse, s)?;
    let kappa = rat(4i64.pow(u.subject.dim() as u32), 1);
    let bound = &kappa * c;
    let ok = measured.c.cmp_rational(&bound, s) != std::cmp::Ordering::Greater;
    Ok((ok, measured))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::Ambient;
    use crate::exact::rat_int;

    #[test]
    fn full_grid_is_uniform() {
        let p = DyadicSet::full_grid(2, Scale(4), Ambient::Unit).unwrap();
        let u = check_uniform(&p, 2).unwrap().unwrap();
        assert_eq!(u.counts, vec![16, 16]);
        let beta = branching_function(&u).unwrap();
        // beta(x) = dim * x
        assert_eq!(beta.eval(&rat_int(1)), rat_int(2));
        assert_eq!(beta.eval(&rat(3, 2)), rat_int(3));
    }

    #[test]
    fn fat_thin_children_fail_stage_one() {
        // parent (0,0) has 2 children, parent (1,1) has 1
        let p = DyadicSet::unit(2, Scale(2), vec![[0, 0], [0, 1], [3, 3]]).unwrap();
        let fail = check_uniform(&p, 1).unwrap().unwrap_err();
        match fail {
            UniformFailure::NonConstant { stage, .. } => assert_eq!(stage, 1),
            other => panic!("expected NonConstant, got {other:?}"),
        }
    }

    #[test]
    fn singleton_chain_uniformizes_to_itself() {
        let p = DyadicSet::unit(2, Scale(6), vec![[33, 12]]).unwrap();
        let out = uniformize(&p, 3).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn already_uniform_is_kept_whole() {
        let p = DyadicSet::full_grid(2, Scale(4), Ambient::Unit).unwrap();
        let out = uniformize(&p, 2).unwrap();
        assert_eq!(out.len(), p.len());
    }

    #[test]
    fn branching_function_singleton_chain_is_zero() {
        let p = DyadicSet::unit(2, Scale(6), vec![[5, 9]]).unwrap();
        let u = check_uniform(&p, 2).unwrap().unwrap();
        let beta = branching_function(&u).unwrap();
        assert_eq!(beta.eval(&rat_int(3)), rat_int(0));
    }

    #[test]
    fn exhaustive_uniform_input_single_part() {
        let p = DyadicSet::full_grid(1, Scale(4), Ambient::Unit).unwrap();
        // eps = 2: T0 = 1 works (2T <= 2^(2T) for T=1: 2 <= 4)
        let parts = exhaustive_uniformize(&p, 2, &rat_int(2)).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].len(), p.len());
    }

    #[test]
    fn step_threshold_matches_inequality() {
        // eps = 1: need 2T <= 2^T: T = 2 gives 4 = 4 ok; T = 1 gives 2 = 2 ok
        assert_eq!(uniformization_step_threshold(&rat_int(1)), 1);
        // eps = 1/2: need (2T)^2 <= 2^T: T=8: 256 = 256 ok; T=7: 196 > 128
        assert_eq!(uniformization_step_threshold(&rat(1, 2)), 8);
    }

    #[test]
    fn intermediate_check_full_grid() {
        let p = DyadicSet::full_grid(2, Scale(4), Ambient::Unit).unwrap();
        let u = check_uniform(&p, 2).unwrap().unwrap();
        let (ok, measured) = intermediate_scale_set_check(&u, &rat_int(2), &rat_int(1), 2).unwrap();
        assert!(ok);
        assert_eq!(
            measured.c.cmp_rational(&rat_int(1), &rat_int(2)),
            std::cmp::Ordering::Equal
        );
    }
}
