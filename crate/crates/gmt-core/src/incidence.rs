//! Dyadic tubes under point-line duality, slope sets, rasterization,
//! directed projections, incidence counting, multiplicity numbers and high
//! multiplicity sets, and discretized additive energy.
//!
//! A tube is the union of the lines `y = ax + b` over a dyadic cell of the
//! `(a,b)` parameter space with `a in [-1,1)`. Rasterization is exact: over
//! a grid column the image of the bilinear map `(a,b,x) -> ax+b` is an
//! interval whose endpoints are corner values, so the cells met by a tube
//! come from pure integer interval arithmetic, never sampling.

use crate::dyadic::{Ambient, Coord, DyadicCell, DyadicSet, Scale};
use crate::error::{GmtError, Result};
use crate::exact::{floor_div, Rat};
use crate::frostman::{frostman_constant, FrostmanCertificate};
use num_traits::{Signed, ToPrimitive};
use std::collections::{HashMap, HashSet};

/// A dyadic tube, named by its parameter cell. `param[0]` indexes the slope
/// interval `[a*delta, (a+1)*delta)` with `a in [-2^k, 2^k)`; `param[1]`
/// the intercept interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tube {
    pub level: Scale,
    pub param: Coord,
}

/// A deduplicated family of tubes at a common level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TubeFamily {
    level: Scale,
    params: Vec<Coord>,
}

impl TubeFamily {
    pub fn new(level: Scale, mut params: Vec<Coord>) -> Self {
        params.sort_unstable();
        params.dedup();
        TubeFamily { level, params }
    }

    pub fn level(&self) -> Scale {
        self.level
    }
    pub fn len(&self) -> usize {
        self.params.len()
    }
    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
    pub fn params(&self) -> &[Coord] {
        &self.params
    }
    pub fn tubes(&self) -> impl Iterator<Item = Tube> + '_ {
        self.params.iter().map(move |&param| Tube {
            level: self.level,
            param,
        })
    }

    /// The parameter cells as a dyadic set in the `[-1,1) x R` ambient.
    pub fn param_set(&self) -> Result<DyadicSet> {
        DyadicSet::new(2, self.level, Ambient::Param, self.params.clone())
    }
}

/// Rows `r` (cells `[r*u/den, (r+1)*u/den)`) met by the half-open value
/// interval `[lo/den, hi/den)` where `u = den >> level` divides `den`.
fn value_rows(lo: i128, hi: i128, den: i128, level: u32) -> (i64, i64) {
    debug_assert!(den % (1i128 << level) == 0 && hi > lo);
    let unit = den >> level;
    let r0 = floor_div(lo, unit);
    let r1 = floor_div(hi - 1, unit);
    (r0 as i64, r1 as i64)
}

/// The rows of column `col` (at raster level `level`) met by tube `t`:
/// exact corner evaluation of `a*x + b` over the parameter cell and the
/// column's x-range.
fn tube_rows_in_column(t: &Tube, level: Scale, col: i64) -> (i64, i64) {
    let k = t.level.0;
    let l = level.0;
    let (a0, a1) = (t.param[0] as i128, t.param[0] as i128 + 1);
    let (x0, x1) = (col as i128, col as i128 + 1);
    // values scaled by 2^(k+l); the intercept contributes param[1] * 2^l
    let corners = [a0 * x0, a0 * x1, a1 * x0, a1 * x1];
    let lo = corners.iter().min().unwrap() + ((t.param[1] as i128) << l);
    let hi = corners.iter().max().unwrap() + ((t.param[1] as i128 + 1) << l);
    value_rows(lo, hi, 1i128 << (k + l), l)
}

/// All cells of the unit square at `level` met by the tube.
pub fn tube_cells(t: &Tube, level: Scale) -> Result<DyadicSet> {
    if !t.level.is_coarser_or_equal(level) {
        return Err(GmtError::ScaleFinerThanRepresentation {
            requested: level.0,
            level: t.level.0,
        });
    }
    let n = 1i64 << level.0;
    let mut cells = Vec::new();
    for col in 0..n {
        let (r0, r1) = tube_rows_in_column(t, level, col);
        for row in r0.max(0)..=r1.min(n - 1) {
            cells.push([col, row]);
        }
    }
    DyadicSet::unit(2, level, cells)
}

/// Does the tube meet the given unit-square cell?
pub fn tube_meets_cell(t: &Tube, cell: &DyadicCell) -> bool {
    debug_assert!(t.level.is_coarser_or_equal(cell.level));
    let (r0, r1) = tube_rows_in_column(t, cell.level, cell.coords[0]);
    cell.coords[1] >= r0 && cell.coords[1] <= r1
}

/// Left endpoints of the slope intervals, as a one-dimensional dyadic set
/// over `[-1,1)`.
pub fn slope_set(family: &TubeFamily) -> Result<DyadicSet> {
    let coords: Vec<Coord> = family.params.iter().map(|p| [p[0], 0]).collect();
    DyadicSet::new(1, family.level, Ambient::Param, coords)
}

/// Total number of (cell, tube) incidences: pairs where the tube meets the
/// cell. Bucketing is per tube; per-point bucketing gives the same total.
pub fn incidences(p: &DyadicSet, tubes: &TubeFamily) -> Result<u64> {
    if p.level() != tubes.level() {
        return Err(GmtError::LevelMismatch(format!(
            "incidences needs a common level, got {} vs {}",
            p.level(),
            tubes.level()
        )));
    }
    let cells: HashSet<Coord> = p.cells().iter().copied().collect();
    let mut count = 0u64;
    let n = 1i64 << p.level().0;
    for t in tubes.tubes() {
        for col in 0..n {
            let (r0, r1) = tube_rows_in_column(&t, p.level(), col);
            for row in r0.max(0)..=r1.min(n - 1) {
                if cells.contains(&[col, row]) {
                    count += 1;
                }
            }
        }
    }
    Ok(count)
}

/// A point set together with one tube family per point, all of the same
/// cardinality, plus the non-concentration metadata of the families.
#[derive(Debug, Clone)]
pub struct NiceConfiguration {
    pub points: DyadicSet,
    /// families[i] belongs to points.cells()[i]
    pub families: Vec<TubeFamily>,
    pub s: Rat,
    /// claimed ceiling for every per-point Frostman constant; a float
    /// snapshot of the exact measured max (the certificates stay exact)
    pub c: f64,
    pub m: u64,
}

impl NiceConfiguration {
    pub fn to_json(&self) -> serde_json::Value {
        let families: Vec<serde_json::Value> = self
            .families
            .iter()
            .enumerate()
            .map(|(i, f)| {
                serde_json::json!({
                    "point_index": i,
                    "tubes": f.params().iter().map(|p| vec![p[0], p[1]]).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({
            "points": self.points.to_json(),
            "families": families,
            "s": [self.s.numer().to_string(), self.s.denom().to_string()],
            "C": self.c,
            "M": self.m,
        })
    }
}

#[derive(Debug, Clone)]
pub enum NiceViolation {
    WrongCardinality { point: Coord, got: u64 },
    TubeMissesPoint { point: Coord, tube: Coord },
    ConcentrationAboveC { point: Coord, measured: f64 },
}

#[derive(Debug)]
pub struct NiceCheck {
    pub ok: bool,
    pub violations: Vec<NiceViolation>,
    pub certificates: Vec<FrostmanCertificate>,
}

/// Verify membership, cardinality and the per-point non-concentration of a
/// configuration; violations are reported with witnesses, never panicked.
pub fn check_nice_configuration(cfg: &NiceConfiguration) -> Result<NiceCheck> {
    let mut violations = Vec::new();
    let mut certificates = Vec::new();
    for (i, fam) in cfg.families.iter().enumerate() {
        let point = cfg.points.cells()[i];
        if fam.len() as u64 != cfg.m {
            violations.push(NiceViolation::WrongCardinality {
                point,
                got: fam.len() as u64,
            });
        }
        let cell = cfg.points.cell_at(i);
        for t in fam.tubes() {
            if !tube_meets_cell(&t, &cell) {
                violations.push(NiceViolation::TubeMissesPoint {
                    point,
                    tube: t.param,
                });
            }
        }
        let cert = frostman_constant(&fam.param_set()?, &cfg.s)?;
        let measured = cert.c_f64();
        // the claim is a float snapshot of an exact max; allow one ulp-ish
        if measured > cfg.c * (1.0 + 1e-12) {
            violations.push(NiceViolation::ConcentrationAboveC { point, measured });
        }
        certificates.push(cert);
    }
    Ok(NiceCheck {
        ok: violations.is_empty(),
        violations,
        certificates,
    })
}

/// `|union of the selected families|` by parameter-cell dedup.
pub fn union_tube_count(cfg: &NiceConfiguration) -> u64 {
    let mut seen: HashSet<Coord> = HashSet::new();
    for fam in &cfg.families {
        seen.extend(fam.params().iter().copied());
    }
    seen.len() as u64
}

/// `|pi_theta(P)|_Delta` for `pi_theta(x,y) = x + theta*y`, exact for
/// rational `theta in [0,1]`: each cell contributes the half-open interval
/// of its image and the distinct Delta-intervals are counted.
pub fn project_covering(p: &DyadicSet, theta: &Rat, at: Scale) -> Result<u64> {
    if theta.is_negative() || theta > &Rat::from_integer(1.into()) {
        return Err(GmtError::ParameterRange(format!(
            "direction {theta} outside [0,1]; rotate or reflect first"
        )));
    }
    if p.dim() != 2 {
        return Err(GmtError::ParameterRange(
            "project_covering needs a 2-dimensional set".into(),
        ));
    }
    if !at.is_coarser_or_equal(p.level()) {
        return Err(GmtError::ScaleFinerThanRepresentation {
            requested: at.0,
            level: p.level().0,
        });
    }
    let k = p.level().0;
    let tn = theta.numer().to_i128().expect("theta numerator");
    let td = theta.denom().to_i128().expect("theta denominator");
    // value (x + theta*y) scaled by td * 2^k equals td*X + tn*Y on corners;
    // rows at scale `at` have unit td * 2^(k - at)
    let unit = td << (k - at.0);
    let mut rows: HashSet<i64> = HashSet::new();
    for &c in p.cells() {
        let (x, y) = (c[0] as i128, c[1] as i128);
        let lo = td * x + tn * y;
        let hi = td * (x + 1) + tn * (y + 1);
        let r0 = floor_div(lo, unit);
        let r1 = floor_div(hi - 1, unit);
        for r in r0..=r1 {
            rows.insert(r as i64);
        }
    }
    Ok(rows.len() as u64)
}

/// Multiplicity of `x` in direction `theta` between scales `r` and `cap`:
/// the number of r-cells of the one-ring neighbourhood of `k_set` contained
/// in the closed axis-aligned box of radius `2^-cap` around the center of
/// `x` and whose projected interval contains the projection of the center.
pub fn multiplicity(
    k_set: &DyadicSet,
    theta: &Rat,
    x: &DyadicCell,
    r: Scale,
    cap: Scale,
) -> Result<u64> {
    if !r.is_coarser_or_equal(k_set.level()) {
        return Err(GmtError::ScaleFinerThanRepresentation {
            requested: r.0,
            level: k_set.level().0,
        });
    }
    if !cap.is_coarser_or_equal(r) {
        return Err(GmtError::ParameterRange(format!(
            "need r <= R as scales, got r = {r}, R = {cap}"
        )));
    }
    if theta.is_negative() || theta > &Rat::from_integer(1.into()) {
        return Err(GmtError::ParameterRange(format!(
            "direction {theta} outside [0,1]"
        )));
    }
    let nb = k_set.neighborhood(r)?;
    let kx = x.level.0;
    debug_assert!(r.is_coarser_or_equal(x.level) && cap.0 <= kx + 1);
    // center of x scaled by 2^(kx+1)
    let cx2 = 2 * x.coords[0] as i128 + 1;
    let cy2 = 2 * x.coords[1] as i128 + 1;
    let tn = theta.numer().to_i128().expect("theta numerator");
    let td = theta.denom().to_i128().expect("theta denominator");
    let v = td * cx2 + tn * cy2; // (cx + theta*cy) * td * 2^(kx+1)
    let mut count = 0u64;
    let qs = kx + 1 - r.0; // scale q's level-r coords up to 2^(kx+1)
    let bs = 1i128 << (kx + 1 - cap.0); // box radius at the same scale
    for &q in nb.cells() {
        // containment in the closed box: keeps the count at 1 for an
        // isolated cell at r = R instead of picking up its ring mates
        let inside = |qc: i64, cc: i128| -> bool {
            let lo = (qc as i128) << qs;
            let hi = lo + (1i128 << qs);
            lo >= cc - bs && hi <= cc + bs
        };
        if !inside(q[0], cx2) || !inside(q[1], cy2) {
            continue;
        }
        // projected interval of q, scaled by td * 2^(kx+1)
        let lo = (td * q[0] as i128 + tn * q[1] as i128) << qs;
        let hi = (td * (q[0] as i128 + 1) + tn * (q[1] as i128 + 1)) << qs;
        if lo <= v && v < hi {
            count += 1;
        }
    }
    Ok(count)
}

/// Cells of `k_set` whose multiplicity reaches the threshold.
pub fn high_multiplicity_set(
    k_set: &DyadicSet,
    theta: &Rat,
    threshold: u64,
    r: Scale,
    cap: Scale,
) -> Result<DyadicSet> {
    let mut kept = Vec::new();
    for i in 0..k_set.len() {
        let cell = k_set.cell_at(i);
        if multiplicity(k_set, theta, &cell, r, cap)? >= threshold {
            kept.push(cell.coords);
        }
    }
    DyadicSet::new(k_set.dim(), k_set.level(), k_set.ambient(), kept)
}

/// Discretized additive energy: quadruples with
/// `|(a1+b1) - (a2+b2)| <= delta`, exact via the sumset histogram.
pub fn additive_energy(a: &DyadicSet, b: &DyadicSet) -> Result<u64> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(GmtError::ParameterRange(
            "additive_energy needs 1-dimensional sets".into(),
        ));
    }
    if a.level() != b.level() {
        return Err(GmtError::LevelMismatch(format!(
            "additive_energy needs a common level, got {} vs {}",
            a.level(),
            b.level()
        )));
    }
    let mut hist: HashMap<i64, u64> = HashMap::new();
    for &x in a.cells() {
        for &y in b.cells() {
            *hist.entry(x[0] + y[0]).or_insert(0) += 1;
        }
    }
    let mut total = 0u128;
    for (&k, &n) in &hist {
        let near =
            n + hist.get(&(k - 1)).copied().unwrap_or(0) + hist.get(&(k + 1)).copied().unwrap_or(0);
        total += n as u128 * near as u128;
    }
    total
        .try_into()
        .map_err(|_| GmtError::ParameterRange("additive energy exceeds the u64 range".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{rat, rat_int};

    #[test]
    fn horizontal_tube_is_a_band() {
        // slope cell [0,delta), intercept cell [1/2, 1/2+delta)
        let k = 4u32;
        let t = Tube {
            level: Scale(k),
            param: [0, 1 << (k - 1)],
        };
        let cells = tube_cells(&t, Scale(k)).unwrap();
        // every column holds rows {2^(k-1), 2^(k-1)+1}: y in [1/2, 1/2+2*delta)
        assert_eq!(cells.len(), 2 << k);
        for &c in cells.cells() {
            assert!(c[1] == 1 << (k - 1) || c[1] == (1 << (k - 1)) + 1);
        }
    }

    #[test]
    fn bottom_corner_tube_contains_origin_cell() {
        let k = 5u32;
        let t = Tube {
            level: Scale(k),
            param: [0, 0],
        };
        let cells = tube_cells(&t, Scale(k)).unwrap();
        assert!(cells.contains(&[0, 0]));
        // near x = 0 the band is y in [0, delta + x*delta)
        let (r0, r1) = tube_rows_in_column(&t, Scale(k), 0);
        assert_eq!((r0, r1), (0, 1));
    }

    #[test]
    fn incidences_unit_grid_one_tube() {
        let k = 4u32;
        let p = DyadicSet::full_grid(2, Scale(k), Ambient::Unit).unwrap();
        let fam = TubeFamily::new(Scale(k), vec![[0, 1 << (k - 1)]]);
        // the band has two rows per column
        assert_eq!(incidences(&p, &fam).unwrap(), 2 << k);
        let empty = TubeFamily::new(Scale(k), vec![]);
        assert_eq!(incidences(&p, &empty).unwrap(), 0);
    }

    #[test]
    fn project_theta_zero_is_x_covering() {
        let a = DyadicSet::unit(1, Scale(5), vec![[3, 0], [17, 0], [18, 0]]).unwrap();
        let b = DyadicSet::unit(1, Scale(5), vec![[4, 0], [9, 0]]).unwrap();
        let p = DyadicSet::product(&a, &b).unwrap();
        for d in 0..=5u32 {
            assert_eq!(
                project_covering(&p, &rat_int(0), Scale(d)).unwrap(),
                a.covering_number(Scale(d)).unwrap()
            );
        }
    }

    #[test]
    fn project_single_cell_straddle() {
        let p = DyadicSet::unit(2, Scale(3), vec![[3, 3]]).unwrap();
        // theta = 1: image [6/8, 8/8) -> cells 6 and 7
        assert_eq!(project_covering(&p, &rat_int(1), Scale(3)).unwrap(), 2);
        // theta = 0: a single cell
        assert_eq!(project_covering(&p, &rat_int(0), Scale(3)).unwrap(), 1);
        assert!(project_covering(&p, &rat(3, 2), Scale(3)).is_err());
    }

    #[test]
    fn multiplicity_fiber_of_product() {
        let k = 5u32;
        let a = DyadicSet::unit(1, Scale(k), vec![[4, 0], [12, 0], [20, 0]]).unwrap();
        let b = DyadicSet::unit(1, Scale(k), vec![[7, 0], [9, 0], [24, 0]]).unwrap();
        let p = DyadicSet::product(&a, &b).unwrap();
        let x = DyadicCell {
            dim: 2,
            level: Scale(k),
            coords: [12, 9],
        };
        for r in [3u32, 4, 5] {
            let m = multiplicity(&p, &rat_int(0), &x, Scale(r), Scale(0)).unwrap();
            // vertical fiber through the center of x: the one-ring of B
            let fiber = b.neighborhood(Scale(r)).unwrap().len() as u64;
            assert_eq!(m, fiber);
        }
    }

    #[test]
    fn multiplicity_isolated_cell_is_one() {
        let p = DyadicSet::unit(2, Scale(4), vec![[3, 3], [12, 13]]).unwrap();
        let x = DyadicCell {
            dim: 2,
            level: Scale(4),
            coords: [3, 3],
        };
        let m = multiplicity(&p, &rat_int(0), &x, Scale(4), Scale(4)).unwrap();
        assert_eq!(m, 1);
    }

    #[test]
    fn high_multiplicity_thresholds() {
        let p = DyadicSet::unit(2, Scale(3), vec![[1, 1], [1, 5], [6, 2]]).unwrap();
        let all = high_multiplicity_set(&p, &rat_int(0), 1, Scale(3), Scale(0)).unwrap();
        assert_eq!(all.len(), p.len());
        let none = high_multiplicity_set(&p, &rat_int(0), 1000, Scale(3), Scale(0)).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn additive_energy_small_cases() {
        let a = DyadicSet::unit(1, Scale(4), vec![[3, 0]]).unwrap();
        let b = DyadicSet::unit(1, Scale(4), vec![[9, 0]]).unwrap();
        assert_eq!(additive_energy(&a, &b).unwrap(), 1);

        // B singleton: energy = near-diagonal pairs of A, at most 3|A|
        let a2 = DyadicSet::unit(1, Scale(4), vec![[0, 0], [1, 0], [7, 0]]).unwrap();
        let e = additive_energy(&a2, &b).unwrap();
        assert_eq!(e, 5); // (0,0),(1,1),(7,7),(0,1),(1,0)
        assert!(e <= 3 * a2.len() as u64);
    }

    #[test]
    fn slope_set_of_fan() {
        let k = 3u32;
        let fam = TubeFamily::new(Scale(k), vec![[0, 1], [1, 1], [0, 2], [-3, 5]]);
        let slopes = slope_set(&fam).unwrap();
        assert_eq!(slopes.len(), 3); // slopes 0, 1, -3
    }
}
