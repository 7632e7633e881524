//! Dyadic cells and cell families with exact integer arithmetic.
//!
//! A `DyadicSet` is a finite family of half-open dyadic cells
//! `prod [c*2^-k, (c+1)*2^-k)` at a single resolution exponent `k`, in
//! dimension 1 or 2. Everything downstream (covering numbers, Frostman
//! certificates, tube incidences) is built on these. Coordinates are plain
//! signed integers so the tube parameter space `[-1,1) x R` shares the same
//! machinery as the unit box.
//!
//! "Covering number" always means the number of dyadic cells meeting the
//! set, not a ball-covering count; the two differ by a dimensional constant
//! and this crate never mixes the conventions.

use crate::error::{GmtError, Result};
use crate::exact::floor_div;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;

/// Resolution exponent `k`, denoting the scale `delta = 2^-k`.
///
/// Scale comparisons follow the geometric order: a scale is *coarser* than
/// another when its exponent is smaller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scale(pub u32);

impl Scale {
    pub fn is_coarser_or_equal(self, other: Scale) -> bool {
        self.0 <= other.0
    }

    pub fn delta_f64(self) -> f64 {
        (-(self.0 as f64)).exp2()
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "2^-{}", self.0)
    }
}

pub type Coord = [i64; 2];

/// One dyadic cell: dimension, level, and integer corner coordinates.
/// For dim 1 the second coordinate is always 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DyadicCell {
    pub dim: u8,
    pub level: Scale,
    pub coords: Coord,
}

/// Ambient box of a set. `Unit` is `[0,1)^dim`; `Shift1` is the interval
/// `[1,2)` (one-dimensional sets for the sum-product domain, the stored
/// coordinate i denotes the cell `[1 + i*delta, 1 + (i+1)*delta)`);
/// `Param` is the dual-line parameter space with slope in `[-1,1)` and
/// intercept unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ambient {
    Unit,
    #[serde(rename = "unit12")]
    Shift1,
    Param,
}

impl Ambient {
    /// Inclusive-exclusive coordinate bounds per axis at a given level, or
    /// None when the axis is unbounded (the intercept axis of `Param`).
    fn axis_range(self, axis: usize, level: Scale) -> Option<(i64, i64)> {
        let n = 1i64 << level.0;
        match self {
            Ambient::Unit | Ambient::Shift1 => Some((0, n)),
            Ambient::Param => {
                if axis == 0 {
                    Some((-n, n))
                } else {
                    None
                }
            }
        }
    }

    fn contains(self, dim: u8, level: Scale, c: Coord) -> bool {
        (0..dim as usize).all(|ax| match self.axis_range(ax, level) {
            Some((lo, hi)) => c[ax] >= lo && c[ax] < hi,
            None => true,
        })
    }
}

/// A sorted, duplicate-free family of dyadic cells at one resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicSet {
    dim: u8,
    level: Scale,
    ambient: Ambient,
    cells: Vec<Coord>,
}

#[derive(Serialize, Deserialize)]
struct SetFile {
    dim: u8,
    level: u32,
    ambient: Ambient,
    cells: Vec<Vec<i64>>,
}

impl DyadicSet {
    /// Build a set from raw coordinates; sorts and deduplicates.
    pub fn new(dim: u8, level: Scale, ambient: Ambient, mut cells: Vec<Coord>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(GmtError::ParameterRange(format!(
                "dim must be 1 or 2, got {dim}"
            )));
        }
        for c in &cells {
            if dim == 1 && c[1] != 0 {
                return Err(GmtError::Malformed(format!(
                    "1-dimensional cell with nonzero second coordinate: {c:?}"
                )));
            }
            if !ambient.contains(dim, level, *c) {
                return Err(GmtError::ParameterRange(format!(
                    "cell {c:?} outside ambient {ambient:?} at level {level}"
                )));
            }
        }
        cells.sort_unstable();
        cells.dedup();
        Ok(DyadicSet {
            dim,
            level,
            ambient,
            cells,
        })
    }

    pub fn unit(dim: u8, level: Scale, cells: Vec<Coord>) -> Result<Self> {
        Self::new(dim, level, Ambient::Unit, cells)
    }

    /// The full grid on the ambient box (dim 1 or 2, bounded axes only).
    pub fn full_grid(dim: u8, level: Scale, ambient: Ambient) -> Result<Self> {
        let (x0, x1) = ambient
            .axis_range(0, level)
            .expect("axis 0 is always bounded");
        let mut cells = Vec::new();
        if dim == 1 {
            for x in x0..x1 {
                cells.push([x, 0]);
            }
        } else {
            let (y0, y1) = match ambient.axis_range(1, level) {
                Some(r) => r,
                None => {
                    return Err(GmtError::ParameterRange(
                        "full grid on an unbounded axis".into(),
                    ))
                }
            };
            for x in x0..x1 {
                for y in y0..y1 {
                    cells.push([x, y]);
                }
            }
        }
        Self::new(dim, level, ambient, cells)
    }

    pub fn dim(&self) -> u8 {
        self.dim
    }
    pub fn level(&self) -> Scale {
        self.level
    }
    pub fn ambient(&self) -> Ambient {
        self.ambient
    }
    pub fn cells(&self) -> &[Coord] {
        &self.cells
    }
    pub fn len(&self) -> usize {
        self.cells.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_at(&self, idx: usize) -> DyadicCell {
        DyadicCell {
            dim: self.dim,
            level: self.level,
            coords: self.cells[idx],
        }
    }

    pub fn contains(&self, c: &Coord) -> bool {
        self.cells.binary_search(c).is_ok()
    }

    fn ancestor(c: Coord, shift: u32) -> Coord {
        [
            floor_div(c[0] as i128, 1i128 << shift) as i64,
            floor_div(c[1] as i128, 1i128 << shift) as i64,
        ]
    }

    /// Distinct ancestor cells at a coarser scale, as a new set.
    pub fn coarsen(&self, to: Scale) -> Result<DyadicSet> {
        if !to.is_coarser_or_equal(self.level) {
            return Err(GmtError::ScaleFinerThanRepresentation {
                requested: to.0,
                level: self.level.0,
            });
        }
        let shift = self.level.0 - to.0;
        let set: HashSet<Coord> = self
            .cells
            .iter()
            .map(|&c| Self::ancestor(c, shift))
            .collect();
        DyadicSet::new(self.dim, to, self.ambient, set.into_iter().collect())
    }

    /// `|P|_Delta`: number of dyadic cells of side `Delta` meeting the set.
    pub fn covering_number(&self, at: Scale) -> Result<u64> {
        if !at.is_coarser_or_equal(self.level) {
            return Err(GmtError::ScaleFinerThanRepresentation {
                requested: at.0,
                level: self.level.0,
            });
        }
        let shift = self.level.0 - at.0;
        if shift == 0 {
            return Ok(self.cells.len() as u64);
        }
        let set: HashSet<Coord> = self
            .cells
            .iter()
            .map(|&c| Self::ancestor(c, shift))
            .collect();
        Ok(set.len() as u64)
    }

    /// Cells of the set contained in the coarser cell `q`.
    pub fn restrict(&self, q: &DyadicCell) -> Result<DyadicSet> {
        if !q.level.is_coarser_or_equal(self.level) {
            return Err(GmtError::ScaleFinerThanRepresentation {
                requested: q.level.0,
                level: self.level.0,
            });
        }
        if q.dim != self.dim {
            return Err(GmtError::LevelMismatch(format!(
                "restricting a dim-{} set to a dim-{} cell",
                self.dim, q.dim
            )));
        }
        let shift = self.level.0 - q.level.0;
        let kept: Vec<Coord> = self
            .cells
            .iter()
            .copied()
            .filter(|&c| Self::ancestor(c, shift) == q.coords)
            .collect();
        DyadicSet::new(self.dim, self.level, self.ambient, kept)
    }

    /// Homothety sending `q` onto the unit cube, applied to the part of the
    /// set inside `q`. Output level is `level - level(q)`.
    pub fn renormalize(&self, q: &DyadicCell) -> Result<DyadicSet> {
        let inside = self.restrict(q)?;
        if inside.is_empty() {
            return Err(GmtError::EmptyRenormalization);
        }
        let shift = self.level.0 - q.level.0;
        let cells: Vec<Coord> = inside
            .cells
            .iter()
            .map(|&c| [c[0] - (q.coords[0] << shift), c[1] - (q.coords[1] << shift)])
            .collect();
        DyadicSet::new(self.dim, Scale(shift), Ambient::Unit, cells)
    }

    /// Closed one-ring dilation at scale `r` after coarsening: all level-`r`
    /// cells within L-infinity distance one cell of the coarsened set,
    /// clipped at the ambient box.
    pub fn neighborhood(&self, r: Scale) -> Result<DyadicSet> {
        let coarse = self.coarsen(r)?;
        let mut out: HashSet<Coord> = HashSet::new();
        let deltas: &[i64] = if self.dim == 1 { &[0] } else { &[-1, 0, 1] };
        for &c in coarse.cells() {
            for dx in [-1i64, 0, 1] {
                for &dy in deltas {
                    let n = [c[0] + dx, c[1] + dy];
                    if self.ambient.contains(self.dim, r, n) {
                        out.insert(n);
                    }
                }
            }
        }
        DyadicSet::new(self.dim, r, self.ambient, out.into_iter().collect())
    }

    /// Cartesian product of two one-dimensional sets at a common level.
    pub fn product(x: &DyadicSet, y: &DyadicSet) -> Result<DyadicSet> {
        if x.dim != 1 || y.dim != 1 {
            return Err(GmtError::LevelMismatch(
                "product needs 1-dim factors".into(),
            ));
        }
        if x.level != y.level {
            return Err(GmtError::LevelMismatch(format!(
                "product factors at different levels: {} vs {}",
                x.level, y.level
            )));
        }
        let mut cells = Vec::with_capacity(x.len() * y.len());
        for &a in x.cells() {
            for &b in y.cells() {
                cells.push([a[0], b[0]]);
            }
        }
        DyadicSet::new(2, x.level, Ambient::Unit, cells)
    }

    // ---- JSON interchange -------------------------------------------------

    pub fn to_json(&self) -> serde_json::Value {
        let cells: Vec<Vec<i64>> = self
            .cells
            .iter()
            .map(|c| {
                if self.dim == 1 {
                    vec![c[0]]
                } else {
                    vec![c[0], c[1]]
                }
            })
            .collect();
        serde_json::to_value(SetFile {
            dim: self.dim,
            level: self.level.0,
            ambient: self.ambient,
            cells,
        })
        .expect("set serialization cannot fail")
    }

    /// Strict loader: rejects duplicate cells rather than deduplicating.
    pub fn from_json(v: &serde_json::Value) -> Result<DyadicSet> {
        let f: SetFile = serde_json::from_value(v.clone())?;
        let mut cells = Vec::with_capacity(f.cells.len());
        for raw in &f.cells {
            let c: Coord = match (f.dim, raw.len()) {
                (1, 1) => [raw[0], 0],
                (2, 2) => [raw[0], raw[1]],
                _ => {
                    return Err(GmtError::Malformed(format!(
                        "cell arity {} does not match dim {}",
                        raw.len(),
                        f.dim
                    )))
                }
            };
            cells.push(c);
        }
        let mut seen = HashSet::new();
        for c in &cells {
            if !seen.insert(*c) {
                return Err(GmtError::DuplicateCell(format!("{c:?}")));
            }
        }
        DyadicSet::new(f.dim, Scale(f.level), f.ambient, cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(level: u32) -> DyadicSet {
        DyadicSet::full_grid(2, Scale(level), Ambient::Unit).unwrap()
    }

    #[test]
    fn covering_full_grid() {
        let p = grid(3);
        assert_eq!(p.covering_number(Scale(1)).unwrap(), 4);
        assert_eq!(p.covering_number(Scale(3)).unwrap(), 64);
        assert_eq!(p.covering_number(Scale(0)).unwrap(), 1);
    }

    #[test]
    fn covering_single_cell() {
        let p = DyadicSet::unit(2, Scale(8), vec![[200, 13]]).unwrap();
        for d in 0..=8 {
            assert_eq!(p.covering_number(Scale(d)).unwrap(), 1);
        }
    }

    #[test]
    fn covering_rejects_finer_scale() {
        let p = grid(3);
        assert!(matches!(
            p.covering_number(Scale(4)),
            Err(GmtError::ScaleFinerThanRepresentation { .. })
        ));
    }

    #[test]
    fn restrict_full_grid() {
        let p = grid(4);
        let q = DyadicCell {
            dim: 2,
            level: Scale(2),
            coords: [1, 2],
        };
        let r = p.restrict(&q).unwrap();
        assert_eq!(r.len(), 16);
        for c in r.cells() {
            assert!(c[0] >= 4 && c[0] < 8 && c[1] >= 8 && c[1] < 12);
        }
    }

    #[test]
    fn restrict_disjoint_is_empty() {
        let p = DyadicSet::unit(2, Scale(4), vec![[0, 0], [1, 1]]).unwrap();
        let q = DyadicCell {
            dim: 2,
            level: Scale(1),
            coords: [1, 1],
        };
        assert!(p.restrict(&q).unwrap().is_empty());
    }

    #[test]
    fn renormalize_identity_on_unit_cube() {
        let p = DyadicSet::unit(2, Scale(5), vec![[1, 2], [30, 31], [7, 9]]).unwrap();
        let root = DyadicCell {
            dim: 2,
            level: Scale(0),
            coords: [0, 0],
        };
        assert_eq!(p.renormalize(&root).unwrap(), p);
    }

    #[test]
    fn renormalize_single_cell() {
        let p = DyadicSet::unit(2, Scale(8), vec![[100, 200]]).unwrap();
        let q = DyadicCell {
            dim: 2,
            level: Scale(4),
            coords: [100 >> 4, 200 >> 4],
        };
        let r = p.renormalize(&q).unwrap();
        assert_eq!(r.level(), Scale(4));
        assert_eq!(r.len(), 1);
        assert_eq!(r.cells()[0], [100 % 16, 200 % 16]);
    }

    #[test]
    fn renormalize_empty_errors() {
        let p = DyadicSet::unit(2, Scale(4), vec![[0, 0]]).unwrap();
        let q = DyadicCell {
            dim: 2,
            level: Scale(1),
            coords: [1, 1],
        };
        assert!(matches!(
            p.renormalize(&q),
            Err(GmtError::EmptyRenormalization)
        ));
    }

    #[test]
    fn neighborhood_interior_ring() {
        let p = DyadicSet::unit(2, Scale(4), vec![[7, 7]]).unwrap();
        let n = p.neighborhood(Scale(4)).unwrap();
        assert_eq!(n.len(), 9);
        let p1 = DyadicSet::unit(1, Scale(4), vec![[7, 0]]).unwrap();
        assert_eq!(p1.neighborhood(Scale(4)).unwrap().len(), 3);
    }

    #[test]
    fn neighborhood_clipped_at_boundary() {
        let p = DyadicSet::unit(2, Scale(4), vec![[0, 0]]).unwrap();
        let n = p.neighborhood(Scale(4)).unwrap();
        assert_eq!(n.len(), 4);
    }

    #[test]
    fn json_roundtrip_and_duplicate_rejection() {
        let p = DyadicSet::unit(2, Scale(3), vec![[1, 2], [0, 0]]).unwrap();
        let v = p.to_json();
        let q = DyadicSet::from_json(&v).unwrap();
        assert_eq!(p, q);

        let bad = serde_json::json!({
            "dim": 2, "level": 3, "ambient": "unit",
            "cells": [[1,2],[1,2]]
        });
        assert!(matches!(
            DyadicSet::from_json(&bad),
            Err(GmtError::DuplicateCell(_))
        ));
    }

    #[test]
    fn param_ambient_allows_signed_coords() {
        let p = DyadicSet::new(2, Scale(3), Ambient::Param, vec![[-8, -20], [7, 100]]).unwrap();
        assert_eq!(p.covering_number(Scale(0)).unwrap(), 2);
        assert!(DyadicSet::new(2, Scale(3), Ambient::Param, vec![[8, 0]]).is_err());
    }
}
