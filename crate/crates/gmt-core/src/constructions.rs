//! Deterministic, seeded generators for the experiment inputs: stagewise
//! Cantor sets with prescribed branching, seeded subsampling, the
//! sum-product point-line configuration on `(A+B) x (A*C)`, and the
//! grid-with-Farey-slopes extremal configuration scaled and filled down to
//! the working resolution.

use crate::dyadic::{Ambient, Coord, DyadicCell, DyadicSet, Scale};
use crate::error::{GmtError, Result};
use crate::exact::{
    farey, floor_div, pow2_rational_rounded, rat, round_half_even, round_half_up, Rat,
};
use crate::frostman::frostman_constant;
use crate::incidence::{tube_meets_cell, NiceConfiguration, Tube, TubeFamily};
use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

/// Stagewise Cantor construction: at each of `branching.len()` stages every
/// surviving cell keeps `branching[j]` of its `2^(dim*step)` children,
/// chosen by a per-parent seeded draw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CantorSpec {
    pub dim: u8,
    pub step: u32,
    pub branching: Vec<u64>,
    pub seed: u64,
    #[serde(default)]
    pub ambient: Option<Ambient>,
}

fn parent_rng(seed: u64, stage: u32, coords: Coord) -> ChaCha8Rng {
    // independent stream per (seed, stage, parent): stage-parallel
    // generation merges deterministically regardless of schedule
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&stage.to_le_bytes());
    key[12..20].copy_from_slice(&coords[0].to_le_bytes());
    key[20..28].copy_from_slice(&coords[1].to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// `keep` distinct values from `0..n`, by sparse partial Fisher-Yates.
fn sample_distinct(rng: &mut ChaCha8Rng, n: u64, keep: u64) -> Vec<u64> {
    debug_assert!(keep <= n);
    let mut swapped: HashMap<u64, u64> = HashMap::new();
    let mut out = Vec::with_capacity(keep as usize);
    for i in 0..keep {
        let j = rng.gen_range(i..n);
        let vi = swapped.get(&i).copied().unwrap_or(i);
        let vj = swapped.get(&j).copied().unwrap_or(j);
        out.push(vj);
        swapped.insert(j, vi);
    }
    out
}

/// Generate the Cantor set; the output is stage-uniform by construction
/// with exactly the prescribed per-stage counts.
pub fn cantor_set(spec: &CantorSpec) -> Result<DyadicSet> {
    let dim = spec.dim;
    if dim != 1 && dim != 2 {
        return Err(GmtError::ParameterRange("dim must be 1 or 2".into()));
    }
    if spec.step == 0 || spec.step > 16 {
        return Err(GmtError::ParameterRange("step must be in 1..=16".into()));
    }
    let fanout = 1u64 << (dim as u32 * spec.step);
    for (j, n) in spec.branching.iter().enumerate() {
        if *n < 1 || *n > fanout {
            return Err(GmtError::ParameterRange(format!(
                "stage {} branching {} outside 1..={}",
                j + 1,
                n,
                fanout
            )));
        }
    }
    let side = 1i64 << spec.step;
    let mut cells: Vec<Coord> = vec![[0, 0]];
    for (j, keep) in spec.branching.iter().enumerate() {
        let mut next = Vec::with_capacity(cells.len() * *keep as usize);
        for &parent in &cells {
            let mut rng = parent_rng(spec.seed, j as u32 + 1, parent);
            let mut picks = sample_distinct(&mut rng, fanout, *keep);
            picks.sort_unstable();
            for pick in picks {
                let child = if dim == 1 {
                    [parent[0] * side + pick as i64, 0]
                } else {
                    [
                        parent[0] * side + (pick as i64 / side),
                        parent[1] * side + (pick as i64 % side),
                    ]
                };
                next.push(child);
            }
        }
        cells = next;
    }
    let level = Scale(spec.step * spec.branching.len() as u32);
    DyadicSet::new(dim, level, spec.ambient.unwrap_or(Ambient::Unit), cells)
}

/// Deterministic seeded subset holding `max(1, floor(fraction * |P|))` cells.
pub fn random_subsample(p: &DyadicSet, fraction: &Rat, seed: u64) -> Result<DyadicSet> {
    if p.is_empty() {
        return Err(GmtError::EmptySet("random_subsample"));
    }
    if fraction.is_negative() || fraction > &rat(1, 1) {
        return Err(GmtError::ParameterRange(format!(
            "fraction {fraction} outside [0,1]"
        )));
    }
    let n = p.len() as u64;
    let keep = ((fraction * rat(n as i64, 1)).floor().to_integer())
        .to_u64()
        .unwrap_or(0)
        .max(1);
    let mut rng = parent_rng(seed, u32::MAX, [0, 0]);
    let picks = sample_distinct(&mut rng, n, keep.min(n));
    let cells: Vec<Coord> = picks.iter().map(|&i| p.cells()[i as usize]).collect();
    DyadicSet::new(p.dim(), p.level(), p.ambient(), cells)
}

/// One generated incidence of the sum-product configuration: the indices of
/// the factors and the resulting point and line cells.
#[derive(Debug, Clone)]
pub struct ElekesReport {
    /// per line (b,c): number of generating values and number of distinct
    /// point cells after rasterization
    pub per_line: Vec<(u64, u64)>,
    /// every generated point cell lies on its generating line's tube
    pub incidences_exact: bool,
    pub line_count: u64,
}

pub struct ElekesOutput {
    pub config: NiceConfiguration,
    pub report: ElekesReport,
}

/// Points `(a+b, a*c)` for factors in `[1,2)`, with the lines
/// `y = c x - b c`, mapped onto the unit square by the affine change
/// `x' = (x-2)/2, y' = (y-1)/4` (slopes land in `[1/2, 1)`). Every point is
/// carried by the full tube family through it drawn from the line set; the
/// uniform cardinality is the minimum count, trimmed by an index-rotated
/// stride so the union stays spread.
pub fn elekes_config(a: &DyadicSet, b: &DyadicSet, c: &DyadicSet, s: &Rat) -> Result<ElekesOutput> {
    for (name, set) in [("A", a), ("B", b), ("C", c)] {
        if set.is_empty() {
            return Err(GmtError::EmptySet("elekes_config factor"));
        }
        if set.dim() != 1 || set.ambient() != Ambient::Shift1 {
            return Err(GmtError::ParameterRange(format!(
                "{name} must be a 1-dimensional set on the [1,2) ambient"
            )));
        }
        if set.level() != a.level() {
            return Err(GmtError::LevelMismatch(
                "elekes factors need a common level".into(),
            ));
        }
    }
    let k = a.level().0;
    let n = 1i128 << k;
    let pow2k2 = 1i128 << (k + 2);

    // lines first: tube per (b, c), dual cell of y' = (c/2) x' + (c(2-b)-1)/4
    let mut line_tubes: Vec<(Coord, Tube)> = Vec::new();
    for &jb in b.cells() {
        for &lc in c.cells() {
            let j = jb[0] as i128;
            let l = lc[0] as i128;
            let a_cell = floor_div(n + l, 2) as i64;
            let b_num = (n + l) * (n - j) - (n << k); // b' * 2^(2k+2)
            let b_cell = floor_div(b_num, pow2k2) as i64;
            line_tubes.push((
                [jb[0], lc[0]],
                Tube {
                    level: Scale(k),
                    param: [a_cell, b_cell],
                },
            ));
        }
    }

    // points: cells of (A+B) x (A*C) under the affine normalization,
    // tracking which line generated each point for the incidence report
    let mut point_cells: HashSet<Coord> = HashSet::new();
    let mut per_line_cells: HashMap<Coord, HashSet<Coord>> = HashMap::new();
    let mut incidences_exact = true;
    for &ia in a.cells() {
        let i = ia[0] as i128;
        for (line_key, tube) in &line_tubes {
            let j = line_key[0] as i128;
            let l = line_key[1] as i128;
            let x_cell = floor_div(i + j, 2) as i64;
            let y_num = (n + i) * (n + l) - (n << k);
            let y_cell = floor_div(y_num, pow2k2) as i64;
            let cell = [x_cell, y_cell];
            point_cells.insert(cell);
            per_line_cells.entry(*line_key).or_default().insert(cell);
            let dc = DyadicCell {
                dim: 2,
                level: Scale(k),
                coords: cell,
            };
            if !tube_meets_cell(tube, &dc) {
                incidences_exact = false;
            }
        }
    }
    let points = DyadicSet::unit(2, Scale(k), point_cells.into_iter().collect())?;

    // full tube set per point
    let all_tubes: Vec<Tube> = {
        let mut seen = HashSet::new();
        line_tubes
            .iter()
            .filter(|(_, t)| seen.insert(t.param))
            .map(|(_, t)| *t)
            .collect()
    };
    let mut through: Vec<Vec<Coord>> = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        let cell = points.cell_at(i);
        let mut list: Vec<Coord> = all_tubes
            .iter()
            .filter(|t| tube_meets_cell(t, &cell))
            .map(|t| t.param)
            .collect();
        list.sort_unstable();
        through.push(list);
    }
    let m = through.iter().map(|v| v.len()).min().unwrap_or(0) as u64;
    if m == 0 {
        return Err(GmtError::VerificationFailed(
            "a generated point lies on none of the tubes".into(),
        ));
    }
    // index-rotated stride keeps the selected union spread across tubes
    let mut families = Vec::with_capacity(points.len());
    for (i, list) in through.iter().enumerate() {
        let nl = list.len();
        let picks: Vec<Coord> = (0..m as usize)
            .map(|j| list[(i + j * nl / m as usize) % nl])
            .collect();
        families.push(TubeFamily::new(Scale(k), picks));
    }
    let mut cmax = 0.0f64;
    for fam in &families {
        let cert = frostman_constant(&fam.param_set()?, s)?;
        cmax = cmax.max(cert.c_f64());
    }
    let config = NiceConfiguration {
        points,
        families,
        s: s.clone(),
        c: cmax,
        m,
    };
    let per_line: Vec<(u64, u64)> = line_tubes
        .iter()
        .map(|(key, _)| {
            (
                a.len() as u64,
                per_line_cells.get(key).map(|s| s.len() as u64).unwrap_or(0),
            )
        })
        .collect();
    Ok(ElekesOutput {
        config,
        report: ElekesReport {
            per_line,
            incidences_exact,
            line_count: line_tubes.len() as u64,
        },
    })
}

/// Requested parameters of the extremal configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SharpnessSpec {
    pub delta_exp: u32,
    #[serde(with = "crate::exact::serde_rat")]
    pub s: Rat,
    #[serde(with = "crate::exact::serde_rat")]
    pub t: Rat,
    #[serde(with = "crate::exact::serde_rat")]
    pub u: Rat,
}

/// Exact realized quantities after rounding requested exponents onto the
/// dyadic grid; every downstream bound comparison reads these, never the
/// requested reals.
#[derive(Debug, Clone, Serialize)]
pub struct SharpnessLedger {
    pub delta_exp: u32,
    /// coarse scale exponent: Delta = 2^-big_delta_exp, target delta^u
    pub big_delta_exp: u32,
    /// scaling exponent: rho = 2^-rho_exp, chosen so that |P0| is the
    /// smallest even power of two at least delta^-t
    pub rho_exp: u32,
    pub half_exp: u32,
    pub farey_qmax: u32,
    pub slope_interval_count: u64,
    pub run_len: u64,
    pub slope_cell_count: u64,
    pub p0_log2: u32,
    pub realized_t: f64,
    pub realized_u: f64,
    /// measured sum of directed projection counts of the base grid
    pub base_projection_sum: u64,
    /// log2 of the target for that sum: (1/2 + 3s/2) * big_delta_exp
    pub base_projection_target_log2: f64,
    /// declared hard ceiling constant for the base projection sum
    pub base_projection_constant: u64,
    /// min separation of slope-interval left endpoints, in units of the
    /// target separation Delta^s
    pub separation_ratio: f64,
}

pub struct SharpnessOutput {
    pub config: NiceConfiguration,
    pub ledger: SharpnessLedger,
}

fn pow_ge_pow2(a: u64, q: u32, m: u128) -> bool {
    BigUint::from(a).pow(q) >= (BigUint::one() << m)
}

/// Build the configuration: a square grid at scale `Delta^(1/2)` seen at
/// scale `Delta` with slope intervals at Farey fractions (small denominators
/// collapse the directed projections), scaled by `rho` and filled with full
/// branching down to `delta`; per-point tubes take one dual cell per slope
/// interval through the cell center.
pub fn sharpness_config(spec: &SharpnessSpec) -> Result<SharpnessOutput> {
    let k = spec.delta_exp;
    let (s, t, u) = (&spec.s, &spec.t, &spec.u);
    let two = rat(2, 1);
    if !(s > &Rat::zero() && s <= &rat(1, 1)) {
        return Err(GmtError::ParameterRange(format!(
            "need s in (0,1], got {s}"
        )));
    }
    if !(t > &Rat::zero() && t < &two) {
        return Err(GmtError::ParameterRange(format!(
            "need t in (0,2), got {t}"
        )));
    }
    let umax = t.clone().min(&two - t);
    if !(u > &Rat::zero() && u <= &umax) {
        return Err(GmtError::ParameterRange(format!(
            "need u in (0, min(t,2-t)], got {u}"
        )));
    }

    let kq = rat(k as i64, 1);
    let big_delta_exp = round_half_up(&(u * &kq)).max(1) as u32;
    let half_exp = round_half_even(&rat(big_delta_exp as i64, 2)) as u32;
    // |P0| = 2^(2*p0_half) is the smallest even power of two >= delta^-t:
    // the rounding bias never flips sign across a delta-grid, which keeps
    // the fitted exponent clean
    let tk = t * &kq;
    let p0_half = {
        // ceil(tk / 2) for the positive rational tk
        let num = tk.numer().to_i64().expect("t*k numerator fits");
        let den = 2 * tk.denom().to_i64().expect("t*k denominator fits");
        (num + den - 1).div_euclid(den)
    };
    if big_delta_exp as i64 + 1 > k as i64 {
        return Err(GmtError::InfeasibleRealization {
            reason: format!("Delta = 2^-{big_delta_exp} is not coarser than delta = 2^-{k}"),
            suggestion: format!("increase delta_exp above {}", big_delta_exp + 1),
        });
    }
    let rho_signed = half_exp as i64 + k as i64 - big_delta_exp as i64 - p0_half;
    if rho_signed < 0 || k as i64 - big_delta_exp as i64 - rho_signed < 0 {
        return Err(GmtError::InfeasibleRealization {
            reason: format!(
                "no dyadic rho realizes |P0| ~ delta^-t (needs rho_exp = {rho_signed})"
            ),
            suggestion: "use a larger delta_exp or smaller t".into(),
        });
    }
    let rho_exp = rho_signed as u32;
    let fill_exp = k - big_delta_exp - rho_exp;

    // slope intervals: smallest Farey bound with at least Delta^-s fractions
    let (sp, sq) = (
        s.numer().to_u128().expect("s numerator"),
        s.denom().to_u32().expect("s denominator"),
    );
    let target_exp = sp * big_delta_exp as u128;
    let mut qmax = 1u32;
    while !pow_ge_pow2(farey(qmax).len() as u64, sq, target_exp) {
        qmax += 1;
    }
    let fareys = farey(qmax);
    let interval_count = fareys.len() as u64;
    // count sanity: within a factor 4 (plus slack for tiny targets)
    if !BigUint::from(interval_count)
        .pow(sq)
        .le(&((BigUint::one() << target_exp) * BigUint::from(4u64).pow(sq) * 4u32))
    {
        return Err(GmtError::VerificationFailed(format!(
            "slope interval count {interval_count} is not within a factor 4 of the target"
        )));
    }
    let run_len = pow2_rational_rounded(k - big_delta_exp, s).max(1);

    // base grid, one Delta-cell per Delta^(1/2)-square
    let g = 1i64 << (big_delta_exp - half_exp.min(big_delta_exp));
    let nb = 1i64 << half_exp.min(big_delta_exp);
    let base_cells: Vec<Coord> = (0..nb)
        .flat_map(|i| (0..nb).map(move |j| [i * g, j * g]))
        .collect();
    let base = DyadicSet::unit(2, Scale(big_delta_exp), base_cells)?;
    // structural check: exactly one cell per half-scale square
    if base.covering_number(Scale(half_exp.min(big_delta_exp)))? != base.len() as u64 {
        return Err(GmtError::VerificationFailed(
            "base grid does not hit each half-scale square exactly once".into(),
        ));
    }

    // base projection sum over the Farey directions (the collapse that the
    // whole construction depends on), with its hard ceiling
    let mut base_sum = 0u64;
    for &(p, q) in &fareys {
        base_sum += crate::incidence::project_covering(
            &base,
            &rat(p as i64, q as i64),
            Scale(big_delta_exp),
        )?;
    }
    let target_log2 = (0.5 + 1.5 * s.to_f64().unwrap()) * big_delta_exp as f64;
    let base_constant = 16u64;
    // base_sum <= 16 * 2^((q+3p)/(2q) * Dexp) exactly: base_sum^(2q) <= 16^(2q) * 2^((q+3p) Dexp)
    let lhs = BigUint::from(base_sum).pow(2 * sq);
    let rhs = BigUint::from(base_constant).pow(2 * sq)
        * (BigUint::one() << ((sq as u128 + 3 * sp) * big_delta_exp as u128));
    if lhs > rhs {
        return Err(GmtError::VerificationFailed(format!(
            "base projection sum {base_sum} exceeds {base_constant} * 2^{target_log2:.2}"
        )));
    }

    // slope cells at level k: runs of run_len cells at each Farey left end
    let mut slope_cells: Vec<i64> = Vec::new();
    let nk = 1i64 << k;
    let mut min_sep: f64 = f64::INFINITY;
    let mut prev: Option<f64> = None;
    for &(p, q) in &fareys {
        let left = (p as i128) << k;
        let start = floor_div(left, q as i128) as i64;
        for d in 0..run_len as i64 {
            let c = start + d;
            if c < nk {
                slope_cells.push(c);
            }
        }
        let v = p as f64 / q as f64;
        if let Some(pv) = prev {
            min_sep = min_sep.min(v - pv);
        }
        prev = Some(v);
    }
    slope_cells.sort_unstable();
    slope_cells.dedup();
    let separation_target = (-(s.to_f64().unwrap()) * big_delta_exp as f64).exp2();
    let separation_ratio = if fareys.len() > 1 {
        min_sep / separation_target
    } else {
        f64::INFINITY
    };

    // P0: base scaled by rho then filled with full branching to level k
    let fill = 1i64 << fill_exp;
    let stride = g * fill;
    let mut p0_cells: Vec<Coord> = Vec::with_capacity((nb * nb) as usize * (fill * fill) as usize);
    for i in 0..nb {
        for j in 0..nb {
            for di in 0..fill {
                for dj in 0..fill {
                    p0_cells.push([i * stride + di, j * stride + dj]);
                }
            }
        }
    }
    let points = DyadicSet::unit(2, Scale(k), p0_cells)?;
    let p0_log2 = (2 * half_exp.min(big_delta_exp) as u32 + 2 * fill_exp) as u32;
    debug_assert_eq!(points.len() as u64, 1u64 << p0_log2);

    // tubes: per point, the dual cell of the line through the cell center
    // with the slope-cell center
    let mut families = Vec::with_capacity(points.len());
    for idx in 0..points.len() {
        let [px, py] = points.cells()[idx];
        let xc2 = 2 * px as i128 + 1;
        let yc2 = 2 * py as i128 + 1;
        let params: Vec<Coord> = slope_cells
            .iter()
            .map(|&ac| {
                let th2 = 2 * ac as i128 + 1;
                let num = (yc2 << (k + 1)) - th2 * xc2; // b * 2^(2k+2)
                let b_cell = floor_div(num, 1i128 << (k + 2)) as i64;
                [ac, b_cell]
            })
            .collect();
        families.push(TubeFamily::new(Scale(k), params));
    }
    let m = slope_cells.len() as u64;
    let mut cmax = 0.0f64;
    for fam in &families {
        let cert = frostman_constant(&fam.param_set()?, s)?;
        cmax = cmax.max(cert.c_f64());
    }
    let realized_t = p0_log2 as f64 / k as f64;
    let realized_u = big_delta_exp as f64 / k as f64;
    let ledger = SharpnessLedger {
        delta_exp: k,
        big_delta_exp,
        rho_exp,
        half_exp,
        farey_qmax: qmax,
        slope_interval_count: interval_count,
        run_len,
        slope_cell_count: m,
        p0_log2,
        realized_t,
        realized_u,
        base_projection_sum: base_sum,
        base_projection_target_log2: target_log2,
        base_projection_constant: base_constant,
        separation_ratio,
    };
    Ok(SharpnessOutput {
        config: NiceConfiguration {
            points,
            families,
            s: s.clone(),
            c: cmax,
            m,
        },
        ledger,
    })
}
