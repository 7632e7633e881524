//! Closed-form exponent calculators and the two small vertex-enumeration
//! optimizations they rest on, all in exact rational arithmetic.

use crate::error::{GmtError, Result};
use crate::exact::{rat, rat_int, Rat};
use num_traits::Zero;

fn check_range(cond: bool, msg: String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(GmtError::ParameterRange(msg))
    }
}

/// Conjectured planar bound: min{ s+t, (3s+t)/2, s+1 }.
pub fn furstenberg_conjecture(s: &Rat, t: &Rat) -> Result<Rat> {
    check_range(
        s >= &Rat::zero() && s <= &rat_int(1),
        format!("need s in [0,1], got {s}"),
    )?;
    check_range(
        t >= s && t <= &rat_int(2),
        format!("need t in [s,2], got {t}"),
    )?;
    let a = s + t;
    let b = (rat_int(3) * s + t) / rat_int(2);
    let c = s + rat_int(1);
    Ok(a.min(b).min(c))
}

/// The proved general bound: the tube-count exponent
/// `gamma(t,s) = t/2 + max{t, 2-t}/(2-s) * s/2` and the dimension bound
/// `s + gamma(t,s)`.
pub struct FurstenbergGeneral {
    pub gamma: Rat,
    pub dimension_bound: Rat,
}

pub fn furstenberg_general(s: &Rat, t: &Rat) -> Result<FurstenbergGeneral> {
    check_range(
        s > &Rat::zero() && s < &rat_int(1),
        format!("need s in (0,1), got {s}"),
    )?;
    check_range(
        t >= s && t <= &(rat_int(2) - s),
        format!("need t in [s, 2-s], got {t}"),
    )?;
    let two = rat_int(2);
    let hi = t.clone().max(&two - t);
    let gamma = t / &two + hi / (&two - s) * s / &two;
    let dimension_bound = s + &gamma;
    Ok(FurstenbergGeneral {
        gamma,
        dimension_bound,
    })
}

/// Elementary baseline: min{ t/2 + s, 2s }.
pub fn furstenberg_baseline(s: &Rat, t: &Rat) -> Rat {
    let a = t / rat_int(2) + s;
    let b = rat_int(2) * s;
    a.min(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionRegime {
    /// equal Hausdorff and packing dimension: max{2u - t, 0}
    Regular,
    /// general Borel, t <= 1: max{(2u-t)/(u+1-t), 0}
    BorelLow,
    /// general Borel, t >= 1: max{2 - t/u, 0}
    BorelHigh,
}

/// Exceptional-set dimension bound for orthogonal projections.
pub fn projection_exceptional(t: &Rat, u: &Rat, regime: ProjectionRegime) -> Result<Rat> {
    let zero = Rat::zero();
    let one = rat_int(1);
    match regime {
        ProjectionRegime::Regular => {
            check_range(
                u > &zero && t > &zero && u <= &t.clone().min(one.clone()) && t <= &rat_int(2),
                format!("regular regime needs 0 < u <= min(t,1), t <= 2, got t={t}, u={u}"),
            )?;
            Ok((rat_int(2) * u - t).max(zero))
        }
        ProjectionRegime::BorelLow => {
            check_range(
                u > &zero && u <= t && t <= &one,
                format!("low regime needs 0 < u <= t <= 1, got t={t}, u={u}"),
            )?;
            Ok(((rat_int(2) * u - t) / (u + &one - t)).max(zero))
        }
        ProjectionRegime::BorelHigh => {
            check_range(
                u > &zero && u <= &one && t >= &one && t <= &rat_int(2),
                format!("high regime needs 0 < u <= 1 <= t <= 2, got t={t}, u={u}"),
            )?;
            Ok((rat_int(2) - t / u).max(zero))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumProductVariant {
    General,
    Regular,
}

/// Growth exponent for max{|A+A|, |A*A|}: the general value
/// `1 + max{s, 1-s} / (2(2-s))`, upgraded to 5/4 in the regular case.
pub fn sumproduct_exponent(s: &Rat, variant: SumProductVariant) -> Result<Rat> {
    check_range(
        s > &Rat::zero() && s < &rat(2, 3),
        format!("need s in (0, 2/3), got {s}"),
    )?;
    match variant {
        SumProductVariant::Regular => Ok(rat(5, 4)),
        SumProductVariant::General => {
            let one = rat_int(1);
            let hi = s.clone().max(&one - s);
            Ok(&one + &(hi / (rat_int(2) * (rat_int(2) - s))))
        }
    }
}

/// Tube-count exponent under the single-scale non-concentration hypothesis:
/// `t/2 + s u/4`, or the sharp target `t/2 + s u/2`.
pub fn minimal_nonconcentration_exponent(s: &Rat, t: &Rat, u: &Rat, sharp: bool) -> Result<Rat> {
    check_range(
        s > &Rat::zero() && s <= &rat_int(1),
        format!("need s in (0,1], got {s}"),
    )?;
    check_range(
        t > &Rat::zero() && t < &rat_int(2),
        format!("need t in (0,2), got {t}"),
    )?;
    let umax = t.clone().min(rat_int(2) - t);
    check_range(
        u > &Rat::zero() && u <= &umax,
        format!("need u in (0, min(t,2-t)], got {u}"),
    )?;
    let denom = if sharp { rat_int(2) } else { rat_int(4) };
    Ok(t / rat_int(2) + s * u / denom)
}

/// Half-plane `a*x + b*y <= c`.
#[derive(Debug, Clone)]
struct HalfPlane {
    a: Rat,
    b: Rat,
    c: Rat,
}

impl HalfPlane {
    fn holds(&self, x: &Rat, y: &Rat) -> bool {
        &self.a * x + &self.b * y <= self.c
    }
}

/// Minimize a linear objective over an intersection of half-planes by
/// enumerating pairwise constraint intersections: exact rationals,
/// feasibility filtering, ties reported rather than silently broken.
fn vertex_minimize(
    constraints: &[HalfPlane],
    objective: impl Fn(&Rat, &Rat) -> Rat,
) -> Result<(Rat, Vec<(Rat, Rat)>)> {
    let mut best: Option<Rat> = None;
    let mut argmin: Vec<(Rat, Rat)> = Vec::new();
    for i in 0..constraints.len() {
        for j in i + 1..constraints.len() {
            let (p, q) = (&constraints[i], &constraints[j]);
            let det = &p.a * &q.b - &q.a * &p.b;
            if det.is_zero() {
                continue;
            }
            let x = (&p.c * &q.b - &q.c * &p.b) / &det;
            let y = (&p.a * &q.c - &q.a * &p.c) / &det;
            if !constraints.iter().all(|h| h.holds(&x, &y)) {
                continue;
            }
            let v = objective(&x, &y);
            match &best {
                Some(b) if &v > b => {}
                Some(b) if &v == b => {
                    if !argmin.contains(&(x.clone(), y.clone())) {
                        argmin.push((x, y));
                    }
                }
                _ => {
                    best = Some(v);
                    argmin = vec![(x, y)];
                }
            }
        }
    }
    match best {
        Some(b) => Ok((b, argmin)),
        None => Err(GmtError::EmptyPolygon),
    }
}

/// Result of a polygon optimization: exact minimum, attaining vertices, and
/// the declared constant instantiating the slack terms.
#[derive(Debug, Clone)]
pub struct PolygonMin {
    pub minimum: Rat,
    pub vertices: Vec<(Rat, Rat)>,
    /// the eta slack enters the constraints as kappa * eta
    pub kappa: Rat,
}

/// Minimize `f(a,h) = (1-a) + a s/2 + h/2` over
/// `{a in [0,1], h in [s a, (2-s) a], tbar - h in [(2-s)(1-a-kappa eta), 2(1-a)]}`.
pub fn lp_min_polygon_k(s: &Rat, tbar: &Rat, eta: &Rat) -> Result<PolygonMin> {
    check_range(
        s > &Rat::zero() && s < &rat_int(1),
        format!("need s in (0,1), got {s}"),
    )?;
    check_range(
        tbar > s && tbar <= &rat_int(2),
        format!("need tbar in (s, 2], got {tbar}"),
    )?;
    check_range(eta >= &Rat::zero(), format!("need eta >= 0, got {eta}"))?;
    let kappa = rat_int(1);
    let two = rat_int(2);
    let constraints = vec![
        HalfPlane {
            a: rat_int(-1),
            b: Rat::zero(),
            c: Rat::zero(),
        },
        HalfPlane {
            a: rat_int(1),
            b: Rat::zero(),
            c: rat_int(1),
        },
        // h >= s a
        HalfPlane {
            a: s.clone(),
            b: rat_int(-1),
            c: Rat::zero(),
        },
        // h <= (2-s) a
        HalfPlane {
            a: -(&two - s),
            b: rat_int(1),
            c: Rat::zero(),
        },
        // tbar - h >= (2-s)(1 - a - kappa eta)  <=>  -(2-s)a + h <= tbar - (2-s)(1 - kappa eta)
        HalfPlane {
            a: -(&two - s),
            b: rat_int(1),
            c: tbar - &((&two - s) * (rat_int(1) - &kappa * eta)),
        },
        // tbar - h <= 2(1-a)  <=>  2a - h <= 2 - tbar
        HalfPlane {
            a: rat_int(2),
            b: rat_int(-1),
            c: &two - tbar,
        },
    ];
    let half = rat(1, 2);
    let (minimum, vertices) = vertex_minimize(&constraints, |a, h| {
        rat_int(1) - a + a * s * &half + h * &half
    })?;
    // floor from the four vertex cases: gamma(tbar, s) - kappa' eta
    let gamma = tbar / &two + (&two - tbar).max(tbar.clone()) / (&two - s) * s / &two;
    let kappa_prime = rat_int(3);
    assert!(
        minimum >= gamma - &kappa_prime * eta,
        "polygon minimum fell below the vertex-case floor"
    );
    Ok(PolygonMin {
        minimum,
        vertices,
        kappa,
    })
}

/// Minimize `g(b,h) = (t-h) + (b s + h)/2` over
/// `{b in [0,1], h in [b s, b(2-s)], t - h in [-eta, s(1-b) + kappa eta]}`.
pub fn lp_min_polygon_l(s: &Rat, t: &Rat, eta: &Rat) -> Result<PolygonMin> {
    check_range(
        s > &Rat::zero() && s < &rat_int(1),
        format!("need s in (0,1), got {s}"),
    )?;
    check_range(
        t > &rat_int(1) && t < &(rat_int(2) - s),
        format!("need t in (1, 2-s), got {t}"),
    )?;
    check_range(eta >= &Rat::zero(), format!("need eta >= 0, got {eta}"))?;
    let kappa = rat_int(1);
    let two = rat_int(2);
    let constraints = vec![
        HalfPlane {
            a: rat_int(-1),
            b: Rat::zero(),
            c: Rat::zero(),
        },
        HalfPlane {
            a: rat_int(1),
            b: Rat::zero(),
            c: rat_int(1),
        },
        // h >= b s
        HalfPlane {
            a: s.clone(),
            b: rat_int(-1),
            c: Rat::zero(),
        },
        // h <= b (2-s)
        HalfPlane {
            a: -(&two - s),
            b: rat_int(1),
            c: Rat::zero(),
        },
        // h <= t + eta
        HalfPlane {
            a: Rat::zero(),
            b: rat_int(1),
            c: t + eta,
        },
        // t - h <= s(1-b) + kappa eta  <=>  s b - h <= s - t + kappa eta
        HalfPlane {
            a: s.clone(),
            b: rat_int(-1),
            c: s - t + &kappa * eta,
        },
    ];
    let half = rat(1, 2);
    let (minimum, vertices) = vertex_minimize(&constraints, |b, h| t - h + (b * s + h) * &half)?;
    let floor = t / (&two - s);
    let kappa_prime = rat_int(3);
    assert!(
        minimum >= floor - &kappa_prime * eta,
        "polygon minimum fell below t/(2-s) - O(eta)"
    );
    Ok(PolygonMin {
        minimum,
        vertices,
        kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjecture_values() {
        assert_eq!(
            furstenberg_conjecture(&rat(1, 2), &rat_int(1)).unwrap(),
            rat(5, 4)
        );
        assert_eq!(
            furstenberg_conjecture(&Rat::zero(), &Rat::zero()).unwrap(),
            Rat::zero()
        );
        assert_eq!(
            furstenberg_conjecture(&rat_int(1), &rat_int(1)).unwrap(),
            rat_int(2)
        );
    }

    #[test]
    fn general_bound_values() {
        let g = furstenberg_general(&rat(1, 2), &rat_int(1)).unwrap();
        assert_eq!(g.gamma, rat(2, 3));
        assert_eq!(g.dimension_bound, rat(7, 6));
    }

    #[test]
    fn projection_values() {
        assert_eq!(
            projection_exceptional(&rat_int(1), &rat(1, 2), ProjectionRegime::Regular).unwrap(),
            Rat::zero()
        );
        assert_eq!(
            projection_exceptional(&rat_int(1), &rat(3, 4), ProjectionRegime::BorelLow).unwrap(),
            rat(2, 3)
        );
        assert_eq!(
            projection_exceptional(&rat(3, 2), &rat(3, 4), ProjectionRegime::BorelHigh).unwrap(),
            Rat::zero()
        );
        assert!(
            projection_exceptional(&rat(1, 2), &rat(3, 4), ProjectionRegime::BorelLow).is_err()
        );
    }

    #[test]
    fn sumproduct_values() {
        assert_eq!(
            sumproduct_exponent(&rat(1, 2), SumProductVariant::General).unwrap(),
            rat(7, 6)
        );
        assert_eq!(
            sumproduct_exponent(&rat(1, 2), SumProductVariant::Regular).unwrap(),
            rat(5, 4)
        );
        assert!(sumproduct_exponent(&rat(2, 3), SumProductVariant::General).is_err());
    }

    #[test]
    fn minimal_nonconcentration_values() {
        let v =
            minimal_nonconcentration_exponent(&rat(1, 2), &rat_int(1), &rat(1, 2), false).unwrap();
        assert_eq!(v, rat(9, 16));
        let sharp =
            minimal_nonconcentration_exponent(&rat(1, 2), &rat_int(1), &rat(1, 2), true).unwrap();
        assert_eq!(sharp, rat(5, 8));
        assert!(sharp >= v);
    }

    #[test]
    fn polygon_k_pinned_value() {
        let m = lp_min_polygon_k(&rat(1, 2), &rat_int(1), &Rat::zero()).unwrap();
        assert_eq!(m.minimum, rat(2, 3));
        // attained on the h = tbar - 2(1-a) boundary at a = 2/3, h = 1/3
        assert!(m.vertices.contains(&(rat(2, 3), rat(1, 3))));
    }

    #[test]
    fn polygon_k_degenerate_tbar_near_s() {
        // tbar just above s forces the h = s a edge to carry the minimum
        let m = lp_min_polygon_k(&rat(1, 2), &rat(51, 100), &Rat::zero()).unwrap();
        let gamma = furstenberg_general(&rat(1, 2), &rat(51, 100))
            .unwrap()
            .gamma;
        assert!(m.minimum >= gamma);
    }

    #[test]
    fn polygon_l_pinned_value() {
        let m = lp_min_polygon_l(&rat(1, 2), &rat(5, 4), &Rat::zero()).unwrap();
        assert_eq!(m.minimum, rat(5, 6));
    }

    #[test]
    fn polygon_l_case_i_gives_t() {
        // on the h = b s edge the objective equals t exactly
        let s = rat(1, 2);
        let t = rat(5, 4);
        let b = rat(1, 2);
        let h = &b * &s;
        let g = &t - &h + (&b * &s + &h) / rat_int(2);
        assert_eq!(g, t);
    }

    #[test]
    fn empty_polygon_errors() {
        let bad = vertex_minimize(
            &[
                HalfPlane {
                    a: rat_int(1),
                    b: Rat::zero(),
                    c: rat_int(-1),
                },
                HalfPlane {
                    a: rat_int(-1),
                    b: Rat::zero(),
                    c: Rat::zero(),
                },
                HalfPlane {
                    a: Rat::zero(),
                    b: rat_int(1),
                    c: rat_int(1),
                },
                HalfPlane {
                    a: Rat::zero(),
                    b: rat_int(-1),
                    c: Rat::zero(),
                },
            ],
            |a, _| a.clone(),
        );
        assert!(matches!(bad, Err(GmtError::EmptyPolygon)));
    }
}
