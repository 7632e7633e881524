//! Piecewise-affine functions over exact rationals and the constructive
//! interval decompositions used on branching functions: splitting into
//! near-affine pieces, the two slope-constrained variants (lower slope
//! floor s, upper slope ceiling 2-s), the increasing-slope weak
//! decomposition, and the superlinear tail point.
//!
//! Everything is exact: secant comparisons, root finding for the cut points
//! where a running secant first equals the target slope, and all the
//! self-certification checks run in rational arithmetic with no tolerance.

use crate::error::{GmtError, Result};
use crate::exact::{rat, rat_int, Rat};
use num_traits::{Signed, Zero};

/// Continuous piecewise-affine function given by strictly increasing
/// rational breakpoints and values; evaluation is linear interpolation.
/// Carries its own Lipschitz bound, validated at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseAffine {
    xs: Vec<Rat>,
    ys: Vec<Rat>,
    lip: Rat,
}

impl PiecewiseAffine {
    pub fn new(points: Vec<(Rat, Rat)>, lip: Rat) -> Result<Self> {
        if points.len() < 2 {
            return Err(GmtError::Malformed(
                "piecewise-affine function needs at least two breakpoints".into(),
            ));
        }
        let (xs, ys): (Vec<Rat>, Vec<Rat>) = points.into_iter().unzip();
        for w in xs.windows(2) {
            if w[0] >= w[1] {
                return Err(GmtError::Malformed(
                    "breakpoints must be strictly increasing".into(),
                ));
            }
        }
        let f = PiecewiseAffine { xs, ys, lip };
        for i in 0..f.xs.len() - 1 {
            let dy = (&f.ys[i + 1] - &f.ys[i]).abs();
            let dx = &f.xs[i + 1] - &f.xs[i];
            if dy > &f.lip * &dx {
                return Err(GmtError::Malformed(format!(
                    "segment {i} violates the {}-Lipschitz bound",
                    f.lip
                )));
            }
        }
        Ok(f)
    }

    /// Build from a start value and a run of (length, slope) segments.
    pub fn from_segments(x0: Rat, y0: Rat, segments: &[(Rat, Rat)], lip: Rat) -> Result<Self> {
        let mut pts = vec![(x0.clone(), y0.clone())];
        let (mut x, mut y) = (x0, y0);
        for (len, slope) in segments {
            x = &x + len;
            y = &y + &(len * slope);
            pts.push((x.clone(), y.clone()));
        }
        Self::new(pts, lip)
    }

    pub fn domain(&self) -> (&Rat, &Rat) {
        (self.xs.first().unwrap(), self.xs.last().unwrap())
    }

    pub fn lipschitz_bound(&self) -> &Rat {
        &self.lip
    }

    pub fn breakpoints(&self) -> &[Rat] {
        &self.xs
    }

    pub fn values(&self) -> &[Rat] {
        &self.ys
    }

    pub fn eval(&self, x: &Rat) -> Rat {
        debug_assert!(x >= self.xs.first().unwrap() && x <= self.xs.last().unwrap());
        let i = match self.xs.binary_search_by(|p| p.cmp(x)) {
            Ok(i) => return self.ys[i].clone(),
            Err(i) => i - 1,
        };
        let t = (x - &self.xs[i]) / (&self.xs[i + 1] - &self.xs[i]);
        &self.ys[i] + &(&t * &(&self.ys[i + 1] - &self.ys[i]))
    }

    /// Secant slope over [a,b].
    pub fn slope(&self, a: &Rat, b: &Rat) -> Result<Rat> {
        if a >= b {
            return Err(GmtError::ParameterRange(format!(
                "slope needs a < b, got [{a}, {b}]"
            )));
        }
        Ok((self.eval(b) - self.eval(a)) / (b - a))
    }

    /// Interior breakpoints strictly inside (a,b).
    fn interior(&self, a: &Rat, b: &Rat) -> Vec<usize> {
        (0..self.xs.len())
            .filter(|&i| &self.xs[i] > a && &self.xs[i] < b)
            .collect()
    }

    /// Serialize as a breakpoint list with num/den pairs.
    pub fn to_json(&self) -> serde_json::Value {
        let pts: Vec<serde_json::Value> = self
            .xs
            .iter()
            .zip(&self.ys)
            .map(|(x, y)| {
                serde_json::json!([
                    [x.numer().to_string(), x.denom().to_string()],
                    [y.numer().to_string(), y.denom().to_string()]
                ])
            })
            .collect();
        serde_json::json!(pts)
    }
}

/// `(f,a,b)` lies above the line of slope `sigma` through `(a, f(a))`, with
/// an additive allowance of `eps*(b-a)`: checked at `a`, `b`, and all
/// interior breakpoints, which is sufficient by piecewise affinity.
pub fn is_superlinear(f: &PiecewiseAffine, a: &Rat, b: &Rat, sigma: &Rat, eps: &Rat) -> bool {
    debug_assert!(a < b);
    let fa = f.eval(a);
    let allowance = eps * &(b - a);
    let ok = |x: &Rat| -> bool { f.eval(x) >= &fa + &(sigma * &(x - a)) - &allowance };
    if !ok(a) || !ok(b) {
        return false;
    }
    f.interior(a, b).into_iter().all(|i| ok(&f.xs[i].clone()))
}

/// `(f,a,b)` stays within `eps*(b-a)` of its own secant line.
pub fn is_linear(f: &PiecewiseAffine, a: &Rat, b: &Rat, eps: &Rat) -> bool {
    let secant = match f.slope(a, b) {
        Ok(s) => s,
        Err(_) => return false,
    };
    let fa = f.eval(a);
    let allowance = eps * &(b - a);
    let within = |x: &Rat| -> bool {
        let line = &fa + &(&secant * &(x - a));
        (f.eval(x) - line).abs() <= allowance
    };
    within(a)
        && within(b)
        && f.interior(a, b)
            .into_iter()
            .all(|i| within(&f.xs[i].clone()))
}

#[derive(Debug, Clone)]
pub struct DecompositionPiece {
    pub a: Rat,
    pub b: Rat,
    pub kind: Kind,
    pub epsilon: Rat,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    EpsLinear { slope: Rat },
    EpsSuperlinear { slope: Rat },
}

impl DecompositionPiece {
    /// Re-verify the stored claim against the function, exactly.
    pub fn verify(&self, f: &PiecewiseAffine) -> bool {
        match &self.kind {
            Kind::EpsLinear { slope } => {
                f.slope(&self.a, &self.b)
                    .map(|s| &s == slope)
                    .unwrap_or(false)
                    && is_linear(f, &self.a, &self.b, &self.epsilon)
            }
            Kind::EpsSuperlinear { slope } => {
                f.slope(&self.a, &self.b)
                    .map(|s| &s == slope)
                    .unwrap_or(false)
                    && is_superlinear(f, &self.a, &self.b, slope, &self.epsilon)
            }
        }
    }

    pub fn len(&self) -> Rat {
        &self.b - &self.a
    }

    pub fn to_json(&self) -> serde_json::Value {
        let ratpair = |r: &Rat| serde_json::json!([r.numer().to_string(), r.denom().to_string()]);
        let (kind, slope) = match &self.kind {
            Kind::EpsLinear { slope } => ("eps_linear", slope),
            Kind::EpsSuperlinear { slope } => ("eps_superlinear", slope),
        };
        serde_json::json!({
            "interval": [ratpair(&self.a), ratpair(&self.b)],
            "kind": kind,
            "slope": ratpair(slope),
            "epsilon": ratpair(&self.epsilon),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub pieces: Vec<DecompositionPiece>,
    /// min piece length divided by the domain length
    pub tau: Rat,
    /// domain measure not covered by pieces
    pub leftover: Rat,
    /// declared ceiling: leftover <= leftover_constant * eps * m
    pub leftover_constant: Rat,
    pub epsilon: Rat,
}

impl Decomposition {
    fn finish(mut pieces: Vec<DecompositionPiece>, domain: Rat, eps: Rat, k: Rat) -> Self {
        pieces.sort_by(|p, q| p.a.cmp(&q.a));
        let covered: Rat = pieces.iter().map(|p| p.len()).sum();
        let leftover = &domain - &covered;
        let tau = pieces
            .iter()
            .map(|p| p.len())
            .min()
            .map(|l| l / &domain)
            .unwrap_or_else(Rat::zero);
        Decomposition {
            pieces,
            tau,
            leftover,
            leftover_constant: k,
            epsilon: eps,
        }
    }

    /// Every piece re-verifies, pieces are disjoint, lengths meet tau, and
    /// the leftover respects the declared constant.
    pub fn verify(&self, f: &PiecewiseAffine) -> Result<()> {
        let (x0, x1) = f.domain();
        let m = x1 - x0;
        for p in &self.pieces {
            if !p.verify(f) {
                return Err(GmtError::VerificationFailed(format!(
                    "piece [{}, {}] does not re-verify",
                    p.a, p.b
                )));
            }
            if p.len() < &self.tau * &m {
                return Err(GmtError::VerificationFailed("piece below tau floor".into()));
            }
        }
        for w in self.pieces.windows(2) {
            if w[0].b > w[1].a {
                return Err(GmtError::VerificationFailed("overlapping pieces".into()));
            }
        }
        if self.leftover > &self.leftover_constant * &(&self.epsilon * &m) {
            return Err(GmtError::VerificationFailed(format!(
                "leftover {} exceeds {} * eps * m",
                self.leftover, self.leftover_constant
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let ratpair = |r: &Rat| serde_json::json!([r.numer().to_string(), r.denom().to_string()]);
        serde_json::json!({
            "pieces": self.pieces.iter().map(|p| p.to_json()).collect::<Vec<_>>(),
            "tau": ratpair(&self.tau),
            "leftover": ratpair(&self.leftover),
            "leftover_constant": ratpair(&self.leftover_constant),
            "epsilon": ratpair(&self.epsilon),
        })
    }
}

/// Split the domain into eps-linear pieces by recursive subdivision at the
/// median interior breakpoint. Pieces with no interior breakpoint are affine
/// and therefore 0-linear, so the recursion terminates and covers the whole
/// domain: the leftover is always zero and tau is reported from the output.
pub fn decompose_linear(f: &PiecewiseAffine, eps: &Rat) -> Result<Decomposition> {
    if eps.is_negative() {
        return Err(GmtError::ParameterRange("eps must be >= 0".into()));
    }
    let (x0, x1) = f.domain();
    let mut stack = vec![(x0.clone(), x1.clone())];
    let mut pieces = Vec::new();
    while let Some((a, b)) = stack.pop() {
        if is_linear(f, &a, &b, eps) {
            let slope = f.slope(&a, &b)?;
            pieces.push(DecompositionPiece {
                a,
                b,
                kind: Kind::EpsLinear { slope },
                epsilon: eps.clone(),
            });
            continue;
        }
        let interior = f.interior(&a, &b);
        debug_assert!(
            !interior.is_empty(),
            "an affine piece is 0-linear, so a non-linear piece has a breakpoint"
        );
        let mid = f.xs[interior[interior.len() / 2]].clone();
        stack.push((a, mid.clone()));
        stack.push((mid, b));
    }
    let domain = x1 - x0;
    Ok(Decomposition::finish(
        pieces,
        domain,
        eps.clone(),
        rat_int(1),
    ))
}

/// Largest x < hi with secant slope(x, anchor) equal to `target`, where the
/// secant at hi is strictly below target and f(0)-side sign is favourable.
fn last_secant_hit(f: &PiecewiseAffine, anchor: &Rat, hi: &Rat, target: &Rat) -> Option<Rat> {
    // g(x) = f(x) - f(anchor) + target*(anchor - x); root of g <=> secant = target
    let fan = f.eval(anchor);
    let g = |x: &Rat| -> Rat { f.eval(x) - &fan + target * &(anchor - x) };
    let (x0, _) = f.domain();
    let mut right = hi.clone();
    let mut g_right = g(&right);
    if g_right <= Rat::zero() {
        return None; // caller guarantees g(hi) > 0
    }
    let mut knots: Vec<Rat> =
        f.xs.iter()
            .filter(|x| *x < hi && *x >= x0)
            .cloned()
            .collect();
    knots.reverse();
    for left in knots {
        let g_left = g(&left);
        if g_left <= Rat::zero() {
            // root in [left, right): g affine there (знаков): interpolate
            let root = if g_left.is_zero() {
                left
            } else {
                &left + &((&right - &left) * (-&g_left) / (&g_right - &g_left))
            };
            return Some(root);
        }
        right = left;
        g_right = g_left;
    }
    None
}

/// Smallest x > lo with secant slope(anchor, x) equal to `target`, where the
/// secant at lo is strictly above target.
fn first_secant_hit(f: &PiecewiseAffine, anchor: &Rat, lo: &Rat, target: &Rat) -> Option<Rat> {
    // h(x) = f(x) - f(anchor) - target*(x - anchor); root <=> secant = target
    let fan = f.eval(anchor);
    let h = |x: &Rat| -> Rat { f.eval(x) - &fan - target * &(x - anchor) };
    let (_, x1) = f.domain();
    let mut left = lo.clone();
    let mut h_left = h(&left);
    if h_left <= Rat::zero() {
        return None;
    }
    let knots: Vec<Rat> =
        f.xs.iter()
            .filter(|x| *x > lo && *x <= x1)
            .cloned()
            .collect();
    for right in knots {
        let h_right = h(&right);
        if h_right <= Rat::zero() {
            let root = if h_right.is_zero() {
                right
            } else {
                &left + &((&right - &left) * &h_left / (&h_left - &h_right))
            };
            return Some(root);
        }
        left = right;
        h_left = h_right;
    }
    None
}

struct WorkItem {
    a: Rat,
    b: Rat,
    base_a: Rat,
    base_b: Rat,
    truncated: bool,
}

impl WorkItem {
    fn base_len(&self) -> Rat {
        &self.base_b - &self.base_a
    }
    fn eps_cert(&self, eps0: &Rat, eps: &Rat) -> Rat {
        if self.truncated {
            eps.clone()
        } else {
            eps0.clone()
        }
    }
}

fn check_growth_hypothesis(f: &PiecewiseAffine, t: &Rat, eps: &Rat, m: &Rat) -> Result<()> {
    let slack = eps * m;
    for (x, y) in f.xs.iter().zip(&f.ys) {
        if y < &(&(t * x) - &slack) {
            return Err(GmtError::HypothesisViolated {
                condition: format!("f(x) >= {t}*x - eps*m"),
                witness: x.to_string(),
            });
        }
    }
    Ok(())
}

/// Decomposition into pieces that are either eps-linear with secant >= s or
/// (s,eps)-superlinear with secant exactly s, for a 2-Lipschitz f with
/// f(0) = 0 and f(x) >= t x - eps m. Low-slope stretches are absorbed into
/// slope-s superlinear pieces anchored where the running secant to their
/// right endpoint first drops to s; the scan runs right to left.
pub fn kaufman_decompose(
    f: &PiecewiseAffine,
    s: &Rat,
    t: &Rat,
    eps: &Rat,
) -> Result<Decomposition> {
    if !(s > &Rat::zero() && s < &rat_int(1)) {
        return Err(GmtError::ParameterRange(format!(
            "need 0 < s < 1, got s = {s}"
        )));
    }
    if !(t > s && t <= &rat_int(2)) {
        return Err(GmtError::ParameterRange(format!(
            "need s < t <= 2, got t = {t}"
        )));
    }
    if eps <= &Rat::zero() {
        return Err(GmtError::ParameterRange("need eps > 0".into()));
    }
    let (x0, x1) = f.domain();
    if !x0.is_zero() || !f.eval(x0).is_zero() {
        return Err(GmtError::ParameterRange(
            "need domain [0,m] and f(0) = 0".into(),
        ));
    }
    let m = x1.clone();
    check_growth_hypothesis(f, t, eps, &m)?;

    let eps0 = eps * eps / rat_int(2);
    let base = decompose_linear(f, &eps0)?;
    let mut work: Vec<WorkItem> = base
        .pieces
        .iter()
        .map(|p| WorkItem {
            a: p.a.clone(),
            b: p.b.clone(),
            base_a: p.a.clone(),
            base_b: p.b.clone(),
            truncated: false,
        })
        .collect();

    let mut out: Vec<DecompositionPiece> = Vec::new();
    let mut i = work.len() as i64 - 1;
    while i >= 0 {
        let idx = i as usize;
        let (a, b) = (work[idx].a.clone(), work[idx].b.clone());
        let secant = f.slope(&a, &b)?;
        if &secant > s {
            out.push(DecompositionPiece {
                kind: Kind::EpsLinear { slope: secant },
                epsilon: work[idx].eps_cert(&eps0, eps),
                a,
                b,
            });
            i -= 1;
            continue;
        }
        if &secant == s {
            // an eps-linear piece with secant exactly s is (s,eps)-superlinear
            out.push(DecompositionPiece {
                kind: Kind::EpsSuperlinear { slope: s.clone() },
                epsilon: work[idx].eps_cert(&eps0, eps),
                a,
                b,
            });
            i -= 1;
            continue;
        }
        // secant < s
        if f.eval(&b) < s * &b {
            // then b <= eps*m/(t-s): everything to the left goes to leftover
            break;
        }
        // largest c' < a with slope(c', b) = s; exists since slope(0,b) >= s
        let cp = last_secant_hit(f, &b, &a, s).ok_or_else(|| {
            GmtError::VerificationFailed("secant root must exist when f(b) >= s b".into())
        })?;
        // the low piece's own certificate bounds the dip below the slope-s
        // line anchored at c', so the extension inherits its epsilon
        out.push(DecompositionPiece {
            a: cp.clone(),
            b: b.clone(),
            kind: Kind::EpsSuperlinear { slope: s.clone() },
            epsilon: work[idx].eps_cert(&eps0, eps),
        });
        // consume items covered by [cp, b]
        let mut j = idx as i64 - 1;
        while j >= 0 && work[j as usize].a >= cp {
            j -= 1;
        }
        if j < 0 {
            break; // cp at or before the first item: fully covered
        }
        let ju = j as usize;
        if work[ju].b <= cp {
            i = j; // cp fell in a zero-measure boundary; continue left of j
            continue;
        }
        // cp lies strictly inside item ju: truncate or drop the remnant
        let remnant = &cp - &work[ju].a;
        if remnant <= eps * &work[ju].base_len() {
            i = j - 1; // drop the remnant into the leftover
        } else {
            work[ju].b = cp;
            work[ju].truncated = true;
            i = j; // re-examine the truncated piece
        }
    }
    // K_{s,t}: discard tail <= eps m/(t-s), truncation drops <= eps m, base leftover 0
    let k_const = rat_int(1) / (t - s) + rat_int(2);
    let dec = Decomposition::finish(out, m, eps.clone(), k_const);
    dec.verify(f)?;
    Ok(dec)
}

/// Dual decomposition: pieces either eps-linear with secant <= 2-s or
/// (2-s,eps)-superlinear with secant exactly 2-s, under the additional
/// ceiling f(m) <= (t+eps)m; follows the extend-right construction.
pub fn falconer_decompose(
    f: &PiecewiseAffine,
    s: &Rat,
    t: &Rat,
    eps: &Rat,
) -> Result<Decomposition> {
    let two = rat_int(2);
    if !(s > &Rat::zero() && s < &rat_int(1)) {
        return Err(GmtError::ParameterRange(format!(
            "need 0 < s < 1, got s = {s}"
        )));
    }
    if !(t > &Rat::zero() && t < &(&two - s)) {
        return Err(GmtError::ParameterRange(format!(
            "need 0 < t < 2 - s, got t = {t}"
        )));
    }
    if eps <= &Rat::zero() {
        return Err(GmtError::ParameterRange("need eps > 0".into()));
    }
    let (x0, x1) = f.domain();
    if !x0.is_zero() || !f.eval(x0).is_zero() {
        return Err(GmtError::ParameterRange(
            "need domain [0,m] and f(0) = 0".into(),
        ));
    }
    let m = x1.clone();
    check_growth_hypothesis(f, t, eps, &m)?;
    if f.eval(&m) > (t + eps) * &m {
        return Err(GmtError::HypothesisViolated {
            condition: format!("f(m) <= (t+eps)m"),
            witness: m.to_string(),
        });
    }

    let ceiling = &two - s;
    let eps0 = eps * eps / rat_int(2);
    let base = decompose_linear(f, &eps0)?;
    let mut work: Vec<WorkItem> = base
        .pieces
        .iter()
        .map(|p| WorkItem {
            a: p.a.clone(),
            b: p.b.clone(),
            base_a: p.a.clone(),
            base_b: p.b.clone(),
            truncated: false,
        })
        .collect();

    let mut out: Vec<DecompositionPiece> = Vec::new();
    let mut i = 0usize;
    while i < work.len() {
        let (a, b) = (work[i].a.clone(), work[i].b.clone());
        let secant = f.slope(&a, &b)?;
        if secant <= ceiling {
            out.push(DecompositionPiece {
                kind: Kind::EpsLinear { slope: secant },
                epsilon: work[i].eps_cert(&eps0, eps),
                a,
                b,
            });
            i += 1;
            continue;
        }
        // steep piece: if too close to the right edge, discard the tail
        let margin = rat_int(2) * eps * &m / (&ceiling - t);
        if a >= &m - &margin {
            break;
        }
        // smallest d' > b with slope(a, d') = 2-s (exists: slope(a,m) < 2-s)
        let dp = first_secant_hit(f, &a, &b, &ceiling).ok_or_else(|| {
            GmtError::VerificationFailed("secant root must exist when slope(a,m) < 2-s".into())
        })?;
        out.push(DecompositionPiece {
            a: a.clone(),
            b: dp.clone(),
            kind: Kind::EpsSuperlinear {
                slope: ceiling.clone(),
            },
            epsilon: work[i].eps_cert(&eps0, eps),
        });
        // skip items fully covered by [a, dp]
        let mut j = i + 1;
        while j < work.len() && work[j].b <= dp {
            j += 1;
        }
        if j >= work.len() {
            break;
        }
        if work[j].a >= dp {
            i = j;
            continue;
        }
        let remnant = &work[j].b - &dp;
        if remnant <= eps * &work[j].base_len() {
            i = j + 1; // drop [dp, b_j] into the leftover
        } else {
            work[j].a = dp;
            work[j].truncated = true;
            i = j;
        }
    }
    let k_const = rat_int(2) / (&ceiling - t) + rat_int(2);
    let dec = Decomposition::finish(out, m, eps.clone(), k_const);
    dec.verify(f)?;
    Ok(dec)
}

#[derive(Debug, Clone)]
pub struct WeakDecomposition {
    /// block boundaries a_0 = 0 < a_1 < ... < a_n = m
    pub points: Vec<Rat>,
    /// strictly increasing slopes, one per block
    pub slopes: Vec<Rat>,
    pub tau: Rat,
    pub epsilon: Rat,
}

impl WeakDecomposition {
    /// Exact self-certification of the three conclusions plus the
    /// two-point consequence |f(a_i)-f(a_j) - (F(a_i)-F(a_j))| <= eps*m.
    pub fn verify(&self, f: &PiecewiseAffine) -> Result<()> {
        let (x0, x1) = f.domain();
        let m = x1 - x0;
        if self.points.first() != Some(x0) || self.points.last() != Some(x1) {
            return Err(GmtError::VerificationFailed(
                "blocks must span [0,m]".into(),
            ));
        }
        for w in self.slopes.windows(2) {
            if w[0] >= w[1] {
                return Err(GmtError::VerificationFailed(
                    "slopes must be strictly increasing".into(),
                ));
            }
        }
        let mut mass = Rat::zero();
        for j in 0..self.slopes.len() {
            let (a, b) = (&self.points[j], &self.points[j + 1]);
            if b - a < &self.tau * &m {
                return Err(GmtError::VerificationFailed("block below tau".into()));
            }
            if !is_superlinear(f, a, b, &self.slopes[j], &Rat::zero()) {
                return Err(GmtError::VerificationFailed(format!(
                    "block [{a},{b}] not ({},0)-superlinear",
                    self.slopes[j]
                )));
            }
            mass = mass + &self.slopes[j] * &(b - a);
        }
        let fm = f.eval(x1);
        let slack = &self.epsilon * &m;
        if mass < &fm - &slack {
            return Err(GmtError::VerificationFailed(
                "slope mass below f(m) - eps*m".into(),
            ));
        }
        // two-point consequence against F(a_i) = partial slope mass
        let mut partial = vec![Rat::zero()];
        for j in 0..self.slopes.len() {
            let prev = partial.last().unwrap().clone();
            partial.push(prev + &self.slopes[j] * &(&self.points[j + 1] - &self.points[j]));
        }
        let devs: Vec<Rat> = self
            .points
            .iter()
            .zip(&partial)
            .map(|(a, fa)| f.eval(a) - fa)
            .collect();
        for di in &devs {
            for dj in &devs {
                if (di - dj).abs() > slack {
                    return Err(GmtError::VerificationFailed(
                        "two-point hull deviation exceeds eps*m".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Lower convex hull vertex indices of the breakpoint graph.
fn lower_hull(f: &PiecewiseAffine) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..f.xs.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // pop b when slope(a,b) >= slope(b,i): keeps slopes strictly increasing
            let lhs = (&f.ys[b] - &f.ys[a]) * (&f.xs[i] - &f.xs[b]);
            let rhs = (&f.ys[i] - &f.ys[b]) * (&f.xs[b] - &f.xs[a]);
            if lhs >= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Increasing-slope decomposition: block boundaries are lower-convex-hull
/// contact points grouped into maximal runs whose hull slopes share a band
/// of width eps/2, so each block is exactly (sigma_j, 0)-superlinear for its
/// leading hull slope and the total slope mass loses at most eps*m/2.
pub fn weak_decompose(f: &PiecewiseAffine, eps: &Rat) -> Result<WeakDecomposition> {
    if eps <= &Rat::zero() {
        return Err(GmtError::ParameterRange("need eps > 0".into()));
    }
    let (x0, x1) = f.domain();
    if !f.eval(x0).is_zero() {
        return Err(GmtError::ParameterRange("need f(0) = 0".into()));
    }
    for i in 0..f.xs.len() - 1 {
        if f.ys[i + 1] < f.ys[i] {
            return Err(GmtError::HypothesisViolated {
                condition: "f non-decreasing".into(),
                witness: f.xs[i + 1].to_string(),
            });
        }
    }
    let hull = lower_hull(f);
    let band_w = eps / rat_int(2);
    let band = |slope: &Rat| -> Rat { (slope / &band_w).floor() };

    let mut points = vec![f.xs[hull[0]].clone()];
    let mut slopes: Vec<Rat> = Vec::new();
    let mut current_band: Option<Rat> = None;
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        let sl = (&f.ys[b] - &f.ys[a]) / (&f.xs[b] - &f.xs[a]);
        let bd = band(&sl);
        match &current_band {
            Some(cb) if *cb == bd => {
                // extend the current block
                *points.last_mut().unwrap() = f.xs[b].clone();
            }
            _ => {
                if current_band.is_some() {
                    points.push(f.xs[b].clone());
                } else {
                    *points.last_mut().unwrap() = f.xs[a].clone();
                    points.push(f.xs[b].clone());
                }
                slopes.push(sl);
                current_band = Some(bd);
            }
        }
    }
    let m = x1 - x0;
    let tau = points
        .windows(2)
        .map(|w| &w[1] - &w[0])
        .min()
        .map(|l| l / &m)
        .unwrap_or_else(Rat::zero);
    let wd = WeakDecomposition {
        points,
        slopes,
        tau,
        epsilon: eps.clone(),
    };
    wd.verify(f)?;
    Ok(wd)
}

/// The tail point of the shifted weak decomposition: a point
/// `a in [zeta/(12 lip), 1/3]` such that `(f,a,1)` is `(sigma-zeta, 0)`-
/// superlinear, given that `(f,0,1)` is `(sigma,eps)`-superlinear.
pub fn superlinear_tail(f: &PiecewiseAffine, sigma: &Rat, zeta: &Rat, eps: &Rat) -> Result<Rat> {
    let d = f.lipschitz_bound().clone();
    if d < rat_int(1) {
        return Err(GmtError::ParameterRange(format!(
            "need Lipschitz bound >= 1, got {d}"
        )));
    }
    if !(sigma > &Rat::zero() && sigma <= &d) {
        return Err(GmtError::ParameterRange(format!(
            "need 0 < sigma <= {d}, got sigma = {sigma}"
        )));
    }
    if !(zeta > &Rat::zero() && zeta <= &rat_int(1)) {
        return Err(GmtError::ParameterRange(format!(
            "need zeta in (0,1], got {zeta}"
        )));
    }
    if !(eps > &Rat::zero() && eps <= &(zeta / rat_int(6))) {
        return Err(GmtError::ParameterRange(format!(
            "need eps in (0, zeta/6], got {eps}"
        )));
    }
    let (x0, x1) = f.domain();
    if !x0.is_zero() || x1 != &rat_int(1) || !f.eval(x0).is_zero() {
        return Err(GmtError::ParameterRange(
            "need domain [0,1] with f(0)=0".into(),
        ));
    }
    if !is_superlinear(f, x0, x1, sigma, eps) {
        return Err(GmtError::HypothesisViolated {
            condition: format!("(f,0,1) ({sigma},{eps})-superlinear"),
            witness: "0".into(),
        });
    }

    let c = zeta / (rat_int(12) * &d);
    // g(y) = f(y + c) - f(c) on [0, 1-c]
    let fc = f.eval(&c);
    let mut pts = vec![(Rat::zero(), Rat::zero())];
    for (x, y) in f.xs.iter().zip(&f.ys) {
        if x > &c {
            pts.push((x - &c, y - &fc));
        }
    }
    let g = PiecewiseAffine::new(pts, d.clone())?;
    let wd = weak_decompose(&g, &(eps / rat_int(100)))?;
    let threshold = sigma - zeta;
    let j0 = wd
        .slopes
        .iter()
        .position(|sl| sl >= &threshold)
        .ok_or_else(|| {
            GmtError::VerificationFailed(
                "no block reaches sigma - zeta; hypotheses make this unreachable".into(),
            )
        })?;
    let a = &wd.points[j0] + &c;
    let third = rat(1, 3);
    if !(a >= c && a <= third) {
        return Err(GmtError::VerificationFailed(format!(
            "tail point {a} escaped [zeta/(12d), 1/3]"
        )));
    }
    if !is_superlinear(f, &a, x1, &threshold, &Rat::zero()) {
        return Err(GmtError::VerificationFailed(
            "tail point fails exact superlinearity".into(),
        ));
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine(slope: i64, den: i64, m: i64) -> PiecewiseAffine {
        PiecewiseAffine::new(
            vec![(rat_int(0), rat_int(0)), (rat_int(m), rat(slope * m, den))],
            rat_int(2),
        )
        .unwrap()
    }

    #[test]
    fn slope_of_affine_is_constant() {
        let f = affine(3, 2, 4);
        assert_eq!(f.slope(&rat_int(1), &rat_int(3)).unwrap(), rat(3, 2));
        assert_eq!(f.slope(&rat(1, 7), &rat(22, 7)).unwrap(), rat(3, 2));
        assert!(f.slope(&rat_int(3), &rat_int(1)).is_err());
    }

    #[test]
    fn zero_function_slope_zero() {
        let f = affine(0, 1, 5);
        assert_eq!(f.slope(&rat_int(0), &rat_int(5)).unwrap(), rat_int(0));
    }

    #[test]
    fn superlinear_convex_and_affine() {
        // convex vee: slopes -1 then 1 on [0,2]; secant over [0,2] is 0
        let f = PiecewiseAffine::new(
            vec![
                (rat_int(0), rat_int(0)),
                (rat_int(1), rat_int(-1)),
                (rat_int(2), rat_int(0)),
            ],
            rat_int(2),
        )
        .unwrap();
        // convex functions are NOT superlinear at their secant (they dip below)
        assert!(!is_superlinear(
            &f,
            &rat_int(0),
            &rat_int(2),
            &rat_int(0),
            &Rat::zero()
        ));
        // concave tent is
        let g = PiecewiseAffine::new(
            vec![
                (rat_int(0), rat_int(0)),
                (rat_int(1), rat_int(1)),
                (rat_int(2), rat_int(0)),
            ],
            rat_int(2),
        )
        .unwrap();
        assert!(is_superlinear(
            &g,
            &rat_int(0),
            &rat_int(2),
            &rat_int(0),
            &Rat::zero()
        ));
        // affine at slope + zeta fails for any zeta > 0
        let aff = affine(1, 1, 2);
        assert!(!is_superlinear(
            &aff,
            &rat_int(0),
            &rat_int(2),
            &rat(11, 10),
            &Rat::zero()
        ));
        assert!(is_superlinear(
            &aff,
            &rat_int(0),
            &rat_int(2),
            &rat_int(1),
            &Rat::zero()
        ));
    }

    #[test]
    fn linear_sawtooth_amplitude_threshold() {
        // tent of amplitude 1/4 on [0,1]: eps-linear iff eps >= 1/4
        let f = PiecewiseAffine::new(
            vec![
                (rat_int(0), rat_int(0)),
                (rat(1, 2), rat(1, 4)),
                (rat_int(1), rat_int(0)),
            ],
            rat_int(2),
        )
        .unwrap();
        assert!(is_linear(&f, &rat_int(0), &rat_int(1), &rat(1, 4)));
        assert!(!is_linear(&f, &rat_int(0), &rat_int(1), &rat(24, 100)));
    }

    #[test]
    fn decompose_linear_affine_single_piece() {
        let f = affine(1, 1, 3);
        let d = decompose_linear(&f, &rat(1, 10)).unwrap();
        assert_eq!(d.pieces.len(), 1);
        assert!(d.leftover.is_zero());
        d.verify(&f).unwrap();
    }

    #[test]
    fn decompose_linear_two_slopes_no_leftover() {
        let f = PiecewiseAffine::new(
            vec![
                (rat_int(0), rat_int(0)),
                (rat(1, 3), rat(2, 3)),
                (rat_int(1), rat(2, 3)),
            ],
            rat_int(2),
        )
        .unwrap();
        let d = decompose_linear(&f, &rat(1, 100)).unwrap();
        assert_eq!(d.pieces.len(), 2);
        assert!(d.leftover.is_zero());
        d.verify(&f).unwrap();
    }

    #[test]
    fn kaufman_affine_cases() {
        // f = tx: a single eps-linear piece of slope t >= s
        let f = affine(1, 1, 4);
        let d = kaufman_decompose(&f, &rat(1, 2), &rat_int(1), &rat(1, 10)).unwrap();
        assert_eq!(d.pieces.len(), 1);
        assert!(matches!(&d.pieces[0].kind, Kind::EpsLinear { slope } if *slope == rat_int(1)));

        // f = sx at the boundary (valid only when t - s <= eps)
        let g = affine(1, 2, 4);
        let dg = kaufman_decompose(&g, &rat(1, 2), &rat(51, 100), &rat(1, 50)).unwrap();
        assert_eq!(dg.pieces.len(), 1);
        assert!(
            matches!(&dg.pieces[0].kind, Kind::EpsSuperlinear { slope } if *slope == rat(1, 2))
        );
    }

    #[test]
    fn kaufman_overshoot_then_flat() {
        // slope 2 on [0, m/2], flat after: the flat part is absorbed by a
        // slope-s superlinear piece anchored inside the rise
        let m = rat_int(6);
        let f = PiecewiseAffine::new(
            vec![
                (rat_int(0), rat_int(0)),
                (rat_int(3), rat_int(6)),
                (m.clone(), rat_int(6)),
            ],
            rat_int(2),
        )
        .unwrap();
        let d = kaufman_decompose(&f, &rat(1, 2), &rat_int(1), &rat(1, 20)).unwrap();
        d.verify(&f).unwrap();
        assert!(d.leftover.is_zero());
        let superlinear: Vec<_> = d
            .pieces
            .iter()
            .filter(|p| matches!(p.kind, Kind::EpsSuperlinear { .. }))
            .collect();
        assert_eq!(superlinear.len(), 1);
        // the anchored piece ends at m and has secant exactly 1/2
        assert_eq!(superlinear[0].b, rat_int(6));
        assert_eq!(
            f.slope(&superlinear[0].a, &superlinear[0].b).unwrap(),
            rat(1, 2)
        );
    }

    #[test]
    fn falconer_affine_and_steep_prefix() {
        let f = affine(1, 1, 4);
        let d = falconer_decompose(&f, &rat(1, 2), &rat_int(1), &rat(1, 10)).unwrap();
        assert_eq!(d.pieces.len(), 1);
        assert!(matches!(&d.pieces[0].kind, Kind::EpsLinear { slope } if *slope == rat_int(1)));

        // steep prefix then flat: must produce a superlinear piece with
        // secant exactly 2 - s, cut where the running secant reaches it
        let m = rat_int(6);
        let g = PiecewiseAffine::new(
            vec![
                (rat_int(0), rat_int(0)),
                (rat_int(3), rat_int(6)),
                (m.clone(), rat_int(6)),
            ],
            rat_int(2),
        )
        .unwrap();
        let s = rat(1, 2);
        let t = rat_int(1);
        let dg = falconer_decompose(&g, &s, &t, &rat(1, 20)).unwrap();
        dg.verify(&g).unwrap();
        let sup: Vec<_> = dg
            .pieces
            .iter()
            .filter(|p| matches!(p.kind, Kind::EpsSuperlinear { .. }))
            .collect();
        assert_eq!(sup.len(), 1);
        assert_eq!(g.slope(&sup[0].a, &sup[0].b).unwrap(), rat(3, 2));
        // d' solves 6/(x) = 3/2 from anchor 0 => x = 4
        assert_eq!(sup[0].b, rat_int(4));
    }

    #[test]
    fn weak_affine_and_zero() {
        let f = affine(3, 2, 5);
        let wd = weak_decompose(&f, &rat(1, 10)).unwrap();
        assert_eq!(wd.slopes, vec![rat(3, 2)]);
        assert_eq!(wd.points, vec![rat_int(0), rat_int(5)]);

        let z = affine(0, 1, 5);
        let wz = weak_decompose(&z, &rat(1, 10)).unwrap();
        assert_eq!(wz.slopes, vec![rat_int(0)]);
    }

    #[test]
    fn weak_rejects_decreasing() {
        let f = PiecewiseAffine::new(
            vec![
                (rat_int(0), rat_int(0)),
                (rat_int(1), rat_int(1)),
                (rat_int(2), rat(1, 2)),
            ],
            rat_int(2),
        )
        .unwrap();
        assert!(matches!(
            weak_decompose(&f, &rat(1, 10)),
            Err(GmtError::HypothesisViolated { .. })
        ));
    }

    #[test]
    fn tail_point_affine() {
        let sigma = rat(1, 2);
        let f = PiecewiseAffine::new(
            vec![(rat_int(0), rat_int(0)), (rat_int(1), sigma.clone())],
            rat_int(1),
        )
        .unwrap();
        let zeta = rat(1, 4);
        let a = superlinear_tail(&f, &sigma, &zeta, &rat(1, 24)).unwrap();
        // canonical point is the shift c = zeta/12 for an exactly-affine f
        assert_eq!(a, rat(1, 48));
        assert!(is_superlinear(
            &f,
            &a,
            &rat_int(1),
            &(&sigma - &zeta),
            &Rat::zero()
        ));
    }

    #[test]
    fn tail_point_flat_prefix() {
        // flat on [0, 1/96] then slope sigma: still (sigma, eps)-superlinear
        // for eps = 1/96 >= prefix dip; returned point must clear the prefix
        let sigma = rat_int(1);
        let f = PiecewiseAffine::new(
            vec![
                (rat_int(0), rat_int(0)),
                (rat(1, 96), rat_int(0)),
                (rat_int(1), rat(95, 96)),
            ],
            rat_int(1),
        )
        .unwrap();
        let zeta = rat(1, 8);
        let eps = rat(1, 96);
        let a = superlinear_tail(&f, &sigma, &zeta, &eps).unwrap();
        assert!(a >= rat(1, 96));
        assert!(is_superlinear(
            &f,
            &a,
            &rat_int(1),
            &(&sigma - &zeta),
            &Rat::zero()
        ));
    }
}
