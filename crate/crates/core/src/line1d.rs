//! One-dimensional work along a line `x + t v`: the line-local maximum of `f`,
//! the line-local minimum along a descent direction, and the two crossings of a
//! level `l` that bound the super-level segment `S_{l,v}(x)`.

use serde::{Deserialize, Serialize};

use crate::objective::{Objective, TrustRegion};
use crate::{Error, Result, Vector};

/// Tolerances shared by the line searches and the parallel distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// `|φ'(t*)|` target at line extrema.
    pub grad_tol_1d: f64,
    /// `|f(z) − l|` target at level crossings.
    pub root_tol: f64,
    /// Relative threshold on `|vᵀ∇f(z)| / ‖∇f(z)‖` below which the parallel
    /// distance derivatives are refused.
    pub denom_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            grad_tol_1d: 1e-10,
            root_tol: 1e-10,
            denom_tol: 1e-8,
        }
    }
}

/// A line-local extremum `x + t v` with value `f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineExtremum {
    pub t: f64,
    pub value: f64,
    /// The search ran into the trust-region boundary.
    pub at_boundary: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SectionKind {
    Empty,
    /// `t1 ≤ t2`; `z = x + t2 v`, `z' = x + t1 v`.
    Segment {
        t1: f64,
        t2: f64,
    },
}

/// The super-level section `S_{l,v}(x)` of the line through `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct LineSection {
    pub base: Vector,
    pub direction: Vector,
    pub level: f64,
    /// Line-local maximum the section was grown from.
    pub line_max: LineExtremum,
    pub kind: SectionKind,
}

impl LineSection {
    pub fn point(&self, t: f64) -> Vector {
        &self.base + &self.direction * t
    }

    pub fn is_empty(&self) -> bool {
        matches!(self.kind, SectionKind::Empty)
    }

    /// `t2 − t1`, or 0 when empty.
    pub fn diam(&self) -> f64 {
        match self.kind {
            SectionKind::Empty => 0.0,
            SectionKind::Segment { t1, t2 } => t2 - t1,
        }
    }

    /// Upper endpoint `z` (largest `vᵀz`).
    pub fn z(&self) -> Option<Vector> {
        match self.kind {
            SectionKind::Empty => None,
            SectionKind::Segment { t2, .. } => Some(self.point(t2)),
        }
    }

    /// Lower endpoint `z'`.
    pub fn z_prime(&self) -> Option<Vector> {
        match self.kind {
            SectionKind::Empty => None,
            SectionKind::Segment { t1, .. } => Some(self.point(t1)),
        }
    }

    /// The point where `f` peaks along the line.
    pub fn peak(&self) -> Vector {
        self.point(self.line_max.t)
    }
}

struct Line<'a> {
    obj: &'a Objective,
    x: &'a Vector,
    v: &'a Vector,
}

impl Line<'_> {
    fn at(&self, t: f64) -> Vector {
        self.x + self.v * t
    }

    fn value(&self, t: f64) -> Result<f64> {
        self.obj.eval_value(&self.at(t))
    }

    fn slope(&self, t: f64) -> Result<f64> {
        Ok(self.obj.eval_gradient(&self.at(t))?.dot(self.v))
    }
}

fn check_unit(v: &Vector) {
    debug_assert!((v.norm() - 1.0).abs() <= 1e-12, "direction must be a unit vector");
}

/// Brent's method for a root of `f` on `[a, b]` with `fa·fb ≤ 0`.
///
/// Stops at `|f| ≤ ftol` or when the bracket shrinks to rounding level.
pub(crate) fn brent_root(
    mut f: impl FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    ftol: f64,
) -> Result<(f64, f64)> {
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    if fa.abs() <= ftol {
        return Ok((a, fa));
    }
    if fb.abs() <= ftol {
        return Ok((b, fb));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 1e-300;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb.abs() <= ftol {
            return Ok((b, fb));
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * m * s, 1.0 - s)
            } else {
                let q0 = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * m * q0 * (q0 - r) - (b - a) * (r - 1.0)),
                    (q0 - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol * m.signum() };
        fb = f(b)?;
    }
    Ok((b, fb))
}

/// Local maximizer of `φ(t) = f(x + t v)` reached by walking uphill from `t = 0`.
///
/// Steps start at `1e-2·radius` and double until `φ'` changes sign, then Brent's
/// method drives `φ'` to zero. Fails with [`Error::NoLineMax`] if `φ` keeps
/// increasing up to the region boundary.
pub fn line_local_max(
    obj: &Objective,
    x: &Vector,
    v: &Vector,
    region: &TrustRegion,
    tol: &Tolerances,
) -> Result<LineExtremum> {
    check_unit(v);
    let (lo, hi) = region.line_interval(x, v).ok_or(Error::OutsideRegion)?;
    if lo > 0.0 || hi < 0.0 {
        return Err(Error::OutsideRegion);
    }
    let line = Line { obj, x, v };
    let d0 = line.slope(0.0)?;
    if d0.abs() <= tol.grad_tol_1d {
        return Ok(LineExtremum {
            t: 0.0,
            value: line.value(0.0)?,
            at_boundary: false,
        });
    }
    let dir = d0.signum();
    let limit = if dir > 0.0 { hi } else { lo };
    let mut step = 1e-2 * region.radius();
    let (mut t_prev, mut d_prev) = (0.0, d0);
    loop {
        let mut t = t_prev + dir * step;
        let at_limit = dir * (t - limit) >= 0.0;
        if at_limit {
            t = limit;
        }
        let d = line.slope(t)?;
        if dir * d <= 0.0 {
            let (t_star, _) = brent_root(|s| line.slope(s), t_prev, t, d_prev, d, tol.grad_tol_1d)?;
            return Ok(LineExtremum {
                t: t_star,
                value: line.value(t_star)?,
                at_boundary: false,
            });
        }
        if at_limit {
            return Err(Error::NoLineMax);
        }
        t_prev = t;
        d_prev = d;
        step *= 2.0;
    }
}

/// First local minimizer of `ψ(t) = f(x + t d)` for `t > 0`.
///
/// Requires `∇f(x)ᵀd < 0`. Returns a boundary-flagged point if `ψ` is still
/// decreasing where the line leaves the region.
pub fn line_local_min(
    obj: &Objective,
    x: &Vector,
    d: &Vector,
    region: &TrustRegion,
    tol: &Tolerances,
) -> Result<LineExtremum> {
    check_unit(d);
    let line = Line { obj, x, v: d };
    let s0 = line.slope(0.0)?;
    if s0 >= 0.0 {
        return Err(Error::BadDirection { slope: s0 });
    }
    let (lo, hi) = region.line_interval(x, d).ok_or(Error::OutsideRegion)?;
    if lo > 0.0 || hi < 0.0 {
        return Err(Error::OutsideRegion);
    }
    let mut step = 1e-2 * region.radius();
    let (mut t_prev, mut s_prev) = (0.0, s0);
    loop {
        let mut t = t_prev + step;
        let at_limit = t >= hi;
        if at_limit {
            t = hi;
        }
        let s = line.slope(t)?;
        if s >= 0.0 {
            let (t_star, _) = brent_root(|u| line.slope(u), t_prev, t, s_prev, s, tol.grad_tol_1d)?;
            return Ok(LineExtremum {
                t: t_star,
                value: line.value(t_star)?,
                at_boundary: false,
            });
        }
        if at_limit {
            return Ok(LineExtremum {
                t,
                value: line.value(t)?,
                at_boundary: true,
            });
        }
        t_prev = t;
        s_prev = s;
        step *= 2.0;
    }
}

/// Bisection on `φ(t) − l` between `inside` (`φ ≥ l`) and `outside` (`φ < l`),
/// to width `1e-12·radius`, then one guarded Newton polish.
fn refine_crossing(line: &Line<'_>, level: f64, inside: f64, outside: f64, width: f64) -> Result<f64> {
    let (mut t_in, mut t_out) = (inside, outside);
    let mut r_in = line.value(t_in)? - level;
    let mut r_out = line.value(t_out)? - level;
    while (t_out - t_in).abs() > width {
        let mid = 0.5 * (t_in + t_out);
        if mid == t_in || mid == t_out {
            break;
        }
        let r = line.value(mid)? - level;
        if r >= 0.0 {
            t_in = mid;
            r_in = r;
        } else {
            t_out = mid;
            r_out = r;
        }
    }
    let (t, r) = if r_in.abs() <= r_out.abs() {
        (t_in, r_in)
    } else {
        (t_out, r_out)
    };
    if r == 0.0 {
        return Ok(t);
    }
    let slope = line.slope(t)?;
    if slope != 0.0 {
        let polished = t - r / slope;
        let (a, b) = if t_in < t_out { (t_in, t_out) } else { (t_out, t_in) };
        let slack = b - a;
        if polished >= a - slack && polished <= b + slack {
            let rp = line.value(polished)? - level;
            if rp.abs() < r.abs() {
                return Ok(polished);
            }
        }
    }
    Ok(t)
}

/// Walks from `t0` (where `φ ≥ l`) in direction `dir` until `φ < l`, then refines.
fn crossing_from(line: &Line<'_>, level: f64, t0: f64, dir: f64, limit: f64, radius: f64) -> Result<f64> {
    let mut step = 1e-2 * radius;
    let mut t_in = t0;
    loop {
        let mut t = t_in + dir * step;
        let at_limit = dir * (t - limit) >= 0.0;
        if at_limit {
            t = limit;
        }
        if line.value(t)? < level {
            return refine_crossing(line, level, t_in, t, 1e-12 * radius);
        }
        if at_limit {
            return Err(Error::CrossingOutsideRegion);
        }
        t_in = t;
        step *= 2.0;
    }
}

/// Crossing of `l` on the bracket `[inside, outside]` of the line `x + t v`,
/// where `f ≥ l` at `inside` and `f ≤ l` at `outside`.
pub fn crossing_between(obj: &Objective, x: &Vector, v: &Vector, level: f64, inside: f64, outside: f64) -> Result<f64> {
    let line = Line { obj, x, v };
    let width = 1e-12 * (inside - outside).abs().max(1.0);
    refine_crossing(&line, level, inside, outside, width)
}

/// The super-level section `S_{l,v}(x)` grown from the line-local maximum.
///
/// Empty when the line maximum is below `l − root_tol`; a single point when it
/// is within `root_tol` of `l`; otherwise the connected component of
/// `{t : φ(t) ≥ l}` around the maximum, endpoints refined to `|φ − l| ≤ root_tol`.
pub fn find_level_crossings(
    obj: &Objective,
    x: &Vector,
    v: &Vector,
    level: f64,
    region: &TrustRegion,
    tol: &Tolerances,
) -> Result<LineSection> {
    let peak = line_local_max(obj, x, v, region, tol)?;
    let make = |kind| LineSection {
        base: x.clone(),
        direction: v.clone(),
        level,
        line_max: peak,
        kind,
    };
    if peak.value < level - tol.root_tol {
        return Ok(make(SectionKind::Empty));
    }
    if peak.value <= level + tol.root_tol {
        return Ok(make(SectionKind::Segment { t1: peak.t, t2: peak.t }));
    }
    let (lo, hi) = region.line_interval(x, v).ok_or(Error::OutsideRegion)?;
    let line = Line { obj, x, v };
    let t2 = crossing_from(&line, level, peak.t, 1.0, hi, region.radius())?;
    let t1 = crossing_from(&line, level, peak.t, -1.0, lo, region.radius())?;
    Ok(make(SectionKind::Segment { t1, t2 }))
}
