//! The four level-set steps.
//!
//! - (PD) shrinks the parallel distance by a Newton or gradient step on `g²`
//!   within `v⊥`, keeping `l` and `v`.
//! - (Av) slides one endpoint along `{f = l}` to shorten the chord, then
//!   re-derives `v` from the chord.
//! - (l↓) lowers the level from a line maximum by minimizing along `−(I−vvᵀ)∇f`.
//! - (l↑) raises the level to `f` at the chord midpoint.

use serde::{Deserialize, Serialize};

use crate::linalg::{complement_basis, jacobi_eigen, project_out, Lu};
use crate::line1d::{find_level_crossings, line_local_min, LineSection, SectionKind, Tolerances};
use crate::objective::{Objective, TrustRegion};
use crate::pardist::{eval_pardist, Derivatives};
use crate::{Error, Result, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    Init,
    PD,
    Av,
    LUp,
    LDown,
    Newton,
}

/// Line-search and step-selection parameters shared by the subroutines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepParams {
    /// Armijo sufficient-decrease constant.
    pub armijo_c1: f64,
    /// Backtracking ratio.
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Smallest eigenvalue of the reduced Hessian of `g²` for a Newton step.
    pub newton_min_eig: f64,
    pub tolerances: Tolerances,
}

impl Default for StepParams {
    fn default() -> Self {
        Self {
            armijo_c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 50,
            newton_min_eig: 1e-10,
            tolerances: Tolerances::default(),
        }
    }
}

/// Iterate of the level-set method: `f(z) = f(z') = l`, `v` the chord direction.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub z: Vector,
    pub z_prime: Vector,
    pub v: Vector,
    pub level: f64,
    /// Base point on `[z', z]`; always the midpoint.
    pub x: Vector,
    pub iteration: usize,
    pub region: TrustRegion,
    pub last_step: StepKind,
}

impl SolverState {
    /// State whose endpoints are the ends of a non-empty section.
    pub fn from_section(section: &LineSection, region: TrustRegion, iteration: usize, kind: StepKind) -> Option<Self> {
        let (z, z_prime) = (section.z()?, section.z_prime()?);
        let x = (&z + &z_prime) * 0.5;
        Some(Self {
            z,
            z_prime,
            v: section.direction.clone(),
            level: section.level,
            x,
            iteration,
            region,
            last_step: kind,
        })
    }

    /// `‖z − z'‖`.
    pub fn chord(&self) -> f64 {
        (&self.z - &self.z_prime).norm()
    }

    pub fn midpoint(&self) -> Vector {
        (&self.z + &self.z_prime) * 0.5
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKind {
    Newton,
    Gradient,
}

#[derive(Clone, Debug)]
pub enum PdOutcome {
    /// The step kept a positive parallel distance.
    ReducedSegment {
        state: SolverState,
        g_before: f64,
        g_after: f64,
        direction: DirectionKind,
    },
    /// The section vanished at the trial point; `peak` is the line maximum of
    /// `f` there, with `f(peak) ≤ l + root_tol`.
    HitZero {
        peak: Vector,
        peak_value: f64,
        g_before: f64,
    },
    /// No step length gave sufficient decrease.
    Stalled { g_before: f64 },
}

/// (PD): one descent step on `g²_{l,v}` from the chord midpoint.
///
/// Uses the Newton direction in `v⊥` when the reduced Hessian is positive
/// definite, otherwise the projected negative gradient, with Armijo backtracking.
pub fn step_pd(state: &SolverState, obj: &Objective, params: &StepParams) -> Result<PdOutcome> {
    let tol = &params.tolerances;
    let x = state.midpoint();
    let v = &state.v;
    let base = eval_pardist(obj, &x, v, state.level, &state.region, Derivatives::Hessian, tol)?;
    let g_before = base.g;
    let (Some(grad), Some(hess)) = (base.grad_g2.as_ref(), base.hess_g2.as_ref()) else {
        let peak = base.section.peak();
        return Ok(PdOutcome::HitZero {
            peak,
            peak_value: base.section.line_max.value,
            g_before,
        });
    };

    let basis = complement_basis(v);
    let reduced = basis.transpose() * hess * &basis;
    let reduced_grad = basis.transpose() * grad;
    let min_eig = if reduced.nrows() == 0 {
        f64::INFINITY
    } else {
        let e = jacobi_eigen(&reduced)?;
        e.values[e.values.len() - 1]
    };
    let newton = if min_eig > params.newton_min_eig {
        Lu::new(&reduced).ok().map(|lu| -(&basis * lu.solve(&reduced_grad)))
    } else {
        None
    };
    let (d, kind) = match newton {
        Some(d) => (d, DirectionKind::Newton),
        None => (-project_out(grad, v), DirectionKind::Gradient),
    };
    let slope = grad.dot(&d);
    let dnorm = d.norm();
    if !(slope < 0.0) || dnorm == 0.0 {
        return Ok(PdOutcome::Stalled { g_before });
    }
    let mut t = match kind {
        DirectionKind::Newton => 1.0,
        DirectionKind::Gradient => (state.region.radius() / dnorm).min(1.0),
    };
    for _ in 0..params.max_backtracks {
        let trial = &x + &d * t;
        match eval_pardist(obj, &trial, v, state.level, &state.region, Derivatives::None, tol) {
            Ok(e) if e.g <= 0.0 => {
                return Ok(PdOutcome::HitZero {
                    peak: e.section.peak(),
                    peak_value: e.section.line_max.value,
                    g_before,
                });
            }
            Ok(e) if e.g2 <= base.g2 + params.armijo_c1 * t * slope => {
                let next =
                    SolverState::from_section(&e.section, state.region.clone(), state.iteration + 1, StepKind::PD)
                        .expect("non-empty section");
                return Ok(PdOutcome::ReducedSegment {
                    state: next,
                    g_before,
                    g_after: e.g,
                    direction: kind,
                });
            }
            Ok(_) => {}
            Err(Error::DimensionMismatch { expected, got }) => return Err(Error::DimensionMismatch { expected, got }),
            Err(_) => {}
        }
        t *= params.backtrack;
    }
    Ok(PdOutcome::Stalled { g_before })
}

/// Moves `p` onto `{f = l}` along the normal direction at `p` by scalar Newton.
fn project_to_level(obj: &Objective, p: &Vector, level: f64, region: &TrustRegion, tol: &Tolerances) -> Option<Vector> {
    let grad = obj.eval_gradient(p).ok()?;
    let gnorm = grad.norm();
    if gnorm == 0.0 {
        return None;
    }
    let u = grad / gnorm;
    let mut s = 0.0;
    for _ in 0..50 {
        let q = p + &u * s;
        if !region.contains(&q) {
            return None;
        }
        let r = obj.eval_value(&q).ok()? - level;
        if r.abs() <= tol.root_tol {
            return Some(q);
        }
        let slope = obj.eval_gradient(&q).ok()?.dot(&u);
        if slope == 0.0 {
            return None;
        }
        s -= r / slope;
    }
    None
}

/// (Av): shortens `‖z − z'‖` by moving the endpoint with the larger gradient
/// (ties move `z`) along its tangent plane toward the other, then re-derives `v`.
pub fn step_av(state: &SolverState, obj: &Objective, params: &StepParams) -> Result<SolverState> {
    let chord = state.chord();
    if chord == 0.0 {
        return Err(Error::AvStalled);
    }
    let grad_z = obj.eval_gradient(&state.z)?;
    let grad_zp = obj.eval_gradient(&state.z_prime)?;
    let move_z = grad_z.norm() >= grad_zp.norm();
    let (p, q, grad_p) = if move_z {
        (&state.z, &state.z_prime, grad_z)
    } else {
        (&state.z_prime, &state.z, grad_zp)
    };
    let gnorm = grad_p.norm();
    if gnorm == 0.0 {
        return Err(Error::AvStalled);
    }
    let normal = grad_p / gnorm;
    let w = project_out(&(q - p), &normal);
    if w.norm() < 1e-12 {
        return Err(Error::AvStalled);
    }
    let mut alpha = 1.0;
    for _ in 0..params.max_backtracks {
        if let Some(moved) = project_to_level(obj, &(p + &w * alpha), state.level, &state.region, &params.tolerances) {
            let new_chord = (&moved - q).norm();
            if new_chord < chord && new_chord > 0.0 {
                let (z, z_prime) = if move_z { (moved, q.clone()) } else { (q.clone(), moved) };
                let v = (&z - &z_prime) / new_chord;
                let x = (&z + &z_prime) * 0.5;
                return Ok(SolverState {
                    z,
                    z_prime,
                    v,
                    level: state.level,
                    x,
                    iteration: state.iteration + 1,
                    region: state.region.clone(),
                    last_step: StepKind::Av,
                });
            }
        }
        alpha *= params.backtrack;
    }
    Err(Error::AvStalled)
}

/// Result of (l↓).
#[derive(Clone, Debug)]
pub struct LevelDown {
    pub level: f64,
    /// Minimizer of `f` along the descent direction.
    pub x: Vector,
    /// Section of level `level` along `v` through `x`.
    pub section: LineSection,
}

/// (l↓): from a line maximum `x` of `f` along `v`, minimize along
/// `d = −(I − vvᵀ)∇f(x)` and take the minimum value as the new level.
pub fn step_l_down(
    obj: &Objective,
    x: &Vector,
    v: &Vector,
    region: &TrustRegion,
    params: &StepParams,
) -> Result<LevelDown> {
    let tol = &params.tolerances;
    let (fx, grad) = obj.eval_value_gradient(x)?;
    let gnorm = grad.norm();
    let slope = grad.dot(v);
    if slope.abs() > tol.grad_tol_1d * (1.0 + gnorm) {
        return Err(Error::NotLineMax { slope });
    }
    let d = -project_out(&grad, v);
    let dnorm = d.norm();
    if dnorm <= 1e-12 * (1.0 + gnorm) {
        return Err(Error::CriticalCandidate);
    }
    let d = d / dnorm;
    let m = line_local_min(obj, x, &d, region, tol)?;
    let level = m.value;
    if !(level < fx) {
        return Err(Error::BadDirection { slope: -dnorm });
    }
    let x_new = x + &d * m.t;
    let section = find_level_crossings(obj, &x_new, v, level, region, tol)?;
    if section.is_empty() {
        // f(x_new) = level, so the section can only be empty through rounding.
        let t = section.line_max.t;
        let section = LineSection {
            kind: SectionKind::Segment {
                t1: t.min(0.0),
                t2: t.max(0.0),
            },
            ..section
        };
        return Ok(LevelDown {
            level,
            x: x_new,
            section,
        });
    }
    Ok(LevelDown {
        level,
        x: x_new,
        section,
    })
}

/// (l↑): raise the level to `f((z + z')/2)` and re-solve the endpoints along `v`.
pub fn step_l_up(state: &SolverState, obj: &Objective, params: &StepParams) -> Result<SolverState> {
    let mid = state.midpoint();
    let level = obj.eval_value(&mid)?;
    if !(level > state.level) {
        return Err(Error::LUpImpossible);
    }
    let section = find_level_crossings(obj, &mid, &state.v, level, &state.region, &params.tolerances)?;
    SolverState::from_section(&section, state.region.clone(), state.iteration + 1, StepKind::LUp)
        .ok_or(Error::LUpImpossible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::builtin;
    use crate::quadmodel::QuadraticModel;
    use crate::Matrix;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    fn saddle2() -> Objective {
        let h = Matrix::from_diagonal(&v2(1.0, -1.0));
        Objective::quadratic(QuadraticModel::new(h, Vector::zeros(2), 0.0).unwrap())
    }

    fn region() -> TrustRegion {
        TrustRegion::new(Vector::zeros(2), 10.0).unwrap()
    }

    fn state(z: Vector, zp: Vector, level: f64) -> SolverState {
        let chord = (&z - &zp).norm();
        let v = (&z - &zp) / chord;
        let x = (&z + &zp) * 0.5;
        SolverState {
            z,
            z_prime: zp,
            v,
            level,
            x,
            iteration: 0,
            region: region(),
            last_step: StepKind::Init,
        }
    }

    #[test]
    fn pd_newton_lands_on_saddle_axis() {
        let r2 = 2f64.sqrt();
        let s = state(v2(1.0, r2), v2(1.0, -r2), -0.5);
        let out = step_pd(&s, &saddle2(), &StepParams::default()).unwrap();
        let PdOutcome::ReducedSegment {
            state: next,
            g_before,
            g_after,
            direction,
        } = out
        else {
            panic!("expected reduced segment, got {out:?}")
        };
        assert_eq!(direction, DirectionKind::Newton);
        assert!((g_before - 2.0 * r2).abs() < 1e-12);
        assert!((g_after - 2.0).abs() < 1e-10);
        assert!((&next.z - v2(0.0, 1.0)).amax() < 1e-10);
        assert!((&next.z_prime - v2(0.0, -1.0)).amax() < 1e-10);
        assert!(next.midpoint().amax() < 1e-10);
    }

    #[test]
    fn pd_from_offset_start_decreases_g2() {
        // l = −0.25: g²(x) = 4(x₁² + 0.5)
        let f = saddle2();
        let l = -0.25;
        let t = (2.0 * (0.01 - 2.0 * l) / 2.0f64).sqrt();
        let s = state(v2(0.1, t), v2(0.1, -t), l);
        let g2_closed = |x1: f64| 4.0 * (x1 * x1 - 2.0 * l);
        assert!(((2.0 * t).powi(2) - g2_closed(0.1)).abs() < 1e-12);
        let PdOutcome::ReducedSegment {
            state: next, g_after, ..
        } = step_pd(&s, &f, &StepParams::default()).unwrap()
        else {
            panic!("expected reduced segment")
        };
        let x1 = next.midpoint()[0];
        assert!(g_after * g_after < g2_closed(0.1));
        assert!((g_after * g_after - g2_closed(x1)).abs() < 1e-9);
    }

    #[test]
    fn pd_hits_zero_above_saddle_level() {
        // At l slightly above the saddle value the section closes once x₁ = 0.
        let f = saddle2();
        let l = 0.02;
        let t = (0.25f64 - 2.0 * l).sqrt();
        let s = state(v2(0.5, t), v2(0.5, -t), l);
        match step_pd(&s, &f, &StepParams::default()).unwrap() {
            PdOutcome::HitZero { peak_value, .. } => assert!(peak_value <= l + 1e-10),
            other => panic!("expected HitZero, got {other:?}"),
        }
    }

    #[test]
    fn av_shortens_hyperbola_chord() {
        let f = saddle2();
        let y = 1.25f64.sqrt();
        let mut s = state(v2(0.5, y), v2(-0.5, -y), -0.5);
        let mut chord = s.chord();
        for _ in 0..50 {
            match step_av(&s, &f, &StepParams::default()) {
                Ok(next) => {
                    assert!(next.chord() < chord);
                    assert!((f.eval_value(&next.z).unwrap() + 0.5).abs() <= 1e-10);
                    assert!((f.eval_value(&next.z_prime).unwrap() + 0.5).abs() <= 1e-10);
                    chord = next.chord();
                    s = next;
                }
                Err(Error::AvStalled) => break,
                Err(e) => panic!("{e}"),
            }
        }
        // The shortest chord joins the vertices (0, ±1).
        assert!((chord - 2.0).abs() < 1e-3, "{chord}");
        assert!(s.v[0].abs() < 0.05, "{:?}", s.v);
    }

    #[test]
    fn av_stalls_on_optimal_chord() {
        let s = state(v2(0.0, 1.0), v2(0.0, -1.0), -0.5);
        assert!(matches!(
            step_av(&s, &saddle2(), &StepParams::default()),
            Err(Error::AvStalled)
        ));
    }

    #[test]
    fn av_camel_monotone() {
        let f = builtin("six_hump_camel").unwrap();
        let params = StepParams::default();
        let reg = region();
        let v = v2(0.3, 1.0).normalize();
        let sec = find_level_crossings(&f, &v2(0.05, 0.0), &v, -0.1, &reg, &params.tolerances).unwrap();
        let mut s = SolverState::from_section(&sec, reg, 0, StepKind::Init).unwrap();
        let mut chord = s.chord();
        for _ in 0..10 {
            match step_av(&s, &f, &params) {
                Ok(next) => {
                    assert!(next.chord() < chord);
                    chord = next.chord();
                    s = next;
                }
                Err(Error::AvStalled) => break,
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn l_down_on_saddle_quadratic() {
        let out = step_l_down(
            &saddle2(),
            &v2(1.0, 0.0),
            &v2(0.0, 1.0),
            &region(),
            &StepParams::default(),
        )
        .unwrap();
        assert!(out.level.abs() < 1e-18);
        assert!(out.x.amax() < 1e-9);
        assert!(out.section.diam() < 1e-8);
    }

    #[test]
    fn l_down_critical_candidate() {
        // f = x₁² + x₂² at (0.5, 1): slope 1 along v = e₁.
        let h = Matrix::from_diagonal(&v2(2.0, 2.0));
        let f = Objective::quadratic(QuadraticModel::new(h, Vector::zeros(2), 0.0).unwrap());
        let r = step_l_down(&f, &v2(0.5, 1.0), &v2(1.0, 0.0), &region(), &StepParams::default());
        assert!(matches!(r, Err(Error::NotLineMax { .. })));
        let r = step_l_down(
            &saddle2(),
            &v2(0.0, 0.0),
            &v2(0.0, 1.0),
            &region(),
            &StepParams::default(),
        );
        assert!(matches!(r, Err(Error::CriticalCandidate)));
    }

    #[test]
    fn l_up_to_midpoint_value() {
        let f = saddle2();
        let r3 = 3f64.sqrt();
        let s = state(v2(1.0, r3), v2(1.0, -r3), -1.0);
        let next = step_l_up(&s, &f, &StepParams::default()).unwrap();
        assert_eq!(next.level, 0.5);
        assert!(next.chord() < 1e-12);
        assert_eq!(next.v, s.v);

        let r6 = 6f64.sqrt();
        let s = state(v2(2.0, r6), v2(2.0, -r6), -1.0);
        let next = step_l_up(&s, &f, &StepParams::default()).unwrap();
        assert_eq!(next.level, 2.0);
        assert!((next.midpoint() - v2(2.0, 0.0)).amax() < 1e-12);
    }

    #[test]
    fn l_up_impossible_when_midpoint_is_low() {
        // Chord across a valley: midpoint below the endpoints.
        let h = Matrix::from_diagonal(&v2(2.0, 2.0));
        let f = Objective::quadratic(QuadraticModel::new(h, Vector::zeros(2), 0.0).unwrap());
        let s = state(v2(1.0, 0.0), v2(-1.0, 0.0), 1.0);
        assert!(matches!(
            step_l_up(&s, &f, &StepParams::default()),
            Err(Error::LUpImpossible)
        ));
    }
}
