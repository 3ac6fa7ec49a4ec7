//! Outer loop of the level-set saddle search.
//!
//! Each iteration runs (PD) and then (Av) after sufficient decrease, (l↑)
//! after little decrease, or (l↓) when the section closes. The search stops
//! once a Morse-1 critical point has been certified by a Newton polish.

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::line1d::{brent_root, crossing_between, line_local_max};
use crate::objective::{EvalCounts, Objective, TrustRegion};
use crate::quadmodel::{decompose, morse_index, newton_refine, NewtonResult};
use crate::subroutines::{step_av, step_l_down, step_l_up, step_pd, PdOutcome, SolverState, StepKind, StepParams};
use crate::{Error, Result, Vector};

/// Consecutive failed iterations before the search gives up.
const MAX_FAILURES: usize = 3;
/// Intervals used to locate the maximum of `f` between the two endpoints.
const INIT_SCAN: usize = 64;
/// Samples of `‖∇f‖` along the final chord.
const HULL_SAMPLES: usize = 11;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    /// Target `‖∇f(x*)‖`.
    pub gtol: f64,
    /// Chord length below which the hull test is tried.
    pub xtol: f64,
    /// Distance from the origin to the segment `[∇f(z'), ∇f(z)]`.
    pub hull_tol: f64,
    /// Relative decrease of `g` that counts as sufficient.
    pub eta: f64,
    pub max_iter: usize,
    /// Trust-region radius around the midpoint of the endpoints.
    pub radius: f64,
    /// Chord length below which Newton's method is tried from the midpoint.
    pub newton_handoff_gap: f64,
    pub newton_max_iter: usize,
    pub steps: StepParams,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            gtol: 1e-8,
            xtol: 1e-6,
            hull_tol: 1e-6,
            eta: 0.05,
            max_iter: 500,
            radius: 10.0,
            newton_handoff_gap: 1e-2,
            newton_max_iter: 50,
            steps: StepParams::default(),
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gtol", self.gtol),
            ("xtol", self.xtol),
            ("hull_tol", self.hull_tol),
            ("radius", self.radius),
            ("root_tol", self.steps.tolerances.root_tol),
            ("grad_tol_1d", self.steps.tolerances.grad_tol_1d),
            ("denom_tol", self.steps.tolerances.denom_tol),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eta must lie in (0, 1), got {}",
                self.eta
            )));
        }
        if !(self.steps.backtrack > 0.0 && self.steps.backtrack < 1.0) {
            return Err(Error::InvalidConfig("backtrack must lie in (0, 1)".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    SaddleFound,
    Stalled,
    MaxIter,
    Breakdown,
}

/// One accepted step of the search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub kind: StepKind,
    pub level: f64,
    /// `‖z − z'‖`.
    pub g: f64,
    /// Chord midpoint, or the Newton point for `Newton` records.
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub z_prime: Vec<f64>,
    pub grad_norm_z: f64,
    pub grad_norm_z_prime: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub function: String,
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub morse_index: usize,
    pub iterations: usize,
    pub counts: EvalCounts,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub report: SolveReport,
    pub trace: Vec<TraceRecord>,
}

/// Distance from the origin to the segment joining `g1` and `g2`.
pub fn hull_distance(g1: &Vector, g2: &Vector) -> f64 {
    let d = g1 - g2;
    let dd = d.norm_squared();
    if dd == 0.0 {
        return g1.norm();
    }
    let lambda = (-g2.dot(&d) / dd).clamp(0.0, 1.0);
    (g2 + d * lambda).norm()
}

/// Starting state from two endpoints `a ≠ b`: the level is `max(f(a), f(b))`
/// and the chord spans the super-level component around the maximum of `f`
/// on `[a, b]`.
pub fn init_state(obj: &Objective, a: &Vector, b: &Vector, cfg: &SolveConfig) -> Result<SolverState> {
    let n = obj.dim();
    for p in [a, b] {
        if p.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.len(),
            });
        }
    }
    let diff = a - b;
    let len = diff.norm();
    if !(len > 0.0) {
        return Err(Error::BadEndpoints("endpoints coincide".into()));
    }
    let center = (a + b) * 0.5;
    let region = TrustRegion::new(center, cfg.radius)?;
    if 0.5 * len > cfg.radius {
        return Err(Error::BadEndpoints("endpoints lie outside the trust region".into()));
    }
    let v = diff / len;
    let fa = obj.eval_value(a)?;
    let fb = obj.eval_value(b)?;
    let level = fa.max(fb);

    let at = |s: f64| b + &v * s;
    let mut values = Vec::with_capacity(INIT_SCAN + 1);
    for k in 0..=INIT_SCAN {
        let s = len * k as f64 / INIT_SCAN as f64;
        values.push(if k == 0 {
            fb
        } else if k == INIT_SCAN {
            fa
        } else {
            obj.eval_value(&at(s))?
        });
    }
    let k = (1..INIT_SCAN)
        .max_by(|&i, &j| values[i].total_cmp(&values[j]))
        .expect("scan has interior points");
    if !(values[k] > level) {
        return Err(Error::BadEndpoints(
            "f does not rise above max(f(a), f(b)) between the endpoints".into(),
        ));
    }
    let step = len / INIT_SCAN as f64;
    let (s_lo, s_hi) = ((k - 1) as f64 * step, (k + 1) as f64 * step);
    let slope = |s: f64| -> Result<f64> { Ok(obj.eval_gradient(&at(s))?.dot(&v)) };
    let (d_lo, d_hi) = (slope(s_lo)?, slope(s_hi)?);
    let s_peak = if d_lo > 0.0 && d_hi < 0.0 {
        brent_root(slope, s_lo, s_hi, d_lo, d_hi, cfg.steps.tolerances.grad_tol_1d)?.0
    } else {
        k as f64 * step
    };
    let s_peak = if obj.eval_value(&at(s_peak))? >= values[k] {
        s_peak
    } else {
        k as f64 * step
    };

    let s_up = crossing_between(obj, b, &v, level, s_peak, len)?;
    let s_down = crossing_between(obj, b, &v, level, s_peak, 0.0)?;
    let z = at(s_up);
    let z_prime = at(s_down);
    let x = (&z + &z_prime) * 0.5;
    Ok(SolverState {
        z,
        z_prime,
        v,
        level,
        x,
        iteration: 0,
        region,
        last_step: StepKind::Init,
    })
}

enum Step {
    Progress,
    Failed(String),
    Done(Finish),
}

struct Finish {
    status: SolveStatus,
    x: Vector,
    message: Option<String>,
}

struct Run<'a> {
    obj: &'a Objective,
    cfg: &'a SolveConfig,
    trace: Vec<TraceRecord>,
    iter: usize,
    handoff_gap: f64,
}

impl Run<'_> {
    fn record(&mut self, state: &SolverState, kind: StepKind) {
        debug!(
            "iter {} {:?}: level {:.12e} chord {:.6e}",
            self.iter,
            kind,
            state.level,
            state.chord()
        );
        let grad_norm = |p: &Vector| self.obj.eval_gradient(p).map_or(f64::NAN, |g| g.norm());
        let (grad_norm_z, grad_norm_z_prime) = (grad_norm(&state.z), grad_norm(&state.z_prime));
        self.trace.push(TraceRecord {
            iter: self.iter,
            kind,
            level: state.level,
            g: state.chord(),
            x: state.midpoint().as_slice().to_vec(),
            z: state.z.as_slice().to_vec(),
            z_prime: state.z_prime.as_slice().to_vec(),
            grad_norm_z,
            grad_norm_z_prime,
        });
    }

    /// Newton from `x`; accepted only at a Morse-1 point with `‖∇f‖ ≤ gtol`.
    fn polish(&mut self, x: &Vector, region: &TrustRegion) -> Option<NewtonResult> {
        let r = newton_refine(self.obj, x, region, self.cfg.gtol, self.cfg.newton_max_iter);
        self.obj.reset_smallest_gradient();
        match r {
            Ok(r) if r.is_saddle() && region.contains(&r.x) => {
                let p = r.x.as_slice().to_vec();
                self.trace.push(TraceRecord {
                    iter: self.iter,
                    kind: StepKind::Newton,
                    level: r.value,
                    g: 0.0,
                    x: p.clone(),
                    z: p.clone(),
                    z_prime: p,
                    grad_norm_z: r.grad_norm,
                    grad_norm_z_prime: r.grad_norm,
                });
                Some(r)
            }
            Ok(r) => {
                debug!(
                    "newton polish rejected: status {:?}, index {}, |g| {:.3e}",
                    r.status, r.morse_index, r.grad_norm
                );
                None
            }
            Err(e) => {
                debug!("newton polish failed: {e}");
                None
            }
        }
    }

    fn saddle(&mut self, x: &Vector, region: &TrustRegion) -> Option<Finish> {
        self.polish(x, region).map(|r| Finish {
            status: SolveStatus::SaddleFound,
            x: r.x,
            message: None,
        })
    }

    fn level_down(&mut self, state: &mut SolverState, peak: &Vector) -> Step {
        match step_l_down(self.obj, peak, &state.v, &state.region, &self.cfg.steps) {
            Ok(out) => {
                match SolverState::from_section(&out.section, state.region.clone(), self.iter, StepKind::LDown) {
                    Some(next) => {
                        *state = next;
                        self.record(state, StepKind::LDown);
                        Step::Progress
                    }
                    None => Step::Failed("empty section after lowering the level".into()),
                }
            }
            Err(Error::CriticalCandidate) => match self.saddle(peak, &state.region.clone()) {
                Some(f) => Step::Done(f),
                None => Step::Failed("critical candidate is not a saddle".into()),
            },
            Err(e) => Step::Failed(format!("lowering the level: {e}")),
        }
    }

    /// Raises the level; if the midpoint is not above it, lowers the level
    /// from the line maximum through the midpoint instead.
    fn raise_or_lower(&mut self, state: &mut SolverState) -> Step {
        match step_l_up(state, self.obj, &self.cfg.steps) {
            Ok(next) => {
                *state = next;
                self.record(state, StepKind::LUp);
                Step::Progress
            }
            Err(Error::LUpImpossible) => {
                let mid = state.midpoint();
                match line_local_max(self.obj, &mid, &state.v, &state.region, &self.cfg.steps.tolerances) {
                    Ok(m) => {
                        let peak = &mid + &state.v * m.t;
                        self.level_down(state, &peak)
                    }
                    Err(e) => Step::Failed(format!("line maximum through the midpoint: {e}")),
                }
            }
            Err(e) => Step::Failed(format!("raising the level: {e}")),
        }
    }

    fn iterate(&mut self, state: &mut SolverState) -> Step {
        if state.chord() <= 0.0 {
            let x = state.x.clone();
            return self.level_down(state, &x);
        }
        match step_pd(state, self.obj, &self.cfg.steps) {
            Ok(PdOutcome::ReducedSegment {
                state: next,
                g_before,
                g_after,
                ..
            }) => {
                *state = next;
                state.iteration = self.iter;
                self.record(state, StepKind::PD);
                if g_after <= (1.0 - self.cfg.eta) * g_before {
                    match step_av(state, self.obj, &self.cfg.steps) {
                        Ok(next) => {
                            *state = next;
                            self.record(state, StepKind::Av);
                        }
                        Err(e) => debug!("Av skipped: {e}"),
                    }
                } else if let Ok(next) = step_l_up(state, self.obj, &self.cfg.steps) {
                    *state = next;
                    self.record(state, StepKind::LUp);
                }
                Step::Progress
            }
            Ok(PdOutcome::HitZero { peak, .. }) => self.level_down(state, &peak),
            Ok(PdOutcome::Stalled { .. }) => match self.raise_or_lower(state) {
                Step::Progress => Step::Progress,
                Step::Failed(m) => Step::Failed(format!("PD stalled; {m}")),
                done => done,
            },
            Err(Error::DegenerateDenominator { denom }) => match self.raise_or_lower(state) {
                Step::Failed(m) => Step::Failed(format!("tangent endpoint ({denom:.3e}); {m}")),
                other => other,
            },
            Err(e @ Error::CrossingOutsideRegion) => match self.raise_or_lower(state) {
                Step::Failed(m) => Step::Failed(format!("{e}; {m}")),
                other => other,
            },
            Err(e) => Step::Failed(format!("PD: {e}")),
        }
    }

    /// Stopping tests run after every iteration.
    fn check_stop(&mut self, state: &SolverState) -> Option<Finish> {
        if let Some(seen) = self.obj.take_smallest_gradient() {
            if seen.norm <= self.cfg.gtol {
                if let Some(f) = self.saddle(&seen.x, &state.region) {
                    return Some(f);
                }
            }
        }
        let chord = state.chord();
        if chord <= self.cfg.xtol {
            let gz = self.obj.eval_gradient(&state.z).ok()?;
            let gzp = self.obj.eval_gradient(&state.z_prime).ok()?;
            if hull_distance(&gz, &gzp) <= self.cfg.hull_tol {
                let mut best: Option<(f64, Vector)> = None;
                for k in 0..HULL_SAMPLES {
                    let s = k as f64 / (HULL_SAMPLES - 1) as f64;
                    let p = &state.z_prime + (&state.z - &state.z_prime) * s;
                    let Ok(g) = self.obj.eval_gradient(&p) else { continue };
                    if best.as_ref().is_none_or(|(n, _)| g.norm() < *n) {
                        best = Some((g.norm(), p));
                    }
                }
                let (_, p) = best?;
                return Some(self.saddle(&p, &state.region).unwrap_or(Finish {
                    status: SolveStatus::Stalled,
                    x: p,
                    message: Some("chord collapsed without a certified saddle".into()),
                }));
            }
        }
        if chord < self.handoff_gap {
            if let Some(f) = self.saddle(&state.midpoint(), &state.region) {
                return Some(f);
            }
            self.handoff_gap = 0.5 * chord;
        }
        None
    }
}

fn report(obj: &Objective, finish: Finish, iterations: usize) -> Result<SolveReport> {
    let (value, grad) = obj.eval_value_gradient(&finish.x)?;
    let index = morse_index(&decompose(&obj.eval_hessian(&finish.x)?)?);
    Ok(SolveReport {
        function: obj.name().to_string(),
        status: finish.status,
        x: finish.x.as_slice().to_vec(),
        value,
        grad_norm: grad.norm(),
        morse_index: index,
        iterations,
        counts: obj.counts(),
        message: finish.message,
    })
}

/// Searches for a mountain pass saddle between `a` and `b`.
///
/// Evaluation counters of `obj` are reset first. Errors are returned only for
/// invalid input; numerical trouble during the search ends it with
/// [`SolveStatus::Breakdown`].
pub fn solve(obj: &Objective, a: &Vector, b: &Vector, cfg: &SolveConfig) -> Result<SolveOutput> {
    cfg.validate()?;
    obj.reset_smallest_gradient();
    obj.reset_counts();
    let mut state = init_state(obj, a, b, cfg)?;
    let mut run = Run {
        obj,
        cfg,
        trace: Vec::new(),
        iter: 0,
        handoff_gap: cfg.newton_handoff_gap,
    };
    run.record(&state, StepKind::Init);
    info!("start: level {:.12e}, chord {:.6e}", state.level, state.chord());

    let mut failures = 0;
    let mut finish = None;
    if let Some(f) = run.check_stop(&state) {
        finish = Some(f);
    }
    while finish.is_none() && run.iter < cfg.max_iter {
        run.iter += 1;
        match run.iterate(&mut state) {
            Step::Progress => failures = 0,
            Step::Failed(msg) => {
                failures += 1;
                debug!("iter {} failed ({failures}): {msg}", run.iter);
                if failures >= MAX_FAILURES {
                    finish = Some(Finish {
                        status: SolveStatus::Breakdown,
                        x: state.midpoint(),
                        message: Some(msg),
                    });
                    break;
                }
            }
            Step::Done(f) => {
                finish = Some(f);
                break;
            }
        }
        finish = run.check_stop(&state);
    }
    let finish = finish.unwrap_or_else(|| Finish {
        status: SolveStatus::MaxIter,
        x: state.midpoint(),
        message: Some(format!("no saddle after {} iterations", cfg.max_iter)),
    });
    info!("finished after {} iterations: {:?}", run.iter, finish.status);
    let report = report(obj, finish, run.iter)?;
    Ok(SolveOutput {
        report,
        trace: run.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::builtin;
    use crate::quadmodel::{generate_morse1, QuadraticModel};
    use crate::Matrix;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    #[test]
    fn hull_distance_examples() {
        assert_eq!(hull_distance(&v2(1.0, 0.0), &v2(-1.0, 0.0)), 0.0);
        assert!((hull_distance(&v2(1.0, 1.0), &v2(-1.0, 1.0)) - 1.0).abs() < 1e-15);
        assert!((hull_distance(&v2(1.0, 0.0), &v2(2.0, 0.0)) - 1.0).abs() < 1e-15);
        assert!((hull_distance(&v2(3.0, 4.0), &v2(3.0, 4.0)) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn init_rejects_equal_endpoints() {
        let f = builtin("six_hump_camel").unwrap();
        let a = v2(0.1, 0.2);
        let r = init_state(&f, &a, &a, &SolveConfig::default());
        assert!(matches!(r, Err(Error::BadEndpoints(_))));
    }

    #[test]
    fn init_rejects_monotone_segment() {
        let f = builtin("six_hump_camel").unwrap();
        let r = init_state(&f, &v2(0.0, 0.0), &v2(0.5, 0.0), &SolveConfig::default());
        assert!(matches!(r, Err(Error::BadEndpoints(_))));
    }

    #[test]
    fn init_on_saddle_quadratic() {
        let h = Matrix::from_diagonal(&v2(1.0, -1.0));
        let f = Objective::quadratic(QuadraticModel::new(h, Vector::zeros(2), 0.0).unwrap());
        let s = init_state(&f, &v2(0.5, 2.0), &v2(0.5, -3.0), &SolveConfig::default()).unwrap();
        assert_eq!(s.level, 0.125 - 2.0);
        assert!((s.z[1] - 2.0).abs() < 1e-12);
        assert!((s.z_prime[1] + 2.0).abs() < 1e-9);
        assert!((f.eval_value(&s.z_prime).unwrap() - s.level).abs() <= 1e-10);
    }

    #[test]
    fn saddle_quadratic_solves() {
        let h = Matrix::from_diagonal(&v2(1.0, -1.0));
        let f = Objective::quadratic(QuadraticModel::new(h, v2(0.0, 1.0), 0.0).unwrap());
        let out = solve(&f, &v2(0.3, 3.0), &v2(-0.2, -2.0), &SolveConfig::default()).unwrap();
        assert_eq!(out.report.status, SolveStatus::SaddleFound, "{:?}", out.report);
        assert!((Vector::from_vec(out.report.x.clone()) - v2(0.0, 1.0)).amax() < 1e-8);
        assert!((out.report.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn random_quadratic_small() {
        let m = generate_morse1(3, 7, (1.0, 4.0)).unwrap();
        let (xs, _) = m.saddle().unwrap();
        let w = m.negative_eigenvector();
        let f = Objective::quadratic(m);
        let a = &xs + &w * 1.5;
        let b = &xs - &w * 1.5;
        let out = solve(&f, &a, &b, &SolveConfig::default()).unwrap();
        assert_eq!(out.report.status, SolveStatus::SaddleFound, "{:?}", out.report);
        assert!((Vector::from_vec(out.report.x) - xs).amax() < 1e-8);
    }

    #[test]
    fn camel_between_global_minima() {
        let f = builtin("six_hump_camel").unwrap();
        let out = solve(&f, &v2(0.0898, -0.7126), &v2(-0.0898, 0.7126), &SolveConfig::default()).unwrap();
        assert_eq!(out.report.status, SolveStatus::SaddleFound, "{:?}", out.report);
        assert_eq!(out.report.morse_index, 1);
        assert!(out.report.grad_norm <= 1e-8);
    }

    #[test]
    fn trace_starts_with_init_and_levels_are_finite() {
        let f = builtin("six_hump_camel").unwrap();
        let out = solve(&f, &v2(-0.0898, 0.7126), &v2(-1.7036, 0.7961), &SolveConfig::default()).unwrap();
        assert_eq!(out.trace[0].kind, StepKind::Init);
        assert!(out.trace.iter().all(|r| r.level.is_finite() && r.g >= 0.0));
    }

    #[test]
    fn config_rejects_bad_values() {
        let cfg = SolveConfig {
            eta: 1.5,
            ..SolveConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        let cfg = SolveConfig {
            gtol: 0.0,
            ..SolveConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        let bad: std::result::Result<SolveConfig, _> = serde_json::from_str(r#"{"gtoll": 1e-3}"#);
        assert!(bad.is_err());
        let ok: SolveConfig = serde_json::from_str(r#"{"gtol": 1e-6}"#).unwrap();
        assert_eq!(ok.gtol, 1e-6);
        assert_eq!(ok.max_iter, 500);
    }
}
