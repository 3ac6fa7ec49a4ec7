//! The function under study.
//!
//! [`Objective`] wraps any [`Function`] with evaluation counters, finite-difference
//! fallbacks for missing derivatives, and a record of the smallest gradient seen
//! (the driver stops as soon as any evaluated gradient is small enough).

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::linalg::symmetrize;
use crate::quadmodel::QuadraticModel;
use crate::{Error, Matrix, Result, Vector};

/// A smooth function `f: Rⁿ → R`.
///
/// Only `value` is mandatory. Missing gradients and Hessians are produced by
/// central finite differences in [`Objective`].
pub trait Function: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &Vector) -> f64;

    fn gradient(&self, _x: &Vector) -> Option<Vector> {
        None
    }

    fn hessian(&self, _x: &Vector) -> Option<Matrix> {
        None
    }
}

/// Evaluation counts, one per `eval_*` call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub value: u64,
    pub gradient: u64,
    pub hessian: u64,
}

#[derive(Default)]
struct Counters {
    value: AtomicU64,
    gradient: AtomicU64,
    hessian: AtomicU64,
}

/// Smallest gradient norm observed since the last reset.
#[derive(Clone, Debug)]
pub struct GradientSighting {
    pub norm: f64,
    pub x: Vector,
}

pub struct Objective {
    name: String,
    func: Arc<dyn Function>,
    counters: Counters,
    sighting: Mutex<Option<GradientSighting>>,
}

impl std::fmt::Debug for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("counts", &self.counts())
            .finish()
    }
}

/// Central-difference gradient step `1e-6·max(1, ‖x‖∞)`.
pub fn gradient_fd_step(x: &Vector) -> f64 {
    1e-6 * x.amax().max(1.0)
}

/// Central-difference Hessian step `1e-4·max(1, ‖x‖∞)`.
pub fn hessian_fd_step(x: &Vector) -> f64 {
    1e-4 * x.amax().max(1.0)
}

/// Central finite-difference gradient of a scalar function with step `h`.
pub fn fd_gradient(f: impl Fn(&Vector) -> f64, x: &Vector, h: f64) -> Vector {
    let mut out = Vector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        out[i] = (fp - fm) / (2.0 * h);
    }
    out
}

/// Central finite-difference Jacobian of a vector function, symmetrized.
pub fn fd_hessian_from_gradient(grad: impl Fn(&Vector) -> Vector, x: &Vector, h: f64) -> Matrix {
    let n = x.len();
    let mut out = Matrix::zeros(n, n);
    let mut xp = x.clone();
    for j in 0..n {
        xp[j] = x[j] + h;
        let gp = grad(&xp);
        xp[j] = x[j] - h;
        let gm = grad(&xp);
        xp[j] = x[j];
        out.set_column(j, &((gp - gm) / (2.0 * h)));
    }
    symmetrize(&out)
}

fn check_finite_vec(what: &'static str, x: &Vector, v: &Vector) -> Result<()> {
    if v.iter().all(|e| e.is_finite()) {
        Ok(())
    } else {
        Err(Error::Evaluation {
            what,
            x: x.as_slice().to_vec(),
        })
    }
}

impl Objective {
    pub fn new(name: impl Into<String>, func: Arc<dyn Function>) -> Self {
        assert!(func.dim() >= 1, "objective dimension must be positive");
        Self {
            name: name.into(),
            func,
            counters: Counters::default(),
            sighting: Mutex::new(None),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.func.dim()
    }

    pub fn counts(&self) -> EvalCounts {
        EvalCounts {
            value: self.counters.value.load(Ordering::Relaxed),
            gradient: self.counters.gradient.load(Ordering::Relaxed),
            hessian: self.counters.hessian.load(Ordering::Relaxed),
        }
    }

    pub fn reset_counts(&self) {
        self.counters.value.store(0, Ordering::Relaxed);
        self.counters.gradient.store(0, Ordering::Relaxed);
        self.counters.hessian.store(0, Ordering::Relaxed);
    }

    /// Smallest gradient norm seen by [`Objective::eval_gradient`] since the last reset.
    pub fn smallest_gradient(&self) -> Option<GradientSighting> {
        self.sighting.lock().expect("sighting lock").clone()
    }

    pub fn reset_smallest_gradient(&self) {
        *self.sighting.lock().expect("sighting lock") = None;
    }

    /// Returns the smallest gradient sighting and clears it.
    pub fn take_smallest_gradient(&self) -> Option<GradientSighting> {
        self.sighting.lock().expect("sighting lock").take()
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            })
        }
    }

    fn raw_gradient(&self, x: &Vector) -> Vector {
        self.func
            .gradient(x)
            .unwrap_or_else(|| fd_gradient(|y| self.func.value(y), x, gradient_fd_step(x)))
    }

    pub fn eval_value(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        self.counters.value.fetch_add(1, Ordering::Relaxed);
        let v = self.func.value(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation {
                what: "value",
                x: x.as_slice().to_vec(),
            })
        }
    }

    pub fn eval_gradient(&self, x: &Vector) -> Result<Vector> {
        self.check_dim(x)?;
        self.counters.gradient.fetch_add(1, Ordering::Relaxed);
        let g = self.raw_gradient(x);
        if g.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: g.len(),
            });
        }
        check_finite_vec("gradient", x, &g)?;
        let norm = g.norm();
        let mut slot = self.sighting.lock().expect("sighting lock");
        if slot.as_ref().is_none_or(|s| norm < s.norm) {
            *slot = Some(GradientSighting { norm, x: x.clone() });
        }
        Ok(g)
    }

    /// Analytic Hessian when the function supplies one, otherwise central
    /// differences of the gradient. Always exactly symmetric.
    pub fn eval_hessian(&self, x: &Vector) -> Result<Matrix> {
        self.check_dim(x)?;
        self.counters.hessian.fetch_add(1, Ordering::Relaxed);
        let h = match self.func.hessian(x) {
            Some(h) => symmetrize(&h),
            None => fd_hessian_from_gradient(|y| self.raw_gradient(y), x, hessian_fd_step(x)),
        };
        let n = self.dim();
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: h.nrows(),
            });
        }
        if h.iter().all(|e| e.is_finite()) {
            Ok(h)
        } else {
            Err(Error::Evaluation {
                what: "hessian",
                x: x.as_slice().to_vec(),
            })
        }
    }

    /// Value and gradient in one call (counts as one of each).
    pub fn eval_value_gradient(&self, x: &Vector) -> Result<(f64, Vector)> {
        Ok((self.eval_value(x)?, self.eval_gradient(x)?))
    }

    /// Hessian by finite differences even when an analytic one exists.
    pub fn fd_hessian(&self, x: &Vector) -> Matrix {
        fd_hessian_from_gradient(|y| self.raw_gradient(y), x, hessian_fd_step(x))
    }

    /// Whether the wrapped function supplies its own gradient.
    pub fn has_analytic_gradient(&self) -> bool {
        self.func.gradient(&Vector::zeros(self.dim())).is_some()
    }

    pub fn quadratic(model: QuadraticModel) -> Self {
        Self::new("quadratic", Arc::new(model))
    }
}

/// Ball-shaped trust region; line searches never leave it.
#[derive(Clone, Debug, PartialEq)]
pub struct TrustRegion {
    center: Vector,
    radius: f64,
}

impl TrustRegion {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "trust region radius must be positive, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, x: &Vector) -> bool {
        (x - &self.center).norm() <= self.radius
    }

    /// Parameters `[lo, hi]` with `x + t v` inside the ball, for unit `v`.
    pub fn line_interval(&self, x: &Vector, v: &Vector) -> Option<(f64, f64)> {
        let d = x - &self.center;
        let b = v.dot(&d);
        let c = d.dot(&d) - self.radius * self.radius;
        let disc = b * b - c;
        if disc < 0.0 {
            return None;
        }
        let root = disc.sqrt();
        Some((-b - root, -b + root))
    }

    /// Pulls `x` back onto the ball if it lies outside.
    pub fn clamp(&self, x: &Vector) -> Vector {
        let d = x - &self.center;
        let n = d.norm();
        if n <= self.radius {
            x.clone()
        } else {
            &self.center + d * (self.radius / n)
        }
    }
}

/// Six-hump camel back function.
#[derive(Clone, Copy, Debug, Default)]
pub struct SixHumpCamel;

impl Function for SixHumpCamel {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &Vector) -> f64 {
        let (a, b) = (x[0], x[1]);
        let a2 = a * a;
        (4.0 - 2.1 * a2 + a2 * a2 / 3.0) * a2 + a * b + 4.0 * (b * b - 1.0) * b * b
    }

    fn gradient(&self, x: &Vector) -> Option<Vector> {
        let (a, b) = (x[0], x[1]);
        let a2 = a * a;
        Some(Vector::from_vec(vec![
            8.0 * a - 8.4 * a2 * a + 2.0 * a2 * a2 * a + b,
            a - 8.0 * b + 16.0 * b * b * b,
        ]))
    }

    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        let (a, b) = (x[0], x[1]);
        let a2 = a * a;
        Some(Matrix::from_row_slice(
            2,
            2,
            &[8.0 - 25.2 * a2 + 10.0 * a2 * a2, 1.0, 1.0, -8.0 + 48.0 * b * b],
        ))
    }
}

/// `f(x) = (x₂ − x₁²)(x₁ − x₂²)`, whose zero level set near the origin is not
/// a union of two convex pieces.
#[derive(Clone, Copy, Debug, Default)]
pub struct Tightness2d;

impl Function for Tightness2d {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &Vector) -> f64 {
        let (a, b) = (x[0], x[1]);
        (b - a * a) * (a - b * b)
    }

    fn gradient(&self, x: &Vector) -> Option<Vector> {
        let (a, b) = (x[0], x[1]);
        let p = b - a * a;
        let q = a - b * b;
        Some(Vector::from_vec(vec![-2.0 * a * q + p, q - 2.0 * b * p]))
    }

    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        let (a, b) = (x[0], x[1]);
        let p = b - a * a;
        let q = a - b * b;
        let off = 1.0 + 4.0 * a * b;
        Some(Matrix::from_row_slice(
            2,
            2,
            &[-4.0 * a - 2.0 * q, off, off, -4.0 * b - 2.0 * p],
        ))
    }
}

/// Named builtin objective: `six_hump_camel` or `tightness2d`.
pub fn builtin(name: &str) -> Result<Objective> {
    match name {
        "six_hump_camel" => Ok(Objective::new(name, Arc::new(SixHumpCamel))),
        "tightness2d" => Ok(Objective::new(name, Arc::new(Tightness2d))),
        other => Err(Error::UnknownFunction(other.to_string())),
    }
}
