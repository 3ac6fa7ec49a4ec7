//! Numerical checks of the parallel-distance theory.
//!
//! Every check is seeded and returns a serializable report with a failure count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::linalg::{complement_basis, jacobi_eigen, project_out, symmetrize, Lu};
use crate::line1d::{find_level_crossings, Tolerances};
use crate::objective::{builtin, Objective, TrustRegion};
use crate::pardist::{closed_form_g2_quadratic, eval_pardist, Derivatives};
use crate::quadmodel::{decompose, generate_morse1, morse_index, QuadraticModel};
use crate::{Error, Matrix, Result, Vector};

/// Spectrum magnitudes of the random quadratic models.
const MODEL_SPECTRUM: (f64, f64) = (0.5, 5.0);
/// Floor on the denominator of relative errors.
const REL_FLOOR: f64 = 1e-6;
/// Eigenvalues of `∇²f(x̄)` below this fraction of the largest count as zero;
/// loose enough for finite-difference Hessians.
const DEGENERACY_RATIO: f64 = 1e-6;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal_vector(n: usize, rng: &mut ChaCha8Rng) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn unit_vector(n: usize, rng: &mut ChaCha8Rng) -> Vector {
    loop {
        let w = normal_vector(n, rng);
        let len = w.norm();
        if len > 1e-8 {
            return w / len;
        }
    }
}

/// Uniform point in the ball of radius `r` around `center`.
fn ball_point(center: &Vector, r: f64, rng: &mut ChaCha8Rng) -> Vector {
    let n = center.len();
    let u = unit_vector(n, rng);
    let rho = r * rng.random::<f64>().powf(1.0 / n as f64);
    center + u * rho
}

/// `‖a − b‖_F / max(‖b‖_F, 1e-6)`.
pub fn relative_error(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(REL_FLOOR)
}

fn g2_at(obj: &Objective, x: &Vector, v: &Vector, level: f64, region: &TrustRegion, tol: &Tolerances) -> Result<f64> {
    Ok(eval_pardist(obj, x, v, level, region, Derivatives::None, tol)?.g2)
}

/// Central differences of the root-finding `g²`: gradient with step `1e-5`,
/// Hessian with step `1e-4`, both scaled by `max(1, ‖x‖∞)`.
pub fn fd_g2_derivatives(
    obj: &Objective,
    x: &Vector,
    v: &Vector,
    level: f64,
    region: &TrustRegion,
    tol: &Tolerances,
) -> Result<(Vector, Matrix)> {
    let n = x.len();
    let scale = x.amax().max(1.0);
    let e = |i: usize| Vector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
    let g2 = |p: &Vector| g2_at(obj, p, v, level, region, tol);

    let h1 = 1e-5 * scale;
    let mut grad = Vector::zeros(n);
    for i in 0..n {
        grad[i] = (g2(&(x + e(i) * h1))? - g2(&(x - e(i) * h1))?) / (2.0 * h1);
    }

    let h2 = 1e-4 * scale;
    let center = g2(x)?;
    let mut hess = Matrix::zeros(n, n);
    for i in 0..n {
        let step_i = e(i) * h2;
        hess[(i, i)] = (g2(&(x + &step_i))? - 2.0 * center + g2(&(x - &step_i))?) / (h2 * h2);
        for j in (i + 1)..n {
            let step_j = e(j) * h2;
            let pp = g2(&(x + &step_i + &step_j))?;
            let pm = g2(&(x + &step_i - &step_j))?;
            let mp = g2(&(x - &step_i + &step_j))?;
            let mm = g2(&(x - &step_i - &step_j))?;
            let hij = (pp - pm - mp + mm) / (4.0 * h2 * h2);
            hess[(i, j)] = hij;
            hess[(j, i)] = hij;
        }
    }
    Ok((grad, hess))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradSample {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub level: f64,
    pub g: f64,
    pub grad_rel_err: f64,
    pub hess_rel_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub function: String,
    pub tolerance: f64,
    /// Admissible samples requested.
    pub target: usize,
    pub samples: Vec<GradSample>,
    /// Draws excluded as inadmissible (tangent endpoint, empty section, ...).
    pub skipped: usize,
    pub failures: usize,
    pub max_grad_rel_err: f64,
    pub max_hess_rel_err: f64,
}

impl GradCheckReport {
    fn new(function: &str, tolerance: f64, target: usize) -> Self {
        Self {
            function: function.to_string(),
            tolerance,
            target,
            samples: Vec::new(),
            skipped: 0,
            failures: 0,
            max_grad_rel_err: 0.0,
            max_hess_rel_err: 0.0,
        }
    }

    fn push(&mut self, s: GradSample) {
        self.max_grad_rel_err = self.max_grad_rel_err.max(s.grad_rel_err);
        self.max_hess_rel_err = self.max_hess_rel_err.max(s.hess_rel_err);
        if !(s.grad_rel_err < self.tolerance && s.hess_rel_err < self.tolerance) {
            self.failures += 1;
        }
        self.samples.push(s);
    }

    /// All requested samples were admissible and within tolerance.
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.samples.len() == self.target
    }
}

/// Compares analytic `∇(g²)`, `∇²(g²)` with finite differences at one point.
///
/// Returns `None` when the point is not admissible: empty or point section,
/// a tangent endpoint, or a line search failing nearby.
pub fn grad_check_sample(
    obj: &Objective,
    x: &Vector,
    v: &Vector,
    level: f64,
    region: &TrustRegion,
    tol: &Tolerances,
) -> Option<GradSample> {
    let eval = eval_pardist(obj, x, v, level, region, Derivatives::Hessian, tol).ok()?;
    let (grad, hess) = (eval.grad_g2?, eval.hess_g2?);
    let (fd_grad, fd_hess) = fd_g2_derivatives(obj, x, v, level, region, tol).ok()?;
    let as_col = |u: &Vector| Matrix::from_column_slice(u.len(), 1, u.as_slice());
    Some(GradSample {
        x: x.as_slice().to_vec(),
        v: v.as_slice().to_vec(),
        level,
        g: eval.g,
        grad_rel_err: relative_error(&as_col(&grad), &as_col(&fd_grad)),
        hess_rel_err: relative_error(&hess, &fd_hess),
    })
}

/// How probe points `(x, v, l)` scatter around a saddle `x̄`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbeSpread {
    /// Standard deviation of `x − x̄` per coordinate.
    pub offset: f64,
    /// Standard deviation of the perturbation added to `v̄` before normalizing.
    pub tilt: f64,
    /// `f(x̄) − l` is uniform on this interval.
    pub level_gap: (f64, f64),
}

/// Draws `(x, v, l)` around `center` with `vᵀ∇²f v < 0` for the given Hessian.
fn draw_probe(
    center: &Vector,
    vbar: &Vector,
    hess: &Matrix,
    base_level: f64,
    spread: &ProbeSpread,
    rng: &mut ChaCha8Rng,
) -> (Vector, Vector, f64) {
    let n = center.len();
    let x = center + normal_vector(n, rng) * spread.offset;
    let mut v = vbar.clone();
    for _ in 0..20 {
        let cand = (vbar + normal_vector(n, rng) * spread.tilt).normalize();
        if cand.dot(&(hess * &cand)) < 0.0 {
            v = cand;
            break;
        }
    }
    let level = base_level - rng.random_range(spread.level_gap.0..=spread.level_gap.1);
    (x, v, level)
}

/// Negative eigenvector of `∇²f(x̄)`.
fn negative_direction(h: &Matrix) -> Result<Vector> {
    let e = decompose(h)?;
    Ok(e.vectors.column(e.vectors.ncols() - 1).into_owned())
}

/// Gradient and Hessian formulas of `g²` against finite differences at
/// `count` admissible probes around the critical point `center`.
#[allow(clippy::too_many_arguments)]
pub fn check_grad_formulas(
    obj: &Objective,
    center: &Vector,
    spread: &ProbeSpread,
    region_radius: f64,
    count: usize,
    tolerance: f64,
    seed: u64,
    tol: &Tolerances,
) -> Result<GradCheckReport> {
    let h = obj.eval_hessian(center)?;
    let vbar = negative_direction(&h)?;
    let base = obj.eval_value(center)?;
    let region = TrustRegion::new(center.clone(), region_radius)?;
    let mut rng = rng(seed);
    let mut report = GradCheckReport::new(obj.name(), tolerance, count);
    let max_draws = 20 * count.max(1);
    for _ in 0..max_draws {
        if report.samples.len() == count {
            break;
        }
        let (x, v, level) = draw_probe(center, &vbar, &h, base, spread, &mut rng);
        match grad_check_sample(obj, &x, &v, level, &region, tol) {
            Some(s) => report.push(s),
            None => report.skipped += 1,
        }
    }
    Ok(report)
}

/// One probe on each of `count` random Morse-1 quadratics (`n = 2..6`).
pub fn check_grad_formulas_quadratics(
    count: usize,
    tolerance: f64,
    seed: u64,
    tol: &Tolerances,
) -> Result<GradCheckReport> {
    let mut rng = rng(seed);
    let mut report = GradCheckReport::new("quadratic", tolerance, count);
    let spread = ProbeSpread {
        offset: 0.5,
        tilt: 0.2,
        level_gap: (0.1, 1.0),
    };
    for i in 0..count {
        let model = generate_morse1(2 + i % 5, rng.random(), MODEL_SPECTRUM)?;
        let (xbar, fbar) = model.saddle()?;
        let h = model.h().clone();
        let vbar = model.negative_eigenvector();
        let obj = Objective::quadratic(model);
        let region = TrustRegion::new(xbar.clone(), 100.0)?;
        let mut done = false;
        for _ in 0..20 {
            let (x, v, level) = draw_probe(&xbar, &vbar, &h, fbar, &spread, &mut rng);
            if let Some(s) = grad_check_sample(&obj, &x, &v, level, &region, tol) {
                report.push(s);
                done = true;
                break;
            }
            report.skipped += 1;
        }
        if !done {
            report.failures += 1;
        }
    }
    Ok(report)
}

/// Measured `∇²(g²)` against the quadratic-model reference at one scale.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadraticComparison {
    pub scale: f64,
    /// `v` tilted away from `v̄`.
    pub perturbed: bool,
    /// `‖x − x̄‖`.
    pub offset: f64,
    /// `f(x̄) − l`.
    pub level_gap: f64,
    /// `‖v − v̄‖`.
    pub vector_gap: f64,
    /// Frobenius norm of `∇²(g²)(x) − H_ref`.
    pub deviation: f64,
    pub reference_norm: f64,
}

/// `H_ref = 8/s² [Hvvᵀ H − sH]` with `s = vᵀHv`.
pub fn reference_hessian(h: &Matrix, v: &Vector) -> Result<Matrix> {
    let hv = h * v;
    let s = v.dot(&hv);
    if !(s < 0.0) {
        return Err(Error::NotConcaveAlongV(s));
    }
    Ok(symmetrize(&((&hv * hv.transpose() - h * s) * (8.0 / (s * s)))))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilitySettings {
    /// Number of scales `2⁻¹, 2⁻², …`.
    pub levels: usize,
    /// `‖x − x̄‖ = scale·r0`.
    pub r0: f64,
    /// `f(x̄) − l = scale·e0_factor·|λₙ|`.
    pub e0_factor: f64,
    /// `‖v − v̄‖` of the perturbed series.
    pub perturbation: f64,
    pub region_radius: f64,
    pub seed: u64,
}

impl Default for StabilitySettings {
    fn default() -> Self {
        Self {
            levels: 8,
            r0: 0.5,
            e0_factor: 0.25,
            perturbation: 0.05,
            region_radius: 10.0,
            seed: 0,
        }
    }
}

/// A sweep scale where the section could not be computed, e.g. because the
/// level lies below `f` all along one side of the line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkippedScale {
    pub scale: f64,
    pub perturbed: bool,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilitySweep {
    pub comparisons: Vec<QuadraticComparison>,
    pub skipped: Vec<SkippedScale>,
}

/// Sweeps geometric scales toward a nondegenerate Morse-1 critical point `x̄`
/// and compares `∇²(g²)` with the reference from `∇²f(x̄)`.
///
/// Fails with [`Error::NotApplicable`] unless `x̄` is critical, nondegenerate
/// and of Morse index one.
pub fn check_hessian_stability(
    obj: &Objective,
    xbar: &Vector,
    settings: &StabilitySettings,
    tol: &Tolerances,
) -> Result<StabilitySweep> {
    let n = xbar.len();
    if n < 2 {
        return Err(Error::NotApplicable("needs dimension at least 2".into()));
    }
    let grad = obj.eval_gradient(xbar)?;
    let h = obj.eval_hessian(xbar)?;
    let eigen = decompose(&h)?;
    let scale_h = eigen.values.amax();
    if grad.norm() > 1e-6 * scale_h.max(1.0) {
        return Err(Error::NotApplicable(format!(
            "not a critical point: |grad f| = {:e}",
            grad.norm()
        )));
    }
    let degenerate = eigen.values.iter().any(|l| l.abs() <= DEGENERACY_RATIO * scale_h);
    if degenerate || morse_index(&eigen) != 1 {
        return Err(Error::NotApplicable(format!(
            "critical point is degenerate or of Morse index {}",
            morse_index(&eigen)
        )));
    }
    let lambda_n = eigen.values[n - 1].abs();
    let vbar = negative_direction(&h)?;
    let fbar = obj.eval_value(xbar)?;
    let region = TrustRegion::new(xbar.clone(), settings.region_radius)?;

    let mut rng = rng(settings.seed);
    let direction = unit_vector(n, &mut rng);
    let side = {
        let w = project_out(&unit_vector(n, &mut rng), &vbar);
        let len = w.norm();
        if len > 1e-8 {
            w / len
        } else {
            complement_basis(&vbar).column(0).into_owned()
        }
    };
    let angle = 2.0 * (0.5 * settings.perturbation).asin();
    let tilted = &vbar * angle.cos() + side * angle.sin();

    let mut sweep = StabilitySweep {
        comparisons: Vec::new(),
        skipped: Vec::new(),
    };
    for (perturbed, v) in [(false, &vbar), (true, &tilted)] {
        let reference = reference_hessian(&h, v)?;
        for k in 1..=settings.levels {
            let scale = 0.5f64.powi(k as i32);
            let x = xbar + &direction * (scale * settings.r0);
            let level_gap = scale * settings.e0_factor * lambda_n;
            let measured = eval_pardist(obj, &x, v, fbar - level_gap, &region, Derivatives::Hessian, tol)
                .and_then(|e| e.hess_g2.ok_or_else(|| Error::NotApplicable("empty section".into())));
            match measured {
                Ok(m) => sweep.comparisons.push(QuadraticComparison {
                    scale,
                    perturbed,
                    offset: (&x - xbar).norm(),
                    level_gap,
                    vector_gap: (v - &vbar).norm(),
                    deviation: (m - &reference).norm(),
                    reference_norm: reference.norm(),
                }),
                Err(e) => sweep.skipped.push(SkippedScale {
                    scale,
                    perturbed,
                    reason: e.to_string(),
                }),
            }
        }
    }
    Ok(sweep)
}

/// Trend test on one series: each deviation at most `factor` times the
/// previous one, and the smallest scale `smallest` present with deviation
/// below `final_ratio·‖H_ref‖`.
pub fn stability_trend_holds(series: &[QuadraticComparison], smallest: f64, factor: f64, final_ratio: f64) -> bool {
    let steady = series.windows(2).all(|w| w[1].deviation <= factor * w[0].deviation);
    let last = series
        .last()
        .is_some_and(|c| c.scale == smallest && c.deviation < final_ratio * c.reference_norm);
    steady && last
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub level: f64,
    pub radius: f64,
    pub pairs: usize,
    /// Pairs where all three `g²` values were computed.
    pub evaluated: usize,
    pub violations: usize,
    pub max_violation: f64,
    /// Smallest eigenvalue of `∇²(g²)` restricted to `v⊥` over sampled points with `g > 0`.
    pub min_reduced_eigenvalue: Option<f64>,
}

/// Midpoint convexity of `g²` on random pairs in the ball of `radius` around `x̄`,
/// with slack `1e-10·max(1, |values|)`.
#[allow(clippy::too_many_arguments)]
pub fn check_convexity_region(
    obj: &Objective,
    xbar: &Vector,
    level: f64,
    v: &Vector,
    radius: f64,
    n_pairs: usize,
    seed: u64,
    region_radius: f64,
    tol: &Tolerances,
) -> Result<ConvexityReport> {
    let region = TrustRegion::new(xbar.clone(), region_radius)?;
    let basis = complement_basis(v);
    let mut rng = rng(seed);
    let mut report = ConvexityReport {
        level,
        radius,
        pairs: n_pairs,
        evaluated: 0,
        violations: 0,
        max_violation: 0.0,
        min_reduced_eigenvalue: None,
    };
    for _ in 0..n_pairs {
        let x = ball_point(xbar, radius, &mut rng);
        let y = ball_point(xbar, radius, &mut rng);
        let mid = (&x + &y) * 0.5;
        let values = (
            eval_pardist(obj, &x, v, level, &region, Derivatives::Hessian, tol),
            eval_pardist(obj, &y, v, level, &region, Derivatives::None, tol),
            eval_pardist(obj, &mid, v, level, &region, Derivatives::None, tol),
        );
        let (Ok(ex), Ok(ey), Ok(em)) = values else { continue };
        report.evaluated += 1;
        let chord = 0.5 * (ex.g2 + ey.g2);
        let excess = em.g2 - chord;
        let slack = 1e-10 * chord.abs().max(em.g2.abs()).max(1.0);
        if excess > slack {
            report.violations += 1;
            report.max_violation = report.max_violation.max(excess);
        }
        if let Some(hess) = ex.hess_g2 {
            let reduced = basis.transpose() * hess * &basis;
            if reduced.nrows() > 0 {
                let e = jacobi_eigen(&symmetrize(&reduced))?;
                let lo = e.values[e.values.len() - 1];
                report.min_reduced_eigenvalue = Some(report.min_reduced_eigenvalue.map_or(lo, |m: f64| m.min(lo)));
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadiusProbe {
    pub level: f64,
    /// Largest tested radius with no violations; 0 if every radius failed.
    pub largest_clean_radius: f64,
    pub reports: Vec<ConvexityReport>,
}

/// Tries the `radii` from largest to smallest and stops at the first one
/// without midpoint-convexity violations.
#[allow(clippy::too_many_arguments)]
pub fn largest_convex_radius(
    obj: &Objective,
    xbar: &Vector,
    level: f64,
    v: &Vector,
    radii: &[f64],
    n_pairs: usize,
    seed: u64,
    region_radius: f64,
    tol: &Tolerances,
) -> Result<RadiusProbe> {
    let mut sorted = radii.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut reports = Vec::new();
    let mut largest = 0.0;
    for r in sorted {
        let rep = check_convexity_region(obj, xbar, level, v, r, n_pairs, seed, region_radius, tol)?;
        let clean = rep.violations == 0 && rep.evaluated > 0;
        reports.push(rep);
        if clean {
            largest = r;
            break;
        }
    }
    Ok(RadiusProbe {
        level,
        largest_clean_radius: largest,
        reports,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub models: usize,
    pub tolerance: f64,
    /// Largest `|g²_numeric − g²_closed| / (1 + g²_closed)`.
    pub max_scaled_error: f64,
    pub failures: usize,
}

/// Root-finding `g²` against the closed form on `models` random Morse-1
/// quadratics (`n = 2..6`) at random `(x, v, l)` with `vᵀHv < 0` and `l`
/// below the saddle value.
pub fn check_quadratic_oracle(models: usize, tolerance: f64, seed: u64, tol: &Tolerances) -> Result<OracleReport> {
    let mut rng = rng(seed);
    let spread = ProbeSpread {
        offset: 0.5,
        tilt: 0.5,
        level_gap: (0.05, 2.0),
    };
    let mut report = OracleReport {
        models,
        tolerance,
        max_scaled_error: 0.0,
        failures: 0,
    };
    for i in 0..models {
        let model = generate_morse1(2 + i % 5, rng.random(), MODEL_SPECTRUM)?;
        let (xbar, fbar) = model.saddle()?;
        let (x, v, level) = draw_probe(&xbar, &model.negative_eigenvector(), model.h(), fbar, &spread, &mut rng);
        let closed = closed_form_g2_quadratic(&model, &x, &v, level)?;
        // Nearly flat directions put the line maximum far out; size the region to contain the section.
        let t_peak = -model.grad(&x).dot(&v) / v.dot(&(model.h() * &v));
        let radius = 2.0 * (t_peak.abs() + closed.g2.sqrt()) + 10.0;
        let obj = Objective::quadratic(model);
        let region = TrustRegion::new(x.clone(), radius)?;
        let err = match g2_at(&obj, &x, &v, level, &region, tol) {
            Ok(g2) => (g2 - closed.g2).abs() / (1.0 + closed.g2),
            Err(e) => {
                log::warn!("oracle model {i}: {e}");
                f64::INFINITY
            }
        };
        report.max_scaled_error = report.max_scaled_error.max(err);
        if !(err <= tolerance) {
            report.failures += 1;
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenstructureReport {
    pub models: usize,
    pub tolerance: f64,
    /// Largest eigenvalue mismatch relative to the expected value (or to the
    /// spectral radius for the zero eigenvalue).
    pub max_rel_error: f64,
    pub failures: usize,
}

/// Eigenvalues of the closed-form `∇²(g²)` at `v = v̄` against
/// `{0} ∪ {−8λᵢ/λₙ : i < n}`.
pub fn check_eigenstructure(models: usize, tolerance: f64, seed: u64) -> Result<EigenstructureReport> {
    let mut rng = rng(seed);
    let mut report = EigenstructureReport {
        models,
        tolerance,
        max_rel_error: 0.0,
        failures: 0,
    };
    for i in 0..models {
        let model = generate_morse1(2 + i % 5, rng.random(), MODEL_SPECTRUM)?;
        let n = model.dim();
        let (xbar, fbar) = model.saddle()?;
        let lambdas = model.eigen().values.clone();
        let lambda_n = lambdas[n - 1];
        let closed = closed_form_g2_quadratic(&model, &xbar, &model.negative_eigenvector(), fbar - 1.0)?;
        let got = jacobi_eigen(&closed.hess)?.values;
        let mut expected: Vec<f64> = (0..n - 1).map(|i| -8.0 * lambdas[i] / lambda_n).collect();
        expected.push(0.0);
        expected.sort_by(|a, b| b.total_cmp(a));
        let radius = expected[0].abs().max(1.0);
        let mut worst: f64 = 0.0;
        for (g, e) in got.iter().zip(&expected) {
            let denom = if *e == 0.0 { radius } else { e.abs() };
            worst = worst.max((g - e).abs() / denom);
        }
        report.max_rel_error = report.max_rel_error.max(worst);
        if !(worst <= tolerance) {
            report.failures += 1;
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MidpointReport {
    pub models: usize,
    pub tolerance: f64,
    /// Largest `‖midpoint − (−H⁻¹g)‖`.
    pub max_error: f64,
    pub failures: usize,
}

/// Midpoint of the section at the minimizer of `g²` over `x₀ + v⊥` against
/// the saddle `−H⁻¹g`.
pub fn check_midpoint_saddle(models: usize, tolerance: f64, seed: u64, tol: &Tolerances) -> Result<MidpointReport> {
    let mut rng = rng(seed);
    let spread = ProbeSpread {
        offset: 0.5,
        tilt: 0.3,
        level_gap: (0.05, 2.0),
    };
    let mut report = MidpointReport {
        models,
        tolerance,
        max_error: 0.0,
        failures: 0,
    };
    for i in 0..models {
        let model = generate_morse1(2 + i % 5, rng.random(), MODEL_SPECTRUM)?;
        let (xbar, fbar) = model.saddle()?;
        let (x0, v, level) = draw_probe(&xbar, &model.negative_eigenvector(), model.h(), fbar, &spread, &mut rng);
        // g² is quadratic, so one Newton step in v⊥ lands on its minimizer.
        let cf = closed_form_g2_quadratic(&model, &x0, &v, level)?;
        let basis = complement_basis(&v);
        let reduced = basis.transpose() * &cf.hess * &basis;
        let step = &basis * Lu::new(&reduced)?.solve(&(basis.transpose() * &cf.grad));
        let xmin = &x0 - step;
        let obj = Objective::quadratic(model);
        let region = TrustRegion::new(xmin.clone(), 100.0)?;
        let err = match find_level_crossings(&obj, &xmin, &v, level, &region, tol) {
            Ok(sec) => match (sec.z(), sec.z_prime()) {
                (Some(z), Some(zp)) => ((z + zp) * 0.5 - &xbar).norm(),
                _ => f64::INFINITY,
            },
            Err(_) => f64::INFINITY,
        };
        report.max_error = report.max_error.max(err);
        if !(err <= tolerance) {
            report.failures += 1;
        }
    }
    Ok(report)
}

/// Results of the `grad-formulas` suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradSuite {
    pub reports: Vec<GradCheckReport>,
    pub failures: usize,
}

/// Probe spread used around the origin saddle of a builtin.
fn builtin_spread(name: &str) -> ProbeSpread {
    match name {
        "tightness2d" => ProbeSpread {
            offset: 0.05,
            tilt: 0.1,
            level_gap: (0.01, 0.05),
        },
        _ => ProbeSpread {
            offset: 0.2,
            tilt: 0.1,
            level_gap: (0.05, 0.5),
        },
    }
}

/// Derivative-formula suite: optionally 50 probes on random quadratics
/// (tolerance 1e-6), and 20 on each builtin around its origin saddle (tolerance 1e-4).
pub fn grad_formulas_suite(quadratics: bool, functions: &[&str], seed: u64, tol: &Tolerances) -> Result<GradSuite> {
    let mut reports = Vec::new();
    if quadratics {
        reports.push(check_grad_formulas_quadratics(50, 1e-6, seed, tol)?);
    }
    for (k, name) in functions.iter().enumerate() {
        let obj = builtin(name)?;
        let center = Vector::zeros(obj.dim());
        let r = check_grad_formulas(
            &obj,
            &center,
            &builtin_spread(name),
            3.0,
            20,
            1e-4,
            seed + 1 + k as u64,
            tol,
        )?;
        reports.push(r);
    }
    let failures = reports.iter().filter(|r| !r.passed()).count();
    Ok(GradSuite { reports, failures })
}

/// What a stability sweep should show.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityExpectation {
    /// Exact quadratic: deviation at rounding level (`≤ 1e-12·‖H_ref‖`) at every scale.
    Flat,
    /// Deviation non-increasing within factor 1.5, below `1e-2·‖H_ref‖` at the smallest scale.
    Shrinking,
}

/// Results of the `hessian-stability` suite for one function.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub function: String,
    pub expectation: StabilityExpectation,
    pub center: Vec<f64>,
    pub comparisons: Vec<QuadraticComparison>,
    pub skipped: Vec<SkippedScale>,
    /// Why the sweep could not run at `center`; not counted as a failure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub not_applicable: Option<String>,
    pub trend_holds: bool,
    pub failures: usize,
}

/// Sweeps each function at its saddle `center` and checks the expected
/// behaviour on both the `v̄` and the tilted series.
pub fn hessian_stability_suite(
    cases: &[(Objective, Vector, StabilityExpectation)],
    seed: u64,
    tol: &Tolerances,
) -> Result<Vec<StabilityReport>> {
    let settings = StabilitySettings {
        seed,
        ..StabilitySettings::default()
    };
    let mut out = Vec::new();
    for (obj, center, expectation) in cases {
        let sweep = match check_hessian_stability(obj, center, &settings, tol) {
            Ok(s) => s,
            Err(Error::NotApplicable(reason)) => {
                out.push(StabilityReport {
                    function: obj.name().to_string(),
                    expectation: *expectation,
                    center: center.as_slice().to_vec(),
                    comparisons: Vec::new(),
                    skipped: Vec::new(),
                    not_applicable: Some(reason),
                    trend_holds: false,
                    failures: 0,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let StabilitySweep { comparisons, skipped } = sweep;
        let trend_holds = match expectation {
            StabilityExpectation::Flat => {
                skipped.is_empty() && comparisons.iter().all(|c| c.deviation <= 1e-12 * c.reference_norm)
            }
            StabilityExpectation::Shrinking => {
                let (plain, tilted): (Vec<_>, Vec<_>) = comparisons.iter().cloned().partition(|c| !c.perturbed);
                let smallest = 0.5f64.powi(settings.levels as i32);
                stability_trend_holds(&plain, smallest, 1.5, 1e-2)
                    && stability_trend_holds(&tilted, smallest, 1.5, 1e-2)
            }
        };
        out.push(StabilityReport {
            function: obj.name().to_string(),
            expectation: *expectation,
            center: center.as_slice().to_vec(),
            comparisons,
            skipped,
            not_applicable: None,
            trend_holds,
            failures: usize::from(!trend_holds),
        });
    }
    Ok(out)
}

/// Results of the `convexity` suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexitySuite {
    pub quadratic: ConvexityReport,
    pub six_hump_camel: ConvexityReport,
    pub tightness_probes: Vec<RadiusProbe>,
    /// Largest clean radius strictly decreases as `l` rises toward 0.
    pub tightness_shrinks: bool,
    pub failures: usize,
}

/// Radii tried by the tightness probe: `0.5·0.9ᵏ`, `k = 0..60`.
pub fn tightness_radii() -> Vec<f64> {
    (0..60).map(|k| 0.5 * 0.9f64.powi(k)).collect()
}

/// Levels of the tightness probe.
pub const TIGHTNESS_LEVELS: [f64; 3] = [-0.1, -0.01, -0.001];

/// Convexity suite: a Morse-1 quadratic near `v̄`, the camel origin saddle at
/// `l = −0.05`, and the shrinking convex region of `tightness2d`.
pub fn convexity_suite(seed: u64, tol: &Tolerances) -> Result<ConvexitySuite> {
    let model = generate_morse1(3, seed, MODEL_SPECTRUM)?;
    let (xbar, fbar) = model.saddle()?;
    let v = model.negative_eigenvector();
    let mut rng = rng(seed);
    let v = (v + normal_vector(3, &mut rng) * 0.02).normalize();
    let quad = Objective::quadratic(model);
    let quadratic = check_convexity_region(&quad, &xbar, fbar - 0.5, &v, 0.5, 200, seed, 100.0, tol)?;

    let camel = builtin("six_hump_camel")?;
    let origin = Vector::zeros(2);
    let vbar = negative_direction(&camel.eval_hessian(&origin)?)?;
    let six_hump_camel = check_convexity_region(&camel, &origin, -0.05, &vbar, 0.05, 200, seed, 3.0, tol)?;

    let tight = builtin("tightness2d")?;
    let vbar = negative_direction(&tight.eval_hessian(&origin)?)?;
    let mut tightness_probes = Vec::new();
    for level in TIGHTNESS_LEVELS {
        tightness_probes.push(largest_convex_radius(
            &tight,
            &origin,
            level,
            &vbar,
            &tightness_radii(),
            100,
            seed,
            2.0,
            tol,
        )?);
    }
    let tightness_shrinks = tightness_probes
        .windows(2)
        .all(|w| w[1].largest_clean_radius < w[0].largest_clean_radius);

    let quad_ok = quadratic.violations == 0 && quadratic.min_reduced_eigenvalue.is_some_and(|e| e > 0.0);
    let camel_ok = six_hump_camel.violations == 0 && six_hump_camel.evaluated > 0;
    let failures = [quad_ok, camel_ok, tightness_shrinks].iter().filter(|ok| !**ok).count();
    Ok(ConvexitySuite {
        quadratic,
        six_hump_camel,
        tightness_probes,
        tightness_shrinks,
        failures,
    })
}

/// Results of the `quadratic-oracle` suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleSuite {
    pub oracle: OracleReport,
    pub eigenstructure: EigenstructureReport,
    pub midpoint: MidpointReport,
    pub failures: usize,
}

/// Closed-form checks on random quadratics: 200 models for `g²`, 50 for the
/// eigenvalues, 50 for the midpoint; all at tolerance 1e-8.
pub fn quadratic_oracle_suite(seed: u64, tol: &Tolerances) -> Result<OracleSuite> {
    let oracle = check_quadratic_oracle(200, 1e-8, seed, tol)?;
    let eigenstructure = check_eigenstructure(50, 1e-8, seed.wrapping_add(1))?;
    let midpoint = check_midpoint_saddle(50, 1e-8, seed.wrapping_add(2), tol)?;
    let failures = oracle.failures + eigenstructure.failures + midpoint.failures;
    Ok(OracleSuite {
        oracle,
        eigenstructure,
        midpoint,
        failures,
    })
}

/// Convenience: the saddle of a quadratic model as an objective and point.
pub fn quadratic_case(model: QuadraticModel) -> Result<(Objective, Vector)> {
    let (x, _) = model.saddle()?;
    Ok((Objective::quadratic(model), x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    #[test]
    fn relative_error_floor() {
        let z = Matrix::zeros(2, 2);
        assert_eq!(relative_error(&z, &z), 0.0);
        let a = Matrix::from_element(1, 1, 1e-7);
        assert!((relative_error(&a, &Matrix::zeros(1, 1)) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn reference_hessian_of_plain_saddle() {
        // H = diag(1, −1), v = e₂: s = −1, Hv = (0, −1) → 8[(0,0;0,1) + H] = diag(8, 0).
        let h = Matrix::from_diagonal(&v2(1.0, -1.0));
        let r = reference_hessian(&h, &v2(0.0, 1.0)).unwrap();
        assert_eq!(r, Matrix::from_diagonal(&v2(8.0, 0.0)));
        assert!(matches!(
            reference_hessian(&h, &v2(1.0, 0.0)),
            Err(Error::NotConcaveAlongV(_))
        ));
    }

    #[test]
    fn fd_matches_closed_form_on_quadratic() {
        let h = Matrix::from_diagonal(&v2(1.0, -1.0));
        let model = QuadraticModel::new(h, Vector::zeros(2), 0.0).unwrap();
        let obj = Objective::quadratic(model.clone());
        let region = TrustRegion::new(Vector::zeros(2), 10.0).unwrap();
        let (x, v) = (v2(0.3, 0.1), v2(0.0, 1.0));
        let (grad, hess) = fd_g2_derivatives(&obj, &x, &v, -0.5, &region, &Tolerances::default()).unwrap();
        let cf = closed_form_g2_quadratic(&model, &x, &v, -0.5).unwrap();
        assert!((grad - cf.grad).amax() < 1e-6);
        assert!((hess - cf.hess).amax() < 1e-4);
    }

    #[test]
    fn grad_check_on_quadratics() {
        let r = check_grad_formulas_quadratics(10, 1e-6, 3, &Tolerances::default()).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn tangent_probes_are_skipped() {
        // l equal to the line max: a point section has no derivatives.
        let h = Matrix::from_diagonal(&v2(1.0, -1.0));
        let obj = Objective::quadratic(QuadraticModel::new(h, Vector::zeros(2), 0.0).unwrap());
        let region = TrustRegion::new(Vector::zeros(2), 10.0).unwrap();
        assert!(grad_check_sample(&obj, &v2(1.0, 0.0), &v2(0.0, 1.0), 0.5, &region, &Tolerances::default()).is_none());
    }

    #[test]
    fn stability_on_quadratic_is_flat() {
        let model = generate_morse1(3, 11, MODEL_SPECTRUM).unwrap();
        let (obj, xbar) = quadratic_case(model).unwrap();
        let sweep =
            check_hessian_stability(&obj, &xbar, &StabilitySettings::default(), &Tolerances::default()).unwrap();
        assert!(sweep.skipped.is_empty());
        let cmp = sweep.comparisons;
        assert_eq!(cmp.len(), 16);
        for c in &cmp {
            assert!(c.deviation <= 1e-12 * c.reference_norm, "{c:?}");
        }
        assert!(cmp
            .iter()
            .filter(|c| c.perturbed)
            .all(|c| (c.vector_gap - 0.05).abs() < 1e-12));
    }

    #[test]
    fn stability_rejects_degenerate_point() {
        // f = x₁² − x₂⁴ has a singular Hessian at the origin.
        struct Quartic;
        impl crate::objective::Function for Quartic {
            fn dim(&self) -> usize {
                2
            }
            fn value(&self, x: &Vector) -> f64 {
                x[0] * x[0] - x[1].powi(4)
            }
        }
        let obj = Objective::new("quartic", std::sync::Arc::new(Quartic));
        let r = check_hessian_stability(
            &obj,
            &Vector::zeros(2),
            &StabilitySettings::default(),
            &Tolerances::default(),
        );
        assert!(matches!(r, Err(Error::NotApplicable(_))), "{r:?}");
        let r = check_hessian_stability(
            &obj,
            &v2(0.5, 0.0),
            &StabilitySettings::default(),
            &Tolerances::default(),
        );
        assert!(matches!(r, Err(Error::NotApplicable(_))));
    }

    #[test]
    fn convexity_holds_for_quadratic() {
        let model = generate_morse1(2, 5, MODEL_SPECTRUM).unwrap();
        let (xbar, fbar) = model.saddle().unwrap();
        let v = model.negative_eigenvector();
        let obj = Objective::quadratic(model);
        let r = check_convexity_region(&obj, &xbar, fbar - 0.3, &v, 0.5, 50, 1, 100.0, &Tolerances::default()).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.evaluated, 50);
        assert!(r.min_reduced_eigenvalue.unwrap() > 0.0);
    }

    #[test]
    fn oracle_checks_small() {
        let tol = Tolerances::default();
        assert_eq!(check_quadratic_oracle(20, 1e-8, 9, &tol).unwrap().failures, 0);
        assert_eq!(check_eigenstructure(10, 1e-8, 9).unwrap().failures, 0);
        assert_eq!(check_midpoint_saddle(10, 1e-8, 9, &tol).unwrap().failures, 0);
    }

    #[test]
    fn reports_are_deterministic() {
        let tol = Tolerances::default();
        let a = serde_json::to_string(&check_quadratic_oracle(10, 1e-8, 4, &tol).unwrap()).unwrap();
        let b = serde_json::to_string(&check_quadratic_oracle(10, 1e-8, 4, &tol).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
