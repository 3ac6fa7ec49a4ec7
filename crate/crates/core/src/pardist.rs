//! The parallel distance `g_{l,v}(x) = diam S_{l,v}(x)` and its square.
//!
//! With `z`, `z'` the upper and lower endpoints of the section and
//! `a = vᵀ∇f(z)`, `b = vᵀ∇f(z')`, the implicit function theorem gives
//!
//! ```text
//! ∇g      = −∇f(z)/a + ∇f(z')/b
//! ∇(g²)   = 2 g ∇g
//! ∇²(g²)  = 2 ∇g ∇gᵀ − 2g P ∇²f(z) Pᵀ / a + 2g P' ∇²f(z') P'ᵀ / b
//! ```
//!
//! where `P = I − ∇f(z)vᵀ/a` and `P' = I − ∇f(z')vᵀ/b`. For an exact quadratic
//! the square has a closed form, implemented in [`closed_form_g2_quadratic`].

use crate::linalg::{jacobi_eigen, symmetrize};
use crate::line1d::{find_level_crossings, LineSection, Tolerances};
use crate::objective::{Objective, TrustRegion};
use crate::quadmodel::QuadraticModel;
use crate::{Error, Matrix, Result, Vector};

/// How much of the derivative information [`eval_pardist`] should compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Derivatives {
    None,
    Gradient,
    Hessian,
}

/// Endpoint gradients and the denominators `vᵀ∇f` built from them.
#[derive(Clone, Debug)]
pub struct EndpointData {
    pub grad_z: Vector,
    pub grad_z_prime: Vector,
    pub denom_z: f64,
    pub denom_z_prime: f64,
}

#[derive(Clone, Debug)]
pub struct ParallelDistanceEval {
    pub section: LineSection,
    pub g: f64,
    pub g2: f64,
    pub grad_g: Option<Vector>,
    pub grad_g2: Option<Vector>,
    pub hess_g2: Option<Matrix>,
    pub endpoints: Option<EndpointData>,
}

fn endpoint_term(grad: &Vector, hess: &Matrix, v: &Vector, denom: f64) -> Matrix {
    let n = v.len();
    let p = Matrix::identity(n, n) - grad * v.transpose() / denom;
    &p * hess * p.transpose() / denom
}

/// `g`, `g²` and, on request, `∇(g²)` and `∇²(g²)` at `x`.
///
/// Derivatives are absent when the section is empty or a single point. Fails
/// with [`Error::DegenerateDenominator`] when `|vᵀ∇f|` at either endpoint is
/// below `denom_tol·‖∇f‖`.
pub fn eval_pardist(
    obj: &Objective,
    x: &Vector,
    v: &Vector,
    level: f64,
    region: &TrustRegion,
    want: Derivatives,
    tol: &Tolerances,
) -> Result<ParallelDistanceEval> {
    let section = find_level_crossings(obj, x, v, level, region, tol)?;
    let g = section.diam();
    let mut out = ParallelDistanceEval {
        section,
        g,
        g2: g * g,
        grad_g: None,
        grad_g2: None,
        hess_g2: None,
        endpoints: None,
    };
    if want == Derivatives::None || g <= 0.0 {
        return Ok(out);
    }
    let (Some(z), Some(zp)) = (out.section.z(), out.section.z_prime()) else {
        return Ok(out);
    };
    let grad_z = obj.eval_gradient(&z)?;
    let grad_zp = obj.eval_gradient(&zp)?;
    let denom_z = grad_z.dot(v);
    let denom_zp = grad_zp.dot(v);
    for (d, gr) in [(denom_z, &grad_z), (denom_zp, &grad_zp)] {
        if !(d.abs() >= tol.denom_tol * gr.norm()) || d == 0.0 {
            return Err(Error::DegenerateDenominator { denom: d });
        }
    }
    let grad_g = -&grad_z / denom_z + &grad_zp / denom_zp;
    let grad_g2 = &grad_g * (2.0 * g);
    if want == Derivatives::Hessian {
        let hz = obj.eval_hessian(&z)?;
        let hzp = obj.eval_hessian(&zp)?;
        let h = &grad_g * grad_g.transpose() * 2.0 - endpoint_term(&grad_z, &hz, v, denom_z) * (2.0 * g)
            + endpoint_term(&grad_zp, &hzp, v, denom_zp) * (2.0 * g);
        out.hess_g2 = Some(symmetrize(&h));
    }
    out.grad_g = Some(grad_g);
    out.grad_g2 = Some(grad_g2);
    out.endpoints = Some(EndpointData {
        grad_z,
        grad_z_prime: grad_zp,
        denom_z,
        denom_z_prime: denom_zp,
    });
    Ok(out)
}

/// Value, gradient and Hessian of `g²` for an exact quadratic.
#[derive(Clone, Debug)]
pub struct ClosedFormG2 {
    pub g2: f64,
    pub grad: Vector,
    pub hess: Matrix,
    /// The bracketed quadratic before clipping at zero, times `4/(vᵀHv)²`.
    pub unclipped: f64,
}

/// Pieces of `g² = max{0, 4/s² [xᵀMx + bᵀx + k]}` with `s = vᵀHv`.
struct G2Pieces {
    s: f64,
    m: Matrix,
    b: Vector,
    k: f64,
}

fn g2_pieces(model: &QuadraticModel, v: &Vector, level: f64) -> Result<G2Pieces> {
    let h = model.h();
    let hv = h * v;
    let s = v.dot(&hv);
    if !(s < 0.0) {
        return Err(Error::NotConcaveAlongV(s));
    }
    let gv = model.g().dot(v);
    let m = symmetrize(&(&hv * hv.transpose() - h * s));
    let b = (&hv * gv - model.g() * s) * 2.0;
    let k = gv * gv + s * (-2.0 * model.c() + 2.0 * level);
    Ok(G2Pieces { s, m, b, k })
}

/// Closed-form `g²`, `∇(g²)`, `∇²(g²)` for the quadratic `model`.
///
/// Gradient and Hessian are zero on the clipped branch.
pub fn closed_form_g2_quadratic(model: &QuadraticModel, x: &Vector, v: &Vector, level: f64) -> Result<ClosedFormG2> {
    let G2Pieces { s, m, b, k } = g2_pieces(model, v, level)?;
    let scale = 4.0 / (s * s);
    let mx = &m * x;
    let unclipped = scale * (x.dot(&mx) + b.dot(x) + k);
    let n = x.len();
    if unclipped > 0.0 {
        Ok(ClosedFormG2 {
            g2: unclipped,
            grad: (mx * 2.0 + b) * scale,
            hess: m * (2.0 * scale),
            unclipped,
        })
    } else {
        Ok(ClosedFormG2 {
            g2: 0.0,
            grad: Vector::zeros(n),
            hess: Matrix::zeros(n, n),
            unclipped,
        })
    }
}

/// Level `l` at which the minimum over `x` of the unclipped `g²` is zero.
///
/// For a Morse-index-one quadratic and `v` near the negative eigenvector this
/// is the saddle value.
pub fn estimate_critical_level(model: &QuadraticModel, v: &Vector) -> Result<f64> {
    // The level enters only the constant term; take l = 0 and solve afterwards.
    let G2Pieces { s, m, b, k } = g2_pieces(model, v, 0.0)?;
    let eig = jacobi_eigen(&m)?;
    let scale = eig.values.amax().max(f64::MIN_POSITIVE);
    let mut min_quad = 0.0;
    for (i, &lambda) in eig.values.iter().enumerate() {
        let q = eig.vectors.column(i);
        let bq = q.dot(&b);
        if lambda > 1e-10 * scale {
            min_quad -= bq * bq / (4.0 * lambda);
        } else if lambda < -1e-10 * scale {
            return Err(Error::NoEstimate(format!(
                "bracket is indefinite (eigenvalue {lambda:e})"
            )));
        } else if bq.abs() > 1e-10 * b.norm().max(1.0) {
            return Err(Error::NoEstimate(
                "bracket is unbounded below along its null space".into(),
            ));
        }
    }
    // min_quad + k + 2 s l = 0
    Ok(-(min_quad + k) / (2.0 * s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::builtin;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    fn diag_model(d: [f64; 2], g: [f64; 2], c: f64) -> QuadraticModel {
        QuadraticModel::new(Matrix::from_diagonal(&v2(d[0], d[1])), v2(g[0], g[1]), c).unwrap()
    }

    fn region() -> TrustRegion {
        TrustRegion::new(Vector::zeros(2), 10.0).unwrap()
    }

    #[test]
    fn lemma_formula_on_saddle_quadratic() {
        let obj = Objective::quadratic(diag_model([1.0, -1.0], [0.0, 0.0], 0.0));
        let tol = Tolerances::default();
        let e = eval_pardist(
            &obj,
            &v2(1.0, 0.0),
            &v2(0.0, 1.0),
            -0.5,
            &region(),
            Derivatives::Hessian,
            &tol,
        )
        .unwrap();
        let r2 = 2f64.sqrt();
        assert!((e.g - 2.0 * r2).abs() < 1e-12);
        assert!((e.grad_g.as_ref().unwrap() - v2(r2, 0.0)).amax() < 1e-12);
        assert!((e.grad_g2.as_ref().unwrap() - v2(8.0, 0.0)).amax() < 1e-10);
        let h = e.hess_g2.unwrap();
        assert!((h - Matrix::from_diagonal(&v2(8.0, 0.0))).amax() < 1e-10);
    }

    #[test]
    fn empty_section_has_no_derivatives() {
        let obj = Objective::quadratic(diag_model([1.0, -1.0], [0.0, 0.0], 0.0));
        let tol = Tolerances::default();
        let e = eval_pardist(
            &obj,
            &v2(1.0, 0.0),
            &v2(0.0, 1.0),
            1.0,
            &region(),
            Derivatives::Hessian,
            &tol,
        )
        .unwrap();
        assert_eq!((e.g, e.g2), (0.0, 0.0));
        assert!(e.grad_g2.is_none() && e.hess_g2.is_none() && e.endpoints.is_none());
    }

    #[test]
    fn tangent_direction_is_degenerate() {
        // Just below the line maximum the crossings sit where v is almost
        // tangent to the level set while ∇f itself stays O(1).
        let obj = builtin("six_hump_camel").unwrap();
        let tol = Tolerances {
            denom_tol: 1e-3,
            ..Tolerances::default()
        };
        let (x, v) = (v2(0.3, 0.0), v2(0.0, 1.0));
        let peak = crate::line1d::line_local_max(&obj, &x, &v, &region(), &tol).unwrap();
        let ok = eval_pardist(&obj, &x, &v, peak.value - 0.5, &region(), Derivatives::Gradient, &tol);
        assert!(ok.is_ok());
        let r = eval_pardist(&obj, &x, &v, peak.value - 1e-8, &region(), Derivatives::Gradient, &tol);
        assert!(matches!(r, Err(Error::DegenerateDenominator { .. })), "{r:?}");
    }

    #[test]
    fn closed_form_examples() {
        let m = diag_model([1.0, -1.0], [0.0, 0.0], 0.0);
        let cf = closed_form_g2_quadratic(&m, &v2(1.0, 0.0), &v2(0.0, 1.0), -0.5).unwrap();
        assert!((cf.g2 - 8.0).abs() < 1e-14);
        assert_eq!(cf.hess, Matrix::from_diagonal(&v2(8.0, 0.0)));
        let e = jacobi_eigen(&cf.hess).unwrap();
        assert_eq!(e.values.as_slice(), &[8.0, 0.0]);

        let cf = closed_form_g2_quadratic(&m, &v2(0.0, 0.0), &v2(0.0, 1.0), 0.5).unwrap();
        assert_eq!(cf.unclipped, -4.0);
        assert_eq!(cf.g2, 0.0);
        assert_eq!(cf.grad, Vector::zeros(2));

        let bad = closed_form_g2_quadratic(&m, &v2(0.0, 0.0), &v2(1.0, 0.0), 0.0);
        assert!(matches!(bad, Err(Error::NotConcaveAlongV(_))));
    }

    #[test]
    fn critical_level_estimates() {
        let v = v2(0.0, 1.0);
        let l = estimate_critical_level(&diag_model([1.0, -1.0], [0.0, 0.0], 0.0), &v).unwrap();
        assert!(l.abs() < 1e-15);
        let l = estimate_critical_level(&diag_model([2.0, -1.0], [0.0, 0.0], 3.0), &v).unwrap();
        assert!((l - 3.0).abs() < 1e-14);
        let m = diag_model([1.0, -1.0], [0.0, 1.0], 0.0);
        let (_, saddle_value) = m.saddle().unwrap();
        let l = estimate_critical_level(&m, &v).unwrap();
        assert!((l - saddle_value).abs() < 1e-14);
        assert!((l - 0.5).abs() < 1e-14);
    }

    #[test]
    fn no_estimate_for_indefinite_bracket() {
        // Two negative directions: the bracket is indefinite on v⊥.
        let m = QuadraticModel::new(
            Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, -2.0, 1.0])),
            Vector::zeros(3),
            0.0,
        )
        .unwrap();
        let r = estimate_critical_level(&m, &Vector::from_vec(vec![0.0, 1.0, 0.0]));
        assert!(matches!(r, Err(Error::NoEstimate(_))));
    }
}
