//! Exact quadratic models `½xᵀHx + gᵀx + c`, their eigenstructure, a seeded
//! generator of Morse-index-one quadratics, and Newton refinement of critical
//! points of general objectives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{asymmetry, condition_estimate, jacobi_eigen, Lu, SymmetricEigen};
use crate::objective::{Function, Objective, TrustRegion};
use crate::{Error, Matrix, Result, Vector};

/// Largest `cond₁(∇²f)` accepted by [`newton_refine`].
pub const MAX_NEWTON_CONDITION: f64 = 1e12;

/// Symmetric eigendecomposition, eigenvalues descending.
pub fn decompose(h: &Matrix) -> Result<SymmetricEigen> {
    jacobi_eigen(h)
}

/// Number of eigenvalues below `-1e-12·‖H‖`.
pub fn morse_index(eigen: &SymmetricEigen) -> usize {
    let scale = eigen.values.amax();
    eigen.values.iter().filter(|&&l| l < -1e-12 * scale).count()
}

/// Whether any eigenvalue lies within `1e-12·‖H‖` of zero.
pub fn is_degenerate(eigen: &SymmetricEigen) -> bool {
    let scale = eigen.values.amax();
    scale == 0.0 || eigen.values.iter().any(|l| l.abs() <= 1e-12 * scale)
}

#[derive(Clone, Debug)]
pub struct QuadraticModel {
    h: Matrix,
    g: Vector,
    c: f64,
    eigen: SymmetricEigen,
    morse_index: usize,
}

/// JSON form of a quadratic: `{"H": [[...]], "g": [...], "c": real}`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    pub g: Vec<f64>,
    pub c: f64,
}

impl QuadraticModel {
    /// Builds the model; `h` must be square, symmetric within `1e-12`, and match `g`.
    pub fn new(h: Matrix, g: Vector, c: f64) -> Result<Self> {
        let n = h.nrows();
        if n == 0 || h.ncols() != n || g.len() != n {
            return Err(Error::InvalidModel(format!(
                "H is {}x{}, g has length {}",
                h.nrows(),
                h.ncols(),
                g.len()
            )));
        }
        if h.iter().chain(g.iter()).any(|e| !e.is_finite()) || !c.is_finite() {
            return Err(Error::InvalidModel("non-finite entries".into()));
        }
        let asym = asymmetry(&h);
        if asym > 1e-12 {
            return Err(Error::NotSymmetric(asym));
        }
        let h = crate::linalg::symmetrize(&h);
        let eigen = decompose(&h)?;
        let morse_index = morse_index(&eigen);
        Ok(Self {
            h,
            g,
            c,
            eigen,
            morse_index,
        })
    }

    pub fn from_spec(spec: &QuadraticSpec) -> Result<Self> {
        let n = spec.h.len();
        if spec.h.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidModel("H must be square".into()));
        }
        let h = Matrix::from_row_iterator(n, n, spec.h.iter().flatten().copied());
        Self::new(h, Vector::from_column_slice(&spec.g), spec.c)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: QuadraticSpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    pub fn to_spec(&self) -> QuadraticSpec {
        QuadraticSpec {
            h: self.h.row_iter().map(|r| r.iter().copied().collect()).collect(),
            g: self.g.as_slice().to_vec(),
            c: self.c,
        }
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn g(&self) -> &Vector {
        &self.g
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn eigen(&self) -> &SymmetricEigen {
        &self.eigen
    }

    pub fn morse_index(&self) -> usize {
        self.morse_index
    }

    /// Unit eigenvector of the smallest eigenvalue.
    pub fn negative_eigenvector(&self) -> Vector {
        self.eigen.vectors.column(self.dim() - 1).into_owned()
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        self.eigen.values[self.dim() - 1]
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.g.dot(x) + self.c
    }

    pub fn grad(&self, x: &Vector) -> Vector {
        &self.h * x + &self.g
    }

    /// The critical point `−H⁻¹g` and its value.
    pub fn saddle(&self) -> Result<(Vector, f64)> {
        let lu = Lu::new(&self.h)?;
        let x = -lu.solve(&self.g);
        let fx = self.eval(&x);
        Ok((x, fx))
    }
}

/// `saddle_of`: the critical point `−H⁻¹g` of a model, with `f` there.
pub fn saddle_of(model: &QuadraticModel) -> Result<(Vector, f64)> {
    model.saddle()
}

impl Function for QuadraticModel {
    fn dim(&self) -> usize {
        self.g.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        self.eval(x)
    }

    fn gradient(&self, x: &Vector) -> Option<Vector> {
        Some(self.grad(x))
    }

    fn hessian(&self, _x: &Vector) -> Option<Matrix> {
        Some(self.h.clone())
    }
}

/// Second-order Taylor model of `obj` at `x`.
pub fn local_quadratic(obj: &Objective, x: &Vector) -> Result<QuadraticModel> {
    let f = obj.eval_value(x)?;
    let grad = obj.eval_gradient(x)?;
    let h = obj.eval_hessian(x)?;
    let hx = &h * x;
    let g = &grad - &hx;
    let c = f - grad.dot(x) + 0.5 * x.dot(&hx);
    QuadraticModel::new(h, g, c)
}

/// Random orthogonal matrix as a product of `n` Householder reflections.
fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut q = Matrix::identity(n, n);
    for _ in 0..n {
        let w = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let ww = w.dot(&w);
        if ww < 1e-12 {
            continue;
        }
        let reflector = Matrix::identity(n, n) - (&w * w.transpose()) * (2.0 / ww);
        q = reflector * q;
    }
    q
}

/// Seeded random quadratic with exactly one negative eigenvalue.
///
/// Eigenvalue magnitudes are drawn uniformly from `spectrum = (lo, hi)`, `0 < lo ≤ hi`;
/// the last one is negated. `g` and `c` are standard normal.
pub fn generate_morse1(n: usize, seed: u64, spectrum: (f64, f64)) -> Result<QuadraticModel> {
    let (lo, hi) = spectrum;
    if n == 0 || !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidConfig(format!(
            "bad generator input n={n} spectrum=({lo}, {hi})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lambdas: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    lambdas[n - 1] = -lambdas[n - 1];
    let q = random_orthogonal(n, &mut rng);
    let h = &q * Matrix::from_diagonal(&Vector::from_vec(lambdas)) * q.transpose();
    let h = crate::linalg::symmetrize(&h);
    let g = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let c: f64 = rng.sample(StandardNormal);
    QuadraticModel::new(h, g, c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NewtonStatus {
    Converged,
    MaxIter,
}

#[derive(Clone, Debug, Serialize)]
pub struct NewtonStep {
    pub x: Vec<f64>,
    pub grad_norm: f64,
}

#[derive(Clone, Debug)]
pub struct NewtonResult {
    pub x: Vector,
    pub value: f64,
    pub grad_norm: f64,
    pub status: NewtonStatus,
    /// Morse index of `∇²f` at the final iterate.
    pub morse_index: usize,
    /// Iterates, starting with `x₀`.
    pub trace: Vec<NewtonStep>,
}

impl NewtonResult {
    pub fn is_saddle(&self) -> bool {
        self.status == NewtonStatus::Converged && self.morse_index == 1
    }
}

/// Newton iteration `x ← x − [∇²f(x)]⁻¹ ∇f(x)` for a critical point.
///
/// Steps longer than the region radius are scaled down to it and iterates are
/// kept inside the region. Stops at `‖∇f‖ ≤ gtol` or after `max_iter` steps.
pub fn newton_refine(
    obj: &Objective,
    x0: &Vector,
    region: &TrustRegion,
    gtol: f64,
    max_iter: usize,
) -> Result<NewtonResult> {
    let mut x = region.clamp(x0);
    let mut grad = obj.eval_gradient(&x)?;
    let mut trace = vec![NewtonStep {
        x: x.as_slice().to_vec(),
        grad_norm: grad.norm(),
    }];
    let mut status = NewtonStatus::MaxIter;
    let mut iterations = 0;
    loop {
        if grad.norm() <= gtol {
            status = NewtonStatus::Converged;
            break;
        }
        if iterations == max_iter {
            break;
        }
        let h = obj.eval_hessian(&x)?;
        let cond = condition_estimate(&h);
        if !(cond <= MAX_NEWTON_CONDITION) {
            return Err(Error::NewtonBreakdown { cond });
        }
        let mut step = -Lu::new(&h)?.solve(&grad);
        let len = step.norm();
        if len > region.radius() {
            step *= region.radius() / len;
        }
        x = region.clamp(&(x + step));
        grad = obj.eval_gradient(&x)?;
        trace.push(NewtonStep {
            x: x.as_slice().to_vec(),
            grad_norm: grad.norm(),
        });
        iterations += 1;
    }
    let h = obj.eval_hessian(&x)?;
    let morse_index = morse_index(&decompose(&h)?);
    Ok(NewtonResult {
        value: obj.eval_value(&x)?,
        grad_norm: grad.norm(),
        x,
        status,
        morse_index,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::builtin;

    fn diag(d: &[f64]) -> Matrix {
        Matrix::from_diagonal(&Vector::from_column_slice(d))
    }

    #[test]
    fn saddle_examples() {
        let m = QuadraticModel::new(diag(&[1.0, -1.0]), Vector::zeros(2), 2.5).unwrap();
        let (x, f) = saddle_of(&m).unwrap();
        assert_eq!(x, Vector::zeros(2));
        assert_eq!(f, 2.5);

        let m = QuadraticModel::new(diag(&[1.0, -1.0]), Vector::from_vec(vec![0.0, 1.0]), 0.0).unwrap();
        let (x, f) = m.saddle().unwrap();
        assert_eq!(x, Vector::from_vec(vec![0.0, 1.0]));
        // ½(0 − 1) + 1
        assert_eq!(f, 0.5);

        let m = QuadraticModel::new(diag(&[2.0, 3.0, -1.0]), Vector::from_vec(vec![2.0, 0.0, 1.0]), 0.0).unwrap();
        let (x, _) = m.saddle().unwrap();
        assert!((x - Vector::from_vec(vec![-1.0, 0.0, 1.0])).amax() < 1e-15);
    }

    #[test]
    fn singular_model_has_no_saddle() {
        let m = QuadraticModel::new(diag(&[1.0, 0.0]), Vector::zeros(2), 0.0).unwrap();
        assert!(matches!(m.saddle(), Err(Error::SingularMatrix)));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = QuadraticModel::from_json(r#"{"H": [[1, 0.5], [0.5, -2]], "g": [1, 2], "c": 3}"#).unwrap();
        assert_eq!(m.morse_index(), 1);
        assert_eq!(m.to_spec().h, vec![vec![1.0, 0.5], vec![0.5, -2.0]]);
        let bad = QuadraticModel::from_json(r#"{"H": [[1, 0.5], [0.4, -2]], "g": [1, 2], "c": 3}"#);
        assert!(matches!(bad, Err(Error::NotSymmetric(_))));
        let extra = QuadraticModel::from_json(r#"{"H": [[1]], "g": [1], "c": 3, "d": 1}"#);
        assert!(matches!(extra, Err(Error::Json(_))));
        let ragged = QuadraticModel::from_json(r#"{"H": [[1, 0], [0]], "g": [1, 2], "c": 3}"#);
        assert!(matches!(ragged, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn generator_is_deterministic_and_morse_one() {
        let a = generate_morse1(2, 0, (0.5, 2.0)).unwrap();
        let b = generate_morse1(2, 0, (0.5, 2.0)).unwrap();
        assert_eq!(a.h(), b.h());
        assert_eq!(a.g(), b.g());
        assert_eq!(a.c(), b.c());
        for seed in 0..20 {
            let m = generate_morse1(2 + (seed as usize % 5), seed, (0.5, 2.0)).unwrap();
            assert_eq!(m.morse_index(), 1);
            let v = m.negative_eigenvector();
            assert!(v.dot(&(m.h() * &v)) < 0.0);
        }
    }

    #[test]
    fn eigenpairs_satisfy_definition() {
        let m = generate_morse1(6, 7, (0.5, 3.0)).unwrap();
        let e = m.eigen();
        let scale = m.h().amax();
        for i in 0..6 {
            let q = e.vectors.column(i).into_owned();
            assert!((m.h() * &q - &q * e.values[i]).amax() < 1e-10 * scale);
        }
        let qtq = e.vectors.transpose() * &e.vectors;
        assert!((qtq - Matrix::identity(6, 6)).amax() < 1e-10);
        assert!((e.recompose() - m.h()).amax() <= 1e-10 * scale);
    }

    #[test]
    fn newton_is_exact_on_quadratics() {
        let m = generate_morse1(4, 3, (0.5, 2.0)).unwrap();
        let (xbar, _) = m.saddle().unwrap();
        let obj = Objective::quadratic(m);
        let region = TrustRegion::new(Vector::zeros(4), 100.0).unwrap();
        let x0 = Vector::from_vec(vec![0.3, -0.2, 0.5, 1.0]);
        let r = newton_refine(&obj, &x0, &region, 1e-10, 10).unwrap();
        assert!(r.is_saddle());
        assert_eq!(r.trace.len(), 2);
        assert!((r.x - xbar).amax() < 1e-12);
    }

    #[test]
    fn newton_camel_origin() {
        let obj = builtin("six_hump_camel").unwrap();
        let region = TrustRegion::new(Vector::zeros(2), 10.0).unwrap();
        let r = newton_refine(&obj, &Vector::from_vec(vec![0.1, 0.05]), &region, 1e-12, 6).unwrap();
        assert!(r.is_saddle(), "{r:?}");
        assert!(r.x.amax() < 1e-12);
        assert!(r.trace.len() <= 7);
    }

    #[test]
    fn newton_breakdown_on_singular_hessian() {
        let m = QuadraticModel::new(diag(&[1.0, 0.0]), Vector::from_vec(vec![0.0, 1.0]), 0.0).unwrap();
        let obj = Objective::quadratic(m);
        let region = TrustRegion::new(Vector::zeros(2), 10.0).unwrap();
        let r = newton_refine(&obj, &Vector::from_vec(vec![1.0, 1.0]), &region, 1e-10, 5);
        assert!(matches!(r, Err(Error::NewtonBreakdown { .. })));
    }

    #[test]
    fn newton_step_is_clipped_to_radius() {
        let m = QuadraticModel::new(diag(&[1.0, -1.0]), Vector::from_vec(vec![5.0, 0.0]), 0.0).unwrap();
        let obj = Objective::quadratic(m);
        let region = TrustRegion::new(Vector::zeros(2), 1.0).unwrap();
        let r = newton_refine(&obj, &Vector::zeros(2), &region, 1e-10, 3).unwrap();
        assert_eq!(r.status, NewtonStatus::MaxIter);
        let first = Vector::from_column_slice(&r.trace[1].x);
        assert!((first.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn local_quadratic_reproduces_a_quadratic() {
        let m = generate_morse1(3, 11, (0.5, 2.0)).unwrap();
        let obj = Objective::quadratic(m.clone());
        let lq = local_quadratic(&obj, &Vector::from_vec(vec![0.7, -0.1, 0.4])).unwrap();
        assert!((lq.g() - m.g()).amax() < 1e-12);
        assert!((lq.c() - m.c()).abs() < 1e-12);
    }
}
