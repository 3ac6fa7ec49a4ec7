//! Small dense linear algebra: cyclic Jacobi eigensolver, LU with partial
//! pivoting, a 1-norm condition estimate and an orthonormal basis of `v⊥`.

use crate::{Error, Matrix, Result, Vector};

/// Symmetric eigendecomposition with eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vector,
    /// Eigenvectors stored as columns, in the order of `values`.
    pub vectors: Matrix,
}

impl SymmetricEigen {
    /// Rebuilds `Q Λ Qᵀ`.
    pub fn recompose(&self) -> Matrix {
        let q = &self.vectors;
        q * Matrix::from_diagonal(&self.values) * q.transpose()
    }
}

/// Largest absolute difference between `a` and `aᵀ`.
pub fn asymmetry(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// `(A + Aᵀ)/2`.
pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps until the off-diagonal Frobenius norm drops below `1e-14·‖A‖_F`.
/// The input must be symmetric to within `1e-12·max(1, ‖A‖_F)`.
pub fn jacobi_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    let scale = a.norm();
    let asym = asymmetry(a);
    if asym > 1e-12 * scale.max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let mut m = symmetrize(a);
    let mut q = Matrix::identity(n, n);
    let target = 1e-14 * scale;

    for _sweep in 0..100 {
        if off_diagonal_norm(&m) <= target {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = m[(p, r)];
                if apr == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let arr = m[(r, r)];
                let theta = (arr - app) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkr = m[(k, r)];
                    m[(k, p)] = c * mkp - s * mkr;
                    m[(k, r)] = s * mkp + c * mkr;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mrk = m[(r, k)];
                    m[(p, k)] = c * mpk - s * mrk;
                    m[(r, k)] = s * mpk + c * mrk;
                }
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkr = q[(k, r)];
                    q[(k, p)] = c * qkp - s * qkr;
                    q[(k, r)] = s * qkp + c * qkr;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let mut vectors = Matrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &q.column(i));
    }
    Ok(SymmetricEigen { values, vectors })
}

/// LU factorization `P A = L U` with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.ncols(),
            });
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut piv, mut best) = (k, lu[(k, k)].abs());
            for i in (k + 1)..n {
                if lu[(i, k)].abs() > best {
                    piv = i;
                    best = lu[(i, k)].abs();
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SingularMatrix);
            }
            if piv != k {
                lu.swap_rows(piv, k);
                perm.swap(piv, k);
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in (k + 1)..n {
                    lu[(i, j)] -= factor * lu[(k, j)];
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &Vector) -> Vector {
        let n = self.dim();
        let mut y = Vector::from_iterator(n, self.perm.iter().map(|&p| b[p]));
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lu[(i, j)] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                y[i] -= self.lu[(i, j)] * y[j];
            }
            y[i] /= self.lu[(i, i)];
        }
        y
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &Vector) -> Vector {
        let n = self.dim();
        // Aᵀ = Uᵀ Lᵀ P, so solve Uᵀ w = b, Lᵀ y = w, x = Pᵀ y.
        let mut w = b.clone();
        for i in 0..n {
            for j in 0..i {
                w[i] -= self.lu[(j, i)] * w[j];
            }
            w[i] /= self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                w[i] -= self.lu[(j, i)] * w[j];
            }
        }
        let mut x = Vector::zeros(n);
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
        x
    }

    /// Estimate of `‖A⁻¹‖₁` by Hager's power iteration.
    pub fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.dim();
        let mut x = Vector::from_element(n, 1.0 / n as f64);
        let mut estimate = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve(&x);
            estimate = y.lp_norm(1);
            let xi = y.map(|e| if e >= 0.0 { 1.0 } else { -1.0 });
            let z = self.solve_transpose(&xi);
            let (j, zmax) = z.iter().enumerate().fold(
                (0, 0.0_f64),
                |(bj, bv), (i, &e)| {
                    if e.abs() > bv {
                        (i, e.abs())
                    } else {
                        (bj, bv)
                    }
                },
            );
            if zmax <= z.dot(&x) || j == last_j {
                break;
            }
            last_j = j;
            x = Vector::zeros(n);
            x[j] = 1.0;
        }
        estimate
    }
}

/// Matrix 1-norm (max column sum).
pub fn norm1(a: &Matrix) -> f64 {
    a.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max)
}

/// 1-norm condition number estimate of `a`, `+∞` when singular.
pub fn condition_estimate(a: &Matrix) -> f64 {
    match Lu::new(a) {
        Ok(lu) => norm1(a) * lu.inverse_norm1_estimate(),
        Err(_) => f64::INFINITY,
    }
}

/// Columns form an orthonormal basis of the complement of unit vector `v`.
///
/// Built from the Householder reflector that maps `v` to `±e₁`.
pub fn complement_basis(v: &Vector) -> Matrix {
    let n = v.len();
    let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut w = v.clone();
    w[0] += sign;
    let ww = w.dot(&w);
    let reflector = Matrix::identity(n, n) - (&w * w.transpose()) * (2.0 / ww);
    reflector.columns(1, n - 1).into_owned()
}

/// `I - v vᵀ` applied to `x`, for unit `v`.
pub fn project_out(x: &Vector, v: &Vector) -> Vector {
    x - v * v.dot(x)
}
