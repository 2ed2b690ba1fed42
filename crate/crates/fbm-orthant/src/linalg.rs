//! Small dense linear algebra for symmetric positive definite systems.
//!
//! Problem dimensions in this crate are tiny (d ≤ 15, submatrices thereof),
//! so everything is a straightforward row-major `Vec<f64>` implementation:
//! Cholesky factorization with forward/back substitution, determinants from
//! the Cholesky diagonal, and symmetric eigenvalues by cyclic Jacobi
//! rotations for definiteness checks.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    /// Cholesky pivot fell below the positivity threshold.
    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds from a row-major slice of length n².
    pub fn from_row_major(n: usize, data: &[f64]) -> Result<Self, LinalgError> {
        if data.len() != n * n {
            return Err(LinalgError::DimensionMismatch { expected: n * n, got: data.len() });
        }
        Ok(Matrix { n, data: data.to_vec() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Replaces the matrix by its symmetric part (M + Mᵀ)/2.
    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    /// Largest |M_ij − M_ji| over all pairs; 0 for an exactly symmetric matrix.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// M·Mᵀ, used to form a covariance from a mixing matrix.
    pub fn gram(&self) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self[(i, k)] * self[(j, k)];
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        out
    }

    /// Extracts the square submatrix with the given row and column indices.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        assert_eq!(rows.len(), cols.len(), "submatrix must be square");
        let mut m = Matrix::zeros(rows.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                m[(a, b)] = self[(i, j)];
            }
        }
        m
    }

    /// Extracts a rectangular block as rows of length `cols.len()`.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|&i| cols.iter().map(|&j| self[(i, j)]).collect())
            .collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Cholesky factorization M = L·Lᵀ. Fails if a pivot is ≤ `tol` times
    /// the largest diagonal entry (with an absolute floor for the zero matrix).
    pub fn cholesky(&self) -> Result<Cholesky, LinalgError> {
        let n = self.n;
        let max_diag = (0..n).map(|i| self[(i, i)].abs()).fold(0.0f64, f64::max);
        let floor = 1e-14 * max_diag.max(1e-300);
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= floor {
                return Err(LinalgError::NotPositiveDefinite { index: j, pivot: d });
            }
            let dj = d.sqrt();
            l[(j, j)] = dj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / dj;
            }
        }
        Ok(Cholesky { l })
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
    /// ascending. Intended for definiteness checks on small matrices.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = self.clone();
        let off = |a: &Matrix| -> f64 {
            let mut s = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
            s
        };
        let scale: f64 = (0..n).map(|i| a[(i, i)].abs()).fold(1e-300, f64::max);
        for _sweep in 0..64 {
            if off(&a) <= (1e-30 * scale * scale).max(1e-300) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        eig
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Lower-triangular Cholesky factor with solve helpers.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.n
    }

    /// Solves M x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.n;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[(i, k)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.l[(k, i)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        y
    }

    /// Solves L y = b (forward substitution only).
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[(i, k)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        y
    }

    /// Determinant of the original matrix: ∏ L_ii².
    pub fn det(&self) -> f64 {
        (0..self.l.n).map(|i| self.l[(i, i)]).product::<f64>().powi(2)
    }

    /// log det of the original matrix, stable for small determinants.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.l.n).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// L·z, mapping i.i.d. standard normals to the matrix's distribution.
    pub fn lower_matvec(&self, z: &[f64]) -> Vec<f64> {
        let n = self.l.n;
        assert_eq!(z.len(), n);
        (0..n)
            .map(|i| (0..=i).map(|k| self.l[(i, k)] * z[k]).sum())
            .collect()
    }
}

/// Quadratic form xᵀ M⁻¹ y via an existing Cholesky factor of M.
pub fn inv_quadratic_form(chol: &Cholesky, x: &[f64], y: &[f64]) -> f64 {
    let lx = chol.solve_lower(x);
    let ly = chol.solve_lower(y);
    dot(&lx, &ly)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Deterministic pairwise summation: the result depends only on the order of
/// `values`, never on chunking or thread count, and has O(log n) error growth.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}
