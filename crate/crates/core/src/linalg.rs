//! Dense matrices and a one-sided Jacobi SVD.
//!
//! One-sided (Hestenes) Jacobi orthogonalizes column pairs with plane
//! rotations until every pair is numerically orthogonal. Singular values
//! come out as the column norms and retain high relative accuracy, which
//! matters when small singular values are compared across layers.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinalgError {
    #[error("NONFINITE_INPUT: matrix contains NaN or infinity")]
    NonFinite,
    #[error("data length {len} does not match {rows}x{cols}")]
    Shape { rows: usize, cols: usize, len: usize },
}

impl LinalgError {
    pub fn code(&self) -> &'static str {
        match self {
            LinalgError::NonFinite => "NONFINITE_INPUT",
            LinalgError::Shape { .. } => "SHAPE_MISMATCH",
        }
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::Shape {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        Matrix::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).map(|k| self.get(i, k) * other.get(k, j)).sum()
        })
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * alpha).collect(),
        }
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Thin SVD `A = U diag(sigma) Vᵀ` of an m×n matrix, sigma sorted
/// non-increasing. `u` is m×n with unit columns wherever sigma > 0 (zero
/// columns otherwise); `v` is n×n orthogonal.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

const MAX_SWEEPS: usize = 100;

/// One-sided Jacobi over the columns of `a`. Cheapest when rows ≥ cols.
pub fn jacobi_svd(a: &Matrix) -> Result<ThinSvd, LinalgError> {
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let (m, n) = (a.rows, a.cols);
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let tol = f64::EPSILON * (m.max(1) as f64);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = cols[p]
                    .iter()
                    .zip(&cols[q])
                    .fold((0.0, 0.0, 0.0), |(a, b, g), (x, y)| (a + x * x, b + y * y, g + x * y));
                if gamma == 0.0 || alpha == 0.0 || beta == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let u = Matrix::from_fn(m, n, |i, k| {
        let j = order[k];
        if norms[j] > 0.0 {
            cols[j][i] / norms[j]
        } else {
            0.0
        }
    });
    let v = Matrix::from_fn(n, n, |i, k| v[order[k]][i]);
    Ok(ThinSvd { u, sigma, v })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// The `min(rows, cols)` singular values of `m`, non-increasing.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>, LinalgError> {
    let svd = if m.rows >= m.cols {
        jacobi_svd(m)?
    } else {
        jacobi_svd(&m.transpose())?
    };
    Ok(svd.sigma)
}

/// Minimum-norm least-squares solution of `a x ≈ b` via the pseudo-inverse.
/// Singular values at or below `max(m, n) * eps * sigma_max` are treated as
/// zero. Returns the solution and the numerical rank.
pub fn lstsq_min_norm(a: &Matrix, b: &[f64]) -> Result<(Vec<f64>, usize), LinalgError> {
    assert_eq!(a.rows, b.len(), "rhs length must match row count");
    if !b.iter().all(|v| v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let n = a.cols;
    let svd = jacobi_svd(a)?;
    let sigma_max = svd.sigma.first().copied().unwrap_or(0.0);
    let cutoff = (a.rows.max(n) as f64) * f64::EPSILON * sigma_max;

    let mut x = vec![0.0; n];
    let mut rank = 0;
    for (k, &s) in svd.sigma.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        rank += 1;
        let coeff: f64 = (0..a.rows).map(|i| svd.u.get(i, k) * b[i]).sum::<f64>() / s;
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += svd.v.get(j, k) * coeff;
        }
    }
    Ok((x, rank))
}
