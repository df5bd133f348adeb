//! Thin row-major wrappers over faer for the dense kernels used by the
//! exact and tensor-network backends.
//!
//! Every matrix in this crate is a contiguous row-major `&[f64]` with its
//! shape carried alongside. faer is built without its thread pool, so all
//! kernels run sequentially and are bit-reproducible on a fixed platform.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef, Par, Side};

use crate::{Error, Result};

/// `dst (+)= op(lhs) · op(rhs)` where `op` optionally transposes.
///
/// `lhs_shape`/`rhs_shape` describe the stored (untransposed) matrices.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    dst: &mut [f64],
    lhs: &[f64],
    lhs_shape: (usize, usize),
    lhs_t: bool,
    rhs: &[f64],
    rhs_shape: (usize, usize),
    rhs_t: bool,
    accumulate: bool,
) {
    let a = MatRef::from_row_major_slice(lhs, lhs_shape.0, lhs_shape.1);
    let b = MatRef::from_row_major_slice(rhs, rhs_shape.0, rhs_shape.1);
    let a = if lhs_t { a.transpose() } else { a };
    let b = if rhs_t { b.transpose() } else { b };
    debug_assert_eq!(a.ncols(), b.nrows());
    let (m, n) = (a.nrows(), b.ncols());
    let c = MatMut::from_row_major_slice_mut(dst, m, n);
    if m == 0 || n == 0 {
        return;
    }
    let accum = if accumulate {
        Accum::Add
    } else {
        Accum::Replace
    };
    matmul(c, accum, a, b, 1.0, Par::Seq);
}

/// Allocating product `op(lhs) · op(rhs)`.
pub fn matmul_new(
    lhs: &[f64],
    lhs_shape: (usize, usize),
    lhs_t: bool,
    rhs: &[f64],
    rhs_shape: (usize, usize),
    rhs_t: bool,
) -> Vec<f64> {
    let m = if lhs_t { lhs_shape.1 } else { lhs_shape.0 };
    let n = if rhs_t { rhs_shape.0 } else { rhs_shape.1 };
    let mut out = vec![0.0; m * n];
    gemm(&mut out, lhs, lhs_shape, lhs_t, rhs, rhs_shape, rhs_t, false);
    out
}

/// Thin singular value decomposition `A = U · diag(s) · Vᵀ` in row-major form.
#[derive(Debug, Clone)]
pub struct Svd {
    pub rows: usize,
    pub cols: usize,
    /// `rows × s.len()`
    pub u: Vec<f64>,
    /// descending, nonnegative
    pub s: Vec<f64>,
    /// `s.len() × cols`
    pub vt: Vec<f64>,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Keeps the leading `keep` singular triplets.
    pub fn truncated(mut self, keep: usize) -> Svd {
        let r = self.rank();
        if keep >= r {
            return self;
        }
        let mut u = Vec::with_capacity(self.rows * keep);
        for row in self.u.chunks_exact(r) {
            u.extend_from_slice(&row[..keep]);
        }
        self.u = u;
        self.s.truncate(keep);
        self.vt.truncate(keep * self.cols);
        self
    }
}

/// Thin SVD with a deterministic gauge: the largest-magnitude entry of every
/// left singular vector is made positive (the matching row of `Vᵀ` follows).
pub fn svd(a: &[f64], rows: usize, cols: usize) -> Result<Svd> {
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Svd {
            rows,
            cols,
            u: Vec::new(),
            s: Vec::new(),
            vt: Vec::new(),
        });
    }
    let m = MatRef::from_row_major_slice(a, rows, cols);
    let dec = m
        .thin_svd()
        .map_err(|e| Error::Linalg(format!("svd of {rows}x{cols}: {e:?}")))?;
    let (fu, fs, fv) = (dec.U(), dec.S(), dec.V());
    let s: Vec<f64> = fs.column_vector().iter().copied().collect();
    let mut u = vec![0.0; rows * k];
    let mut vt = vec![0.0; k * cols];
    for j in 0..k {
        let mut pivot = 0.0f64;
        for i in 0..rows {
            let x = fu[(i, j)];
            if x.abs() > pivot.abs() + 1e-15 {
                pivot = x;
            }
        }
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..rows {
            u[i * k + j] = sign * fu[(i, j)];
        }
        for c in 0..cols {
            vt[j * cols + c] = sign * fv[(c, j)];
        }
    }
    Ok(Svd {
        rows,
        cols,
        u,
        s,
        vt,
    })
}

/// Singular values only, descending.
pub fn singular_values(a: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    if rows.min(cols) == 0 {
        return Ok(Vec::new());
    }
    MatRef::from_row_major_slice(a, rows, cols)
        .singular_values()
        .map_err(|e| Error::Linalg(format!("singular values of {rows}x{cols}: {e:?}")))
}

/// Eigen-decomposition of a real symmetric matrix; eigenvalues ascending and
/// `vectors[i * n + j]` the `i`-th component of eigenvector `j`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

impl SymmetricEigen {
    pub fn vector(&self, j: usize) -> Vec<f64> {
        let n = self.values.len();
        (0..n).map(|i| self.vectors[i * n + j]).collect()
    }
}

pub fn symmetric_eigen(a: &[f64], n: usize) -> Result<SymmetricEigen> {
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: Vec::new(),
        });
    }
    let m = MatRef::from_row_major_slice(a, n, n);
    let dec = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("eigen of {n}x{n}: {e:?}")))?;
    let values: Vec<f64> = dec.S().column_vector().iter().copied().collect();
    let u = dec.U();
    let mut vectors = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            vectors[i * n + j] = u[(i, j)];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    MatRef::from_row_major_slice(a, n, n)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("eigenvalues of {n}x{n}: {e:?}")))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

/// Transposes a row-major `rows × cols` matrix.
pub fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

#[allow(dead_code)]
pub(crate) fn to_faer(a: &[f64], rows: usize, cols: usize) -> Mat<f64> {
    Mat::from_fn(rows, cols, |i, j| a[i * cols + j])
}
