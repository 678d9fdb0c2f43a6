//! Dense real matrices and the symmetric eigensolver behind the propagator.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{abs, hypot, sqrt};
use crate::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has the wrong length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Largest elementwise magnitude of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| f64::max(m, abs(a - b)))
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max(abs(self[(i, j)] - self[(j, i)]));
            }
        }
        worst
    }
}

impl core::ops::Index<(usize, usize)> for RealMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for RealMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Dot product with four independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Full eigendecomposition of a real symmetric matrix.
///
/// Eigenvalues are ascending; `vectors.row(k)` is the eigenvector of
/// `values[k]`, so `A = Σ_k λ_k v_k v_kᵀ`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: RealMatrix,
}

/// Per-eigenvalue iteration cap for the QL sweeps.
const MAX_QL_ITERATIONS: usize = 60;

impl SymmetricEigen {
    /// Householder reduction to tridiagonal form followed by implicit QL with
    /// Wilkinson-type shifts. Only the lower triangle of `a` is read.
    ///
    /// Internally the orthogonal factor is stored transposed so that every
    /// rotation and reflection touches contiguous rows.
    pub fn new(a: &RealMatrix) -> Result<Self> {
        let n = a.rows();
        assert_eq!(n, a.cols(), "eigensolver needs a square matrix");
        if n == 0 {
            return Ok(Self {
                values: Vec::new(),
                vectors: RealMatrix::zeros(0, 0),
            });
        }
        // w = Vᵀ; start from the symmetric input (lower triangle mirrored).
        let mut w = RealMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = a[(i, j)];
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n];
        tridiagonalize(&mut w, &mut d, &mut e);
        ql_implicit(&mut w, &mut d, &mut e)?;

        // Sort ascending, permuting eigenvector rows alongside.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
        let values = order.iter().map(|&k| d[k]).collect();
        let mut vectors = RealMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.row_mut(dst).copy_from_slice(w.row(src));
        }
        Ok(Self { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `‖V Λ Vᵀ − A‖_max`
    pub fn reconstruction_residual(&self, a: &RealMatrix) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        let mut scaled = vec![0.0; n];
        for i in 0..n {
            for (k, s) in scaled.iter_mut().enumerate() {
                *s = self.values[k] * self.vectors[(k, i)];
            }
            for j in 0..n {
                let mut acc = 0.0;
                for (k, s) in scaled.iter().enumerate() {
                    acc += s * self.vectors[(k, j)];
                }
                worst = worst.max(abs(acc - a[(i, j)]));
            }
        }
        worst
    }

    /// `‖VᵀV − I‖_max`
    pub fn orthogonality_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                let g = dot(self.vectors.row(i), self.vectors.row(j));
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max(abs(g - target));
            }
        }
        worst
    }
}

/// Householder tridiagonalization (EISPACK `tred2`) on the transposed
/// accumulator `w`. On exit `d` holds the diagonal, `e[1..]` the
/// subdiagonal and `w` the transposed orthogonal factor.
fn tridiagonalize(w: &mut RealMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    // In the textbook formulation V[r][c] is read here as w[(c, r)].
    for j in 0..n {
        d[j] = w[(j, n - 1)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for &dk in &d[..i] {
            scale += abs(dk);
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = w[(j, i - 1)];
                w[(j, i)] = 0.0;
                w[(i, j)] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in &mut e[..i] {
                *ej = 0.0;
            }
            for j in 0..i {
                let f = d[j];
                w[(i, j)] = f;
                let mut g = e[j] + w[(j, j)] * f;
                let row = w.row(j);
                for k in j + 1..i {
                    g += row[k] * d[k];
                    e[k] += row[k] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                let row = w.row_mut(j);
                for k in j..i {
                    row[k] -= f * e[k] + g * d[k];
                }
                d[j] = row[i - 1];
                row[i] = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate the transformations.
    let mut col = vec![0.0; n];
    for i in 0..n - 1 {
        let wii = w[(i, i)];
        w[(i, n - 1)] = wii;
        w[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            col[..=i].copy_from_slice(&w.row(i + 1)[..=i]);
            for k in 0..=i {
                d[k] = col[k] / h;
            }
            for j in 0..=i {
                let row = w.row_mut(j);
                let g = dot(&col[..=i], &row[..=i]);
                axpy(-g, &d[..=i], &mut row[..=i]);
            }
        }
        for k in 0..=i {
            w[(i + 1, k)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = w[(j, n - 1)];
        w[(j, n - 1)] = 0.0;
    }
    w[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal `(d, e)` (EISPACK `tql2`), applying the
/// rotations to the rows of `w`.
fn ql_implicit(w: &mut RealMatrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(abs(d[l]) + abs(e[l]));
        let mut m = l;
        while m < n {
            if abs(e[m]) <= eps * tst1 {
                break;
            }
            m += 1;
        }
        let m = m.min(n - 1);

        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::NoConvergence {
                        index: l,
                        iterations: iter - 1,
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in &mut d[l + 2..n] {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    rotate_rows(w, i, c, s);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if abs(e[l]) <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Applies the plane rotation to rows `i` and `i + 1` of `w`.
#[inline]
fn rotate_rows(w: &mut RealMatrix, i: usize, c: f64, s: f64) {
    let cols = w.cols();
    let (head, tail) = w.data.split_at_mut((i + 1) * cols);
    let ri = &mut head[i * cols..];
    let rj = &mut tail[..cols];
    for (a, b) in ri.iter_mut().zip(rj.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}
