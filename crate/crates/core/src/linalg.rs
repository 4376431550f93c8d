//! Dense kernels used by the solver.
//!
//! Matrices are stored row-major. Every kernel uses a fixed summation order,
//! so identical inputs give bit-identical outputs. `matvec` and
//! `matvec_transpose` accumulate each output entry sequentially in index
//! order, which makes them agree exactly with a textbook double loop.

#![allow(clippy::needless_range_loop)]

use crate::error::{check_len, Error, Result};

/// A dense real matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Wraps row-major `data`. Fails on a shape mismatch or a non-finite entry.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::BadShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from column-major `data` (the Matrix Market array order).
    pub fn from_col_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::BadShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        let mut out = vec![0.0; rows * cols];
        for j in 0..cols {
            for i in 0..rows {
                out[i * cols + j] = data[j * rows + i];
            }
        }
        Self::from_row_major(rows, cols, out)
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            check_len("from_rows", cols, r.len())?;
            data.extend_from_slice(r);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

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
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Entries in column-major order.
    pub fn to_col_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            out.extend((0..self.rows).map(|i| self.get(i, j)));
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Adds `alpha` to every diagonal entry of a square matrix.
    pub fn add_diagonal(&mut self, alpha: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self.data[i * self.cols + i] += alpha;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    /// `out = A v`. Each entry is a [`dot_lanes`] product, so the result does
    /// not depend on the number of rows.
    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("matvec", self.cols, v.len())?;
        check_len("matvec output", self.rows, out.len())?;
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot_lanes(self.row(i), v);
        }
        Ok(())
    }

    /// `out_u = A u` and `out_v = A v` in one sweep over `A`. Results are
    /// bit-identical to two calls of [`matvec_into`](Self::matvec_into).
    pub fn matvec2_into(
        &self,
        u: &[f64],
        v: &[f64],
        out_u: &mut [f64],
        out_v: &mut [f64],
    ) -> Result<()> {
        check_len("matvec2 u", self.cols, u.len())?;
        check_len("matvec2 v", self.cols, v.len())?;
        check_len("matvec2 output", self.rows, out_u.len())?;
        check_len("matvec2 output", self.rows, out_v.len())?;
        // the second product reads the row from cache
        for i in 0..self.rows {
            let r = self.row(i);
            out_u[i] = dot_lanes(r, u);
            out_v[i] = dot_lanes(r, v);
        }
        Ok(())
    }

    /// `out = Aᵀ v`.
    pub fn matvec_transpose_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("matvec_transpose", self.rows, v.len())?;
        check_len("matvec_transpose output", self.cols, out.len())?;
        out.fill(0.0);
        // Rows are folded in four at a time, but each output entry is still
        // accumulated in row order.
        let mut i = 0;
        while i + 4 <= self.rows {
            let (r0, r1, r2, r3) = (
                self.row(i),
                self.row(i + 1),
                self.row(i + 2),
                self.row(i + 3),
            );
            let (v0, v1, v2, v3) = (v[i], v[i + 1], v[i + 2], v[i + 3]);
            for (j, o) in out.iter_mut().enumerate() {
                let mut t = *o;
                t += r0[j] * v0;
                t += r1[j] * v1;
                t += r2[j] * v2;
                t += r3[j] * v3;
                *o = t;
            }
            i += 4;
        }
        for k in i..self.rows {
            let vk = v[k];
            for (o, a) in out.iter_mut().zip(self.row(k)) {
                *o += a * vk;
            }
        }
        Ok(())
    }

    /// `out_p = Aᵀ p` and `out_q = Aᵀ q` in one sweep over `A`, bit-identical
    /// to two calls of [`matvec_transpose_into`](Self::matvec_transpose_into).
    pub fn matvec_transpose2_into(
        &self,
        p: &[f64],
        q: &[f64],
        out_p: &mut [f64],
        out_q: &mut [f64],
    ) -> Result<()> {
        check_len("matvec_transpose2 p", self.rows, p.len())?;
        check_len("matvec_transpose2 q", self.rows, q.len())?;
        check_len("matvec_transpose2 output", self.cols, out_p.len())?;
        check_len("matvec_transpose2 output", self.cols, out_q.len())?;
        out_p.fill(0.0);
        out_q.fill(0.0);
        let mut i = 0;
        while i + 2 <= self.rows {
            let (r0, r1) = (self.row(i), self.row(i + 1));
            let (p0, p1, q0, q1) = (p[i], p[i + 1], q[i], q[i + 1]);
            for ((op, oq), (a0, a1)) in out_p
                .iter_mut()
                .zip(out_q.iter_mut())
                .zip(r0.iter().zip(r1))
            {
                let mut s = *op;
                s += a0 * p0;
                s += a1 * p1;
                *op = s;
                let mut t = *oq;
                t += a0 * q0;
                t += a1 * q1;
                *oq = t;
            }
            i += 2;
        }
        if i < self.rows {
            let (pi, qi) = (p[i], q[i]);
            for ((op, oq), a) in out_p.iter_mut().zip(out_q.iter_mut()).zip(self.row(i)) {
                *op += a * pi;
                *oq += a * qi;
            }
        }
        Ok(())
    }

    /// `out = A v`, skipping the zero entries of `v`. Each entry sums the
    /// remaining terms in column order, so the cost is `O(m · nnz(v))`.
    pub fn matvec_sparse_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("matvec_sparse", self.cols, v.len())?;
        check_len("matvec_sparse output", self.rows, out.len())?;
        out.fill(0.0);
        let d = self.cols;
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                for (i, o) in out.iter_mut().enumerate() {
                    *o += self.data[i * d + j] * vj;
                }
            }
        }
        Ok(())
    }

    /// One pass over `A` that chains a transposed product into a forward one.
    ///
    /// Columns are visited in blocks `J` of [`SWEEP_BLOCK`] (the last block
    /// may be shorter). For each block, `(Aᵀp)_J` and `(Aᵀq)_J` are handed to
    /// `update(j0, atp, atq, v_J)`, which may rewrite `v_J`; the rewritten
    /// block is then folded into `av = A v` while it is still in cache, so
    /// `A` is streamed from memory once.
    ///
    /// The transposed products are bit-identical to
    /// [`matvec_transpose_into`](Self::matvec_transpose_into) and `av` to
    /// [`matvec_sparse_into`](Self::matvec_sparse_into).
    pub fn sweep_into<F>(
        &self,
        p: &[f64],
        q: &[f64],
        v: &mut [f64],
        av: &mut [f64],
        mut update: F,
    ) -> Result<()>
    where
        F: FnMut(usize, &[f64], &[f64], &mut [f64]),
    {
        let (m, d) = (self.rows, self.cols);
        check_len("sweep p", m, p.len())?;
        check_len("sweep q", m, q.len())?;
        check_len("sweep v", d, v.len())?;
        check_len("sweep output", m, av.len())?;
        av.fill(0.0);
        let mut tp = vec![0.0f64; SWEEP_BLOCK];
        let mut tq = vec![0.0f64; SWEEP_BLOCK];
        let mut j0 = 0;
        while j0 < d {
            let b = SWEEP_BLOCK.min(d - j0);
            let (tp, tq) = (&mut tp[..b], &mut tq[..b]);
            tp.fill(0.0);
            tq.fill(0.0);
            // four rows per pass over the block; each entry still sums in row order
            let mut i = 0;
            while i + 4 <= m {
                let s0 = &self.data[i * d + j0..i * d + j0 + b];
                let s1 = &self.data[(i + 1) * d + j0..(i + 1) * d + j0 + b];
                let s2 = &self.data[(i + 2) * d + j0..(i + 2) * d + j0 + b];
                let s3 = &self.data[(i + 3) * d + j0..(i + 3) * d + j0 + b];
                let (p0, p1, p2, p3) = (p[i], p[i + 1], p[i + 2], p[i + 3]);
                let (q0, q1, q2, q3) = (q[i], q[i + 1], q[i + 2], q[i + 3]);
                for k in 0..b {
                    let (a0, a1, a2, a3) = (s0[k], s1[k], s2[k], s3[k]);
                    let mut x = tp[k];
                    x += a0 * p0;
                    x += a1 * p1;
                    x += a2 * p2;
                    x += a3 * p3;
                    tp[k] = x;
                    let mut y = tq[k];
                    y += a0 * q0;
                    y += a1 * q1;
                    y += a2 * q2;
                    y += a3 * q3;
                    tq[k] = y;
                }
                i += 4;
            }
            for i in i..m {
                let seg = &self.data[i * d + j0..i * d + j0 + b];
                let (pi, qi) = (p[i], q[i]);
                for ((a, sp), sq) in seg.iter().zip(tp.iter_mut()).zip(tq.iter_mut()) {
                    *sp += a * pi;
                    *sq += a * qi;
                }
            }
            let vb = &mut v[j0..j0 + b];
            update(j0, tp, tq, vb);
            let nnz = vb.iter().filter(|&&e| e != 0.0).count();
            if 4 * nnz > b {
                // Mostly dense: row by row, with zero terms included. Adding
                // `a · 0` to a partial sum that is never `−0` leaves it
                // unchanged, so the result matches the sparse order.
                let mut i = 0;
                while i + 4 <= m {
                    let s0 = &self.data[i * d + j0..i * d + j0 + b];
                    let s1 = &self.data[(i + 1) * d + j0..(i + 1) * d + j0 + b];
                    let s2 = &self.data[(i + 2) * d + j0..(i + 2) * d + j0 + b];
                    let s3 = &self.data[(i + 3) * d + j0..(i + 3) * d + j0 + b];
                    let (mut c0, mut c1, mut c2, mut c3) = (av[i], av[i + 1], av[i + 2], av[i + 3]);
                    for (k, &vj) in vb.iter().enumerate() {
                        c0 += s0[k] * vj;
                        c1 += s1[k] * vj;
                        c2 += s2[k] * vj;
                        c3 += s3[k] * vj;
                    }
                    av[i..i + 4].copy_from_slice(&[c0, c1, c2, c3]);
                    i += 4;
                }
                for i in i..m {
                    let seg = &self.data[i * d + j0..i * d + j0 + b];
                    let mut c = av[i];
                    for (a, &vj) in seg.iter().zip(vb.iter()) {
                        c += a * vj;
                    }
                    av[i] = c;
                }
            } else {
                for (k, &vj) in vb.iter().enumerate() {
                    if vj != 0.0 {
                        for (i, o) in av.iter_mut().enumerate() {
                            *o += self.data[i * d + j0 + k] * vj;
                        }
                    }
                }
            }
            j0 += b;
        }
        Ok(())
    }
}

/// Returns `A v`.
pub fn matvec(a: &DenseMatrix, v: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; a.rows()];
    a.matvec_into(v, &mut out)?;
    Ok(out)
}

/// Returns `Aᵀ v`.
pub fn matvec_transpose(a: &DenseMatrix, v: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; a.cols()];
    a.matvec_transpose_into(v, &mut out)?;
    Ok(out)
}

/// Returns the Gram matrix `A Aᵀ`.
///
/// Only the upper triangle is computed; the lower triangle is a mirror, so
/// the result is exactly symmetric.
pub fn gram(a: &DenseMatrix) -> DenseMatrix {
    let m = a.rows();
    let mut g = DenseMatrix::zeros(m, m);
    for i in 0..m {
        let ri = a.row(i);
        for j in i..m {
            let s = dot_lanes(ri, a.row(j));
            g.data[i * m + j] = s;
            g.data[j * m + i] = s;
        }
    }
    g
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = M`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    dim: usize,
    /// Row-major `dim × dim`; the strict upper part is zero.
    data: Vec<f64>,
}

impl LowerTriangular {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.data[i * self.dim + j]
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix {
            rows: self.dim,
            cols: self.dim,
            data: self.data.clone(),
        }
    }

    /// `L Lᵀ`, for reconstruction checks.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.dim;
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s = dot(
                    &self.data[i * n..i * n + j + 1],
                    &self.data[j * n..j * n + j + 1],
                );
                out.data[i * n + j] = s;
                out.data[j * n + i] = s;
            }
        }
        out
    }

    /// Solves `L Lᵀ w = b` in place (forward then backward substitution).
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        let n = self.dim;
        check_len("solve_cholesky", n, b.len())?;
        for i in 0..n {
            let row = &self.data[i * n..i * n + i];
            let s = b[i] - dot_lanes(row, &b[..i]);
            b[i] = s / self.data[i * n + i];
        }
        for i in (0..n).rev() {
            let xi = b[i] / self.data[i * n + i];
            b[i] = xi;
            let row = &self.data[i * n..i * n + i];
            for (bk, l) in b[..i].iter_mut().zip(row) {
                *bk -= l * xi;
            }
        }
        Ok(())
    }
}

/// Cholesky factorization of a symmetric positive definite matrix.
///
/// Reads only the lower triangle of `m`. No regularization is applied: a
/// non-positive pivot is reported as an error.
pub fn cholesky(m: &DenseMatrix) -> Result<LowerTriangular> {
    let n = m.rows();
    check_len("cholesky", n, m.cols())?;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s = dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
            let v = m.get(i, j) - s;
            if i == j {
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::NotPositiveDefinite { step: i, pivot: v });
                }
                l[i * n + i] = v.sqrt();
            } else {
                l[i * n + j] = v / l[j * n + j];
            }
        }
    }
    Ok(LowerTriangular { dim: n, data: l })
}

/// Returns `w = L⁻ᵀ L⁻¹ b`.
pub fn solve_cholesky(l: &LowerTriangular, b: &[f64]) -> Result<Vec<f64>> {
    let mut w = b.to_vec();
    l.solve_in_place(&mut w)?;
    Ok(w)
}

/// Solves a general square system by Gaussian elimination with partial
/// pivoting. Slow and allocation-heavy; meant for oracles and small systems.
pub fn solve_dense(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = m.rows();
    check_len("solve_dense", n, m.cols())?;
    check_len("solve_dense rhs", n, b.len())?;
    let mut a = m.data.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let (piv, max) =
            (col..n)
                .map(|r| (r, a[r * n + col].abs()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if max == 0.0 {
            return Err(Error::Singular { column: col });
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        let p = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / p;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            x[r] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= a[i * n + k] * x[k];
        }
        x[i] = s / a[i * n + i];
    }
    Ok(x)
}

/// Sequential dot product.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

const LANES: usize = 8;

/// Column block of [`DenseMatrix::sweep_into`]; a multiple of the lane count.
pub const SWEEP_BLOCK: usize = 32 * LANES;

#[inline]
fn fold_lanes(acc: &[f64; LANES]) -> f64 {
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

/// Dot product with eight fixed accumulator lanes, combined in a fixed order.
/// Deterministic, and fast because the lanes vectorize.
pub fn dot_lanes(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let full = n - n % LANES;
    let mut acc = [0.0f64; LANES];
    for c in 0..full / LANES {
        let x: &[f64; LANES] = a[c * LANES..(c + 1) * LANES].try_into().unwrap();
        let y: &[f64; LANES] = b[c * LANES..(c + 1) * LANES].try_into().unwrap();
        for k in 0..LANES {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = fold_lanes(&acc);
    for j in full..n {
        s += a[j] * b[j];
    }
    s
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn norm1(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |s, x| s + x.abs())
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |s: f64, x| s.max(x.abs()))
}

/// `‖a − b‖₂`.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s.sqrt()
}
