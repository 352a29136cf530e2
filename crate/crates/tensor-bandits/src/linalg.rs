//! Dense row-major matrix kernels: products, Householder QR, Cholesky,
//! one-sided Jacobi SVD. Everything is `f64` and allocation-simple; the
//! matrices in this crate are small (hundreds of rows at most on the hot
//! paths), so clarity and determinism win over BLAS plumbing.

use crate::error::{Error, Result};
use rand::Rng as _;
use rand_distr::StandardNormal;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `self^T * other` without materialising the transpose.
    pub fn tr_matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "tr_matmul shape mismatch");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self.get(k, i);
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `self * x` for a vector `x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| dot(self.row(i), x))
            .collect()
    }

    /// `self^T * x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len(), "tr_matvec shape mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        out
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Columns `lo..hi` as a new matrix.
    pub fn col_block(&self, lo: usize, hi: usize) -> Matrix {
        assert!(lo <= hi && hi <= self.cols);
        let mut out = Matrix::zeros(self.rows, hi - lo);
        for i in 0..self.rows {
            for j in lo..hi {
                out.set(i, j - lo, self.get(i, j));
            }
        }
        out
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "hcat shape mismatch");
        let mut out = Matrix::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            out.data[i * out.cols..i * out.cols + self.cols].copy_from_slice(self.row(i));
            out.data[i * out.cols + self.cols..(i + 1) * out.cols].copy_from_slice(other.row(i));
        }
        out
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Full Householder QR: `a = q * r` with `q` orthogonal `m x m` and `r`
/// upper triangular `m x n`.
pub fn qr_full(a: &Matrix) -> (Matrix, Matrix) {
    let m = a.rows;
    let n = a.cols;
    let mut r = a.clone();
    let mut q = Matrix::identity(m);
    let steps = n.min(m.saturating_sub(1));
    let mut v = vec![0.0; m];
    for k in 0..steps {
        let mut norm_x = 0.0;
        for i in k..m {
            let x = r.get(i, k);
            norm_x += x * x;
        }
        let norm_x = norm_x.sqrt();
        if norm_x == 0.0 {
            continue;
        }
        let alpha = if r.get(k, k) >= 0.0 { -norm_x } else { norm_x };
        for i in 0..k {
            v[i] = 0.0;
        }
        v[k] = r.get(k, k) - alpha;
        for i in (k + 1)..m {
            v[i] = r.get(i, k);
        }
        let vtv = dot(&v[k..], &v[k..]);
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        // r <- (I - beta v v^T) r
        for j in k..n {
            let mut s = 0.0;
            for i in k..m {
                s += v[i] * r.get(i, j);
            }
            let s = beta * s;
            for i in k..m {
                let val = r.get(i, j) - s * v[i];
                r.set(i, j, val);
            }
        }
        // q <- q (I - beta v v^T)
        for i in 0..m {
            let mut s = 0.0;
            for l in k..m {
                s += q.get(i, l) * v[l];
            }
            let s = beta * s;
            for l in k..m {
                let val = q.get(i, l) - s * v[l];
                q.set(i, l, val);
            }
        }
    }
    // Zero the (numerically tiny) subdiagonal of r.
    for i in 0..m {
        for j in 0..n.min(i) {
            r.set(i, j, 0.0);
        }
    }
    (q, r)
}

/// Cholesky factor `l` (lower triangular) of a symmetric positive definite
/// matrix, so `a = l * l^T`.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Numerical(format!(
                        "cholesky pivot {s:.3e} at index {i}; matrix not positive definite"
                    )));
                }
                l.set(i, i, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Solve `a x = b` for symmetric positive definite `a` via Cholesky.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let l = cholesky(a)?;
    Ok(cholesky_solve(&l, b))
}

/// Solve `l l^T x = b` given the Cholesky factor `l`.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l.get(i, k) * y[k];
        }
        y[i] /= l.get(i, i);
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l.get(k, i) * y[k];
        }
        y[i] /= l.get(i, i);
    }
    y
}

/// `log det a` for symmetric positive definite `a`.
pub fn log_det_spd(a: &Matrix) -> Result<f64> {
    let l = cholesky(a)?;
    Ok(2.0 * (0..l.rows).map(|i| l.get(i, i).ln()).sum::<f64>())
}

/// Thin singular value decomposition `a = u * diag(s) * v^T` with
/// `u: m x k`, `v: n x k`, `k = min(m, n)`, singular values sorted in
/// descending order. Columns of `u` and `v` are orthonormal even when the
/// matrix is rank deficient (null directions are completed deterministically).
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

pub fn jacobi_svd(a: &Matrix) -> Svd {
    if a.rows >= a.cols {
        let (u, s, v) = one_sided_jacobi(a);
        Svd { u, s, v }
    } else {
        let (u, s, v) = one_sided_jacobi(&a.transpose());
        Svd { u: v, s, v: u }
    }
}

/// One-sided Jacobi on a tall (or square) matrix: returns `(u, s, v)` with
/// `u: m x n`, `s: n`, `v: n x n`.
fn one_sided_jacobi(a: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let m = a.rows;
    let n = a.cols;
    let mut w = a.clone();
    let mut v = Matrix::identity(n);
    let tol = 1e-15;
    for _sweep in 0..64 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..m {
                    let x = w.get(i, p);
                    let y = w.get(i, q);
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq.abs() <= tol * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let x = w.get(i, p);
                    let y = w.get(i, q);
                    w.set(i, p, c * x - s * y);
                    w.set(i, q, s * x + c * y);
                }
                for i in 0..n {
                    let x = v.get(i, p);
                    let y = v.get(i, q);
                    v.set(i, p, c * x - s * y);
                    v.set(i, q, s * x + c * y);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sig: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| w.get(i, j).powi(2)).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sig[j].partial_cmp(&sig[i]).unwrap());
    let mut u = Matrix::zeros(m, n);
    let mut v_sorted = Matrix::zeros(n, n);
    let mut s_sorted = vec![0.0; n];
    for (dst, &src) in order.iter().enumerate() {
        s_sorted[dst] = sig[src];
        for i in 0..m {
            u.set(i, dst, w.get(i, src));
        }
        for i in 0..n {
            v_sorted.set(i, dst, v.get(i, src));
        }
    }
    sig = s_sorted;
    let smax = sig.first().copied().unwrap_or(0.0);
    let cutoff = smax * 1e-14;
    for j in 0..n {
        if sig[j] > cutoff && sig[j] > 0.0 {
            for i in 0..m {
                let val = u.get(i, j) / sig[j];
                u.set(i, j, val);
            }
        } else {
            sig[j] = sig[j].max(0.0);
            fill_orthonormal_column(&mut u, j);
        }
    }
    (u, sig, v_sorted)
}

/// Replace column `j` with a unit vector orthogonal to all other columns
/// that currently hold unit vectors. Deterministic: tries canonical basis
/// vectors in order and keeps the one with the largest residual.
fn fill_orthonormal_column(u: &mut Matrix, j: usize) {
    let m = u.rows;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for cand in 0..m {
        let mut v = vec![0.0; m];
        v[cand] = 1.0;
        for c in 0..u.cols {
            if c == j {
                continue;
            }
            let col = u.col(c);
            let nc = dot(&col, &col);
            if nc < 0.5 {
                continue; // not yet a finished unit column
            }
            let proj = dot(&v, &col) / nc;
            for i in 0..m {
                v[i] -= proj * col[i];
            }
        }
        let nv = norm2(&v);
        if nv > best.as_ref().map_or(0.0, |(n, _)| *n) {
            best = Some((nv, v));
        }
        if nv > 0.9 {
            break;
        }
    }
    let (nv, v) = best.expect("orthonormal completion failed");
    assert!(nv > 1e-8, "no orthogonal direction left for completion");
    for i in 0..m {
        u.set(i, j, v[i] / nv);
    }
}

/// Matrix with orthonormal columns drawn from the rotation-invariant
/// distribution (QR of a standard Gaussian matrix, signs fixed so the
/// factor is unique).
pub fn random_orthonormal(rows: usize, cols: usize, rng: &mut crate::Rng) -> Matrix {
    assert!(cols <= rows);
    let mut g = Matrix::zeros(rows, cols);
    for v in g.data.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    let (q, r) = qr_full(&g);
    let mut out = q.col_block(0, cols);
    for j in 0..cols {
        if r.get(j, j) < 0.0 {
            for i in 0..rows {
                let val = -out.get(i, j);
                out.set(i, j, val);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut crate::Rng) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for v in m.data.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        m
    }

    /// Cofactor-expansion determinant, the slow reference for small matrices.
    fn det_bruteforce(a: &Matrix) -> f64 {
        let n = a.rows;
        assert_eq!(n, a.cols);
        if n == 1 {
            return a.get(0, 0);
        }
        let mut det = 0.0;
        for j in 0..n {
            let mut minor = Matrix::zeros(n - 1, n - 1);
            for i in 1..n {
                let mut cj = 0;
                for k in 0..n {
                    if k == j {
                        continue;
                    }
                    minor.set(i - 1, cj, a.get(i, k));
                    cj += 1;
                }
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            det += sign * a.get(0, j) * det_bruteforce(&minor);
        }
        det
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())), "{a} vs {b}");
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = crate::Rng::seed_from_u64(1);
        let a = random_matrix(4, 6, &mut rng);
        let b = random_matrix(6, 3, &mut rng);
        let c = a.matmul(&b);
        for i in 0..4 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..6 {
                    s += a.get(i, k) * b.get(k, j);
                }
                assert_close(c.get(i, j), s, 1e-12);
            }
        }
        let d = a.transpose().tr_matmul(&b.transpose().transpose());
        // (a^T)^T b == a b
        for i in 0..4 {
            for j in 0..3 {
                assert_close(d.get(i, j), c.get(i, j), 1e-12);
            }
        }
    }

    #[test]
    fn qr_reconstructs_and_q_is_orthogonal() {
        let mut rng = crate::Rng::seed_from_u64(2);
        for &(m, n) in &[(5usize, 3usize), (6, 6), (8, 2), (3, 1)] {
            let a = random_matrix(m, n, &mut rng);
            let (q, r) = qr_full(&a);
            let qtq = q.tr_matmul(&q);
            for i in 0..m {
                for j in 0..m {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_close(qtq.get(i, j), want, 1e-12);
                }
            }
            let qr = q.matmul(&r);
            for i in 0..m {
                for j in 0..n {
                    assert_close(qr.get(i, j), a.get(i, j), 1e-12);
                }
            }
            for i in 0..m {
                for j in 0..n.min(i) {
                    assert_eq!(r.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn cholesky_solves_and_log_det_matches_cofactor_expansion() {
        let mut rng = crate::Rng::seed_from_u64(3);
        for n in 1..=6 {
            let g = random_matrix(n + 2, n, &mut rng);
            let mut a = g.tr_matmul(&g);
            for i in 0..n {
                let v = a.get(i, i) + 0.5;
                a.set(i, i, v);
            }
            let x_true: Vec<f64> = (0..n).map(|i| (i as f64) - 1.5).collect();
            let b = a.matvec(&x_true);
            let x = solve_spd(&a, &b).unwrap();
            for i in 0..n {
                assert_close(x[i], x_true[i], 1e-9);
            }
            let ld = log_det_spd(&a).unwrap();
            assert_close(ld, det_bruteforce(&a).ln(), 1e-9);
        }
    }

    #[test]
    fn svd_reconstructs_random_matrices() {
        let mut rng = crate::Rng::seed_from_u64(4);
        for &(m, n) in &[(5usize, 3usize), (3, 5), (6, 6), (1, 4), (7, 1)] {
            let a = random_matrix(m, n, &mut rng);
            let svd = jacobi_svd(&a);
            let k = m.min(n);
            assert_eq!(svd.u.cols, k);
            assert_eq!(svd.v.cols, k);
            for j in 1..k {
                assert!(svd.s[j - 1] >= svd.s[j]);
            }
            assert!(svd.s.iter().all(|&s| s >= 0.0));
            // u, v orthonormal
            let utu = svd.u.tr_matmul(&svd.u);
            let vtv = svd.v.tr_matmul(&svd.v);
            for i in 0..k {
                for j in 0..k {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_close(utu.get(i, j), want, 1e-10);
                    assert_close(vtv.get(i, j), want, 1e-10);
                }
            }
            // reconstruction
            let mut us = svd.u.clone();
            for j in 0..k {
                for i in 0..m {
                    let v = us.get(i, j) * svd.s[j];
                    us.set(i, j, v);
                }
            }
            let rec = us.matmul(&svd.v.transpose());
            for i in 0..m {
                for j in 0..n {
                    assert_close(rec.get(i, j), a.get(i, j), 1e-10);
                }
            }
            // energy identity
            let energy: f64 = svd.s.iter().map(|s| s * s).sum();
            assert_close(energy, a.frob_norm().powi(2), 1e-10);
        }
    }

    #[test]
    fn svd_handles_rank_deficiency() {
        let mut rng = crate::Rng::seed_from_u64(5);
        let x = random_matrix(5, 1, &mut rng);
        let y = random_matrix(3, 1, &mut rng);
        let a = x.matmul(&y.transpose());
        let svd = jacobi_svd(&a);
        assert!(svd.s[0] > 1e-6);
        assert!(svd.s[1].abs() < 1e-12 && svd.s[2].abs() < 1e-12);
        let utu = svd.u.tr_matmul(&svd.u);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_close(utu.get(i, j), want, 1e-10);
            }
        }
        let zero = Matrix::zeros(4, 4);
        let svd0 = jacobi_svd(&zero);
        assert!(svd0.s.iter().all(|&s| s == 0.0));
        let utu0 = svd0.u.tr_matmul(&svd0.u);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_close(utu0.get(i, j), want, 1e-12);
            }
        }
    }

    #[test]
    fn random_orthonormal_has_orthonormal_columns() {
        let mut rng = crate::Rng::seed_from_u64(6);
        let q = random_orthonormal(7, 3, &mut rng);
        let qtq = q.tr_matmul(&q);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_close(qtq.get(i, j), want, 1e-12);
            }
        }
    }
}
