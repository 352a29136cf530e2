//! Tucker decompositions via higher-order SVD, orthonormal complement
//! bases, and the per-mode spectral floor used to size confidence bounds.

use crate::error::{Error, Result};
use crate::linalg::{jacobi_svd, qr_full, Matrix};
use crate::tensor::DenseTensor;

/// Relative cutoff separating "positive" singular values from noise.
pub const RANK_TOL: f64 = 1e-10;

/// Core tensor plus one orthonormal factor matrix per mode.
#[derive(Debug, Clone)]
pub struct TuckerDecomp {
    pub core: DenseTensor,
    pub factors: Vec<Matrix>,
}

impl TuckerDecomp {
    pub fn new(core: DenseTensor, factors: Vec<Matrix>) -> Result<Self> {
        if factors.len() != core.order() {
            return Err(Error::Shape("one factor per core mode required".into()));
        }
        for (n, f) in factors.iter().enumerate() {
            if f.cols != core.shape()[n] {
                return Err(Error::Shape(format!(
                    "factor {n} has {} columns, core mode has length {}",
                    f.cols,
                    core.shape()[n]
                )));
            }
            if !is_orthonormal(f, 1e-10) {
                return Err(Error::Invalid(format!("factor {n} is not orthonormal")));
            }
        }
        Ok(TuckerDecomp { core, factors })
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.core.shape().to_vec()
    }

    /// Full tensor `core ×_1 U_1 ... ×_N U_N`.
    pub fn reconstruct(&self) -> DenseTensor {
        let mut out = self.core.clone();
        for (n, f) in self.factors.iter().enumerate() {
            out = out.mode_n_product(f, n).expect("factor shapes checked");
        }
        out
    }
}

pub fn is_orthonormal(m: &Matrix, tol: f64) -> bool {
    let g = m.tr_matmul(m);
    for i in 0..g.rows {
        for j in 0..g.cols {
            let want = if i == j { 1.0 } else { 0.0 };
            if (g.get(i, j) - want).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Thin SVD with a deterministic sign convention: in each left singular
/// vector the entry of largest magnitude is made positive (the right vector
/// flips with it), so repeated runs produce identical factors.
pub fn svd_thin(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let svd = jacobi_svd(m);
    let mut u = svd.u;
    let mut v = svd.v;
    for j in 0..u.cols {
        let mut best = 0usize;
        let mut best_abs = 0.0;
        for i in 0..u.rows {
            let a = u.get(i, j).abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if u.get(best, j) < 0.0 {
            for i in 0..u.rows {
                let x = -u.get(i, j);
                u.set(i, j, x);
            }
            for i in 0..v.rows {
                let x = -v.get(i, j);
                v.set(i, j, x);
            }
        }
    }
    (u, svd.s, v)
}

/// Higher-order SVD truncated to the given per-mode ranks: factor `n` holds
/// the top `ranks[n]` left singular vectors of the mode-n unfolding, and the
/// core is the tensor contracted against all factor transposes.
pub fn hosvd(y: &DenseTensor, ranks: &[usize]) -> Result<TuckerDecomp> {
    if ranks.len() != y.order() {
        return Err(Error::Shape("one rank per mode required".into()));
    }
    for (n, (&r, &d)) in ranks.iter().zip(y.shape()).enumerate() {
        if r == 0 || r > d {
            return Err(Error::Invalid(format!(
                "rank {r} invalid for mode {n} of length {d}"
            )));
        }
    }
    let mut factors = Vec::with_capacity(y.order());
    for (n, &r) in ranks.iter().enumerate() {
        let (u, _, _) = svd_thin(&y.matricize(n));
        factors.push(u.col_block(0, r));
    }
    let mut core = y.clone();
    for (n, f) in factors.iter().enumerate() {
        core = core.mode_n_product(&f.transpose(), n)?;
    }
    Ok(TuckerDecomp { core, factors })
}

/// Per-mode counts of singular values above `tol` times the mode's largest.
pub fn multilinear_rank(y: &DenseTensor, tol: f64) -> Vec<usize> {
    assert!(tol > 0.0);
    (0..y.order())
        .map(|n| {
            let (_, s, _) = svd_thin(&y.matricize(n));
            let smax = s.first().copied().unwrap_or(0.0);
            s.iter().filter(|&&x| x > tol * smax && x > 0.0).count()
        })
        .collect()
}

/// Orthonormal basis of the orthogonal complement of the column span of
/// `u`, as a (d, d−r) matrix. `[u | complement]` is square orthogonal.
pub fn complement_basis(u: &Matrix) -> Result<Matrix> {
    if u.cols > u.rows {
        return Err(Error::Shape("more columns than rows".into()));
    }
    if !is_orthonormal(u, 1e-10) {
        return Err(Error::Invalid("columns are not orthonormal".into()));
    }
    if u.cols == u.rows {
        return Ok(Matrix::zeros(u.rows, 0));
    }
    let (q, _) = qr_full(u);
    Ok(q.col_block(u.cols, u.rows))
}

/// Smallest positive singular value of each mode unfolding.
pub fn min_positive_singular_values(y: &DenseTensor) -> Result<Vec<f64>> {
    if y.frob_norm() == 0.0 {
        return Err(Error::Invalid(
            "zero tensor has no positive singular values".into(),
        ));
    }
    Ok((0..y.order())
        .map(|n| {
            let (_, s, _) = svd_thin(&y.matricize(n));
            let smax = s[0];
            s.iter()
                .copied()
                .filter(|&x| x > RANK_TOL * smax)
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// The spectral floor: minimum over modes of the smallest positive singular
/// value of the mode unfolding.
pub fn min_mode_singular_value(y: &DenseTensor) -> Result<f64> {
    Ok(min_positive_singular_values(y)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}
