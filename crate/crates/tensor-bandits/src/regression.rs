//! Estimating a system tensor from noisy linear measurements
//! r_t = ⟨A_t, X⟩ + noise. Two estimators are provided: an exact ridge
//! solve over the full vectorized tensor followed by rank truncation (for
//! small total dimension), and alternating least squares on the Tucker
//! parametrization (for anything larger). Also home to the two measurement
//! arm samplers used to collect such datasets.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, qr_full, random_orthonormal, Matrix};
use crate::tensor::DenseTensor;
use crate::tucker::{hosvd, TuckerDecomp};
use rand::Rng as _;
use rand_distr::StandardNormal;

/// Largest total dimension d^N the full ridge solve will accept.
pub const RIDGE_DIM_CAP: usize = 20_000;

/// Measurement arms (Frobenius norm at most one) with their rewards.
#[derive(Debug, Clone)]
pub struct MeasurementDataset {
    arms: Vec<DenseTensor>,
    rewards: Vec<f64>,
}

impl MeasurementDataset {
    pub fn new(arms: Vec<DenseTensor>, rewards: Vec<f64>) -> Result<Self> {
        if arms.is_empty() || arms.len() != rewards.len() {
            return Err(Error::Invalid(format!(
                "need equally many arms and rewards, at least one; got {} and {}",
                arms.len(),
                rewards.len()
            )));
        }
        let shape = arms[0].shape().to_vec();
        for a in &arms {
            if a.shape() != shape.as_slice() {
                return Err(Error::Shape("arms must share a shape".into()));
            }
            if a.frob_norm() > 1.0 + 1e-12 {
                return Err(Error::Invalid(format!(
                    "arm norm {} exceeds 1",
                    a.frob_norm()
                )));
            }
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::Invalid("rewards must be finite".into()));
        }
        Ok(MeasurementDataset { arms, rewards })
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn arms(&self) -> &[DenseTensor] {
        &self.arms
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }
}

/// Outcome of a fit: the estimate, how hard it worked, and how well it fits.
#[derive(Debug, Clone)]
pub struct RegressionReport {
    pub estimate: TuckerDecomp,
    pub iterations: usize,
    /// Root-mean-square fit error of the final estimate on the dataset.
    pub residual: f64,
    /// ‖estimate − truth‖_F when the caller supplied the truth
    /// (diagnostic only; the learner never sees it).
    pub eta_observed: Option<f64>,
    /// Sum-of-squares objective after the initializer and after each sweep
    /// (alternating solver only).
    pub objective_history: Vec<f64>,
}

/// Dense measurement arm: i.i.d. Gaussian entries with variance 1/d^N, so
/// the squared norm is 1 in expectation; rescaled onto the unit sphere in
/// the rare case it lands outside.
pub fn sample_gaussian_arm(d: usize, n_modes: usize, rng: &mut crate::Rng) -> DenseTensor {
    assert!(d >= 1 && n_modes >= 1);
    let dim = d.pow(n_modes as u32);
    let sd = (1.0 / dim as f64).sqrt();
    let data: Vec<f64> = (0..dim)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut t = DenseTensor::new(vec![d; n_modes], data).unwrap();
    let norm = t.frob_norm();
    if norm > 1.0 {
        t = t.scale(1.0 / norm);
    }
    t
}

/// The two measurement-arm distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmRegime {
    Gaussian,
    OneHot,
}

/// Draw `t1` measurement arms of the given regime against a known system
/// tensor, with Gaussian observation noise.
pub fn collect_dataset(
    truth: &DenseTensor,
    t1: usize,
    regime: ArmRegime,
    noise_std: f64,
    rng: &mut crate::Rng,
) -> Result<MeasurementDataset> {
    if noise_std < 0.0 {
        return Err(Error::Invalid("noise level must be nonnegative".into()));
    }
    let d = truth.shape()[0];
    let n_modes = truth.order();
    let mut arms = Vec::with_capacity(t1);
    let mut rewards = Vec::with_capacity(t1);
    for _ in 0..t1 {
        let a = match regime {
            ArmRegime::Gaussian => sample_gaussian_arm(d, n_modes, rng),
            ArmRegime::OneHot => sample_one_hot_arm(d, n_modes, rng),
        };
        let z: f64 = rng.sample(StandardNormal);
        rewards.push(a.inner(truth)? + noise_std * z);
        arms.push(a);
    }
    MeasurementDataset::new(arms, rewards)
}

/// Coordinate-probe arm: a single 1 at a uniformly random cell.
pub fn sample_one_hot_arm(d: usize, n_modes: usize, rng: &mut crate::Rng) -> DenseTensor {
    assert!(d >= 1 && n_modes >= 1);
    let dim = d.pow(n_modes as u32);
    let mut t = DenseTensor::zeros(vec![d; n_modes]);
    let cell = rng.random_range(0..dim);
    t.data_mut()[cell] = 1.0;
    t
}

fn rms_residual(data: &MeasurementDataset, estimate: &DenseTensor) -> f64 {
    let t1 = data.len() as f64;
    let ss: f64 = data
        .arms()
        .iter()
        .zip(data.rewards())
        .map(|(a, &r)| (a.inner(estimate).unwrap() - r).powi(2))
        .sum();
    (ss / t1).sqrt()
}

/// Ridge least squares over the full d^N-dimensional tensor, truncated to
/// multi-linear rank (r,..,r) afterwards. Solves whichever of the primal
/// (d^N) or dual (T_1) normal equations is smaller.
pub fn fit_ridge_hosvd(
    data: &MeasurementDataset,
    d: usize,
    n_modes: usize,
    r: usize,
    ridge: f64,
    truth: Option<&DenseTensor>,
) -> Result<RegressionReport> {
    if ridge <= 0.0 {
        return Err(Error::Invalid("ridge must be positive".into()));
    }
    let dim = d.pow(n_modes as u32);
    if dim > RIDGE_DIM_CAP {
        return Err(Error::Invalid(format!(
            "total dimension {dim} exceeds the full-solve cap {RIDGE_DIM_CAP}; use fit_als"
        )));
    }
    let shape = vec![d; n_modes];
    if data.arms()[0].shape() != shape.as_slice() {
        return Err(Error::Shape(format!(
            "arms have shape {:?}, expected {shape:?}",
            data.arms()[0].shape()
        )));
    }
    let t1 = data.len();
    let x = if t1 < dim {
        // dual: x = A^T (A A^T + ridge I)^{-1} rewards
        let mut k = Matrix::zeros(t1, t1);
        for s in 0..t1 {
            for t in s..t1 {
                let v = data.arms()[s].inner(&data.arms()[t]).unwrap();
                k.set(s, t, v);
                k.set(t, s, v);
            }
            let v = k.get(s, s) + ridge;
            k.set(s, s, v);
        }
        let l = cholesky(&k)?;
        let alpha = cholesky_solve(&l, data.rewards());
        let mut x = vec![0.0; dim];
        for (a, &w) in data.arms().iter().zip(&alpha) {
            for (xi, &ai) in x.iter_mut().zip(a.data()) {
                *xi += w * ai;
            }
        }
        x
    } else {
        // primal: (A^T A + ridge I) x = A^T rewards
        let mut g = Matrix::zeros(dim, dim);
        let mut b = vec![0.0; dim];
        for (a, &rw) in data.arms().iter().zip(data.rewards()) {
            let v = a.data();
            for i in 0..dim {
                let vi = v[i];
                if vi == 0.0 {
                    continue;
                }
                b[i] += rw * vi;
                let row = &mut g.data[i * dim..(i + 1) * dim];
                for (gij, &vj) in row.iter_mut().zip(v) {
                    *gij += vi * vj;
                }
            }
        }
        for i in 0..dim {
            let v = g.get(i, i) + ridge;
            g.set(i, i, v);
        }
        let l = cholesky(&g)?;
        cholesky_solve(&l, &b)
    };
    let full = DenseTensor::new(shape, x)?;
    let estimate = hosvd(&full, &vec![r; n_modes])?;
    let rec = estimate.reconstruct();
    let eta_observed = match truth {
        Some(t) => Some(rec.sub(t)?.frob_norm()),
        None => None,
    };
    Ok(RegressionReport {
        residual: rms_residual(data, &rec),
        estimate,
        iterations: 1,
        eta_observed,
        objective_history: Vec::new(),
    })
}

/// Knobs for the alternating solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsOptions {
    pub max_iters: usize,
    /// Stop when the relative objective decrease over a sweep drops below
    /// this.
    pub tol: f64,
    /// Regularization added to a least-squares subproblem only when its
    /// normal matrix is singular.
    pub init_ridge: f64,
}

impl Default for AlsOptions {
    fn default() -> Self {
        AlsOptions {
            max_iters: 200,
            tol: 1e-9,
            init_ridge: 1e-6,
        }
    }
}

fn solve_normal_eq(m: &Matrix, b: &[f64], fallback_ridge: f64) -> Result<Vec<f64>> {
    match cholesky(m) {
        Ok(l) => Ok(cholesky_solve(&l, b)),
        Err(_) => {
            let mut m2 = m.clone();
            let mut ridge = fallback_ridge.max(1e-300);
            for _ in 0..8 {
                for i in 0..m2.rows {
                    let v = m2.get(i, i) + ridge;
                    m2.set(i, i, v);
                }
                if let Ok(l) = cholesky(&m2) {
                    return Ok(cholesky_solve(&l, b));
                }
                ridge *= 100.0;
            }
            Err(Error::Numerical(
                "least-squares subproblem stayed singular under regularization".into(),
            ))
        }
    }
}

fn objective(data: &MeasurementDataset, estimate: &DenseTensor) -> f64 {
    data.arms()
        .iter()
        .zip(data.rewards())
        .map(|(a, &r)| (a.inner(estimate).unwrap() - r).powi(2))
        .sum()
}

/// Alternating least squares on the Tucker parametrization: one factor at a
/// time (others fixed), then the core, each an exact least-squares solve, so
/// the objective never increases. Factors are re-orthonormalized every sweep
/// with the triangular part absorbed into the core, which leaves the fitted
/// tensor unchanged.
pub fn fit_als(
    data: &MeasurementDataset,
    d: usize,
    n_modes: usize,
    r: usize,
    opts: AlsOptions,
    rng: &mut crate::Rng,
    truth: Option<&DenseTensor>,
) -> Result<RegressionReport> {
    if data.len() < r * d {
        return Err(Error::Invalid(format!(
            "need at least r*d = {} measurements, got {}",
            r * d,
            data.len()
        )));
    }
    if opts.tol < 0.0 || opts.init_ridge <= 0.0 {
        return Err(Error::Invalid("bad solver options".into()));
    }
    let dim = d.pow(n_modes as u32);
    let shape = vec![d; n_modes];
    if data.arms()[0].shape() != shape.as_slice() {
        return Err(Error::Shape(format!(
            "arms have shape {:?}, expected {shape:?}",
            data.arms()[0].shape()
        )));
    }
    let ranks = vec![r; n_modes];
    let (mut core, mut factors) = if dim <= RIDGE_DIM_CAP {
        let init = fit_ridge_hosvd(data, d, n_modes, r, opts.init_ridge, None)?;
        (init.estimate.core, init.estimate.factors)
    } else {
        let factors: Vec<Matrix> = (0..n_modes).map(|_| random_orthonormal(d, r, rng)).collect();
        let mut core = DenseTensor::zeros(ranks.clone());
        solve_core(data, &factors, &mut core, opts.init_ridge)?;
        (core, factors)
    };

    let current =
        |core: &DenseTensor, factors: &[Matrix]| TuckerDecomp {
            core: core.clone(),
            factors: factors.to_vec(),
        }
        .reconstruct();

    let mut history = vec![objective(data, &current(&core, &factors))];
    let mut sweeps = 0usize;
    for _ in 0..opts.max_iters {
        for n in 0..n_modes {
            update_factor(data, &mut factors, &mut core, n, opts.init_ridge)?;
        }
        solve_core(data, &factors, &mut core, opts.init_ridge)?;
        sweeps += 1;
        let obj = objective(data, &current(&core, &factors));
        let prev = *history.last().unwrap();
        history.push(obj);
        if prev - obj < opts.tol * prev.max(1e-300) {
            break;
        }
    }
    let estimate = TuckerDecomp { core, factors };
    let rec = estimate.reconstruct();
    let eta_observed = match truth {
        Some(t) => Some(rec.sub(t)?.frob_norm()),
        None => None,
    };
    Ok(RegressionReport {
        residual: rms_residual(data, &rec),
        estimate,
        iterations: sweeps,
        eta_observed,
        objective_history: history,
    })
}

/// Least-squares update of factor `n`: the model is linear in U_n through
/// the per-arm coefficient matrix M_n(A ×_{m≠n} U_mᵀ) · M_n(core)ᵀ.
fn update_factor(
    data: &MeasurementDataset,
    factors: &mut [Matrix],
    core: &mut DenseTensor,
    n: usize,
    fallback_ridge: f64,
) -> Result<()> {
    let d = factors[n].rows;
    let r = factors[n].cols;
    let p = d * r;
    let core_mat_t = core.matricize(n).transpose();
    let mut normal = Matrix::zeros(p, p);
    let mut rhs = vec![0.0; p];
    for (a, &rw) in data.arms().iter().zip(data.rewards()) {
        let mut contracted = a.clone();
        for (m, f) in factors.iter().enumerate() {
            if m != n {
                contracted = contracted.mode_n_product(&f.transpose(), m)?;
            }
        }
        let feat = contracted.matricize(n).matmul(&core_mat_t); // d x r
        for i in 0..p {
            let fi = feat.data[i];
            if fi == 0.0 {
                continue;
            }
            rhs[i] += rw * fi;
            let row = &mut normal.data[i * p..(i + 1) * p];
            for (v, &fj) in row.iter_mut().zip(&feat.data) {
                *v += fi * fj;
            }
        }
    }
    let sol = solve_normal_eq(&normal, &rhs, fallback_ridge)?;
    let mut u = Matrix::zeros(d, r);
    u.data.copy_from_slice(&sol);
    // re-orthonormalize and push the triangular part into the core so the
    // fitted tensor is untouched
    let (q, rr) = qr_full(&u);
    let q_thin = q.col_block(0, r);
    let mut r_thin = Matrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            r_thin.set(i, j, rr.get(i, j));
        }
    }
    *core = core.mode_n_product(&r_thin, n)?;
    factors[n] = q_thin;
    Ok(())
}

/// Least-squares update of the core: the model is linear in the core through
/// the fully contracted arm A ×_{m} U_mᵀ.
fn solve_core(
    data: &MeasurementDataset,
    factors: &[Matrix],
    core: &mut DenseTensor,
    fallback_ridge: f64,
) -> Result<()> {
    let p = core.len();
    let mut normal = Matrix::zeros(p, p);
    let mut rhs = vec![0.0; p];
    for (a, &rw) in data.arms().iter().zip(data.rewards()) {
        let mut contracted = a.clone();
        for (m, f) in factors.iter().enumerate() {
            contracted = contracted.mode_n_product(&f.transpose(), m)?;
        }
        let feat = contracted.data();
        for i in 0..p {
            let fi = feat[i];
            if fi == 0.0 {
                continue;
            }
            rhs[i] += rw * fi;
            let row = &mut normal.data[i * p..(i + 1) * p];
            for (v, &fj) in row.iter_mut().zip(feat) {
                *v += fi * fj;
            }
        }
    }
    let sol = solve_normal_eq(&normal, &rhs, fallback_ridge)?;
    core.data_mut().copy_from_slice(&sol);
    Ok(())
}
