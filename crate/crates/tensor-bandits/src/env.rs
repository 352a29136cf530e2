//! Synthetic bandit environments: low-rank system tensors with a controlled
//! spectral floor, a worst-case sign-tensor instance, per-step action
//! offers, and the noisy reward channel with regret accounting.

use crate::error::{Error, Result};
use crate::linalg::{random_orthonormal, Matrix};
use crate::tensor::DenseTensor;
use crate::tucker::TuckerDecomp;
use rand::Rng as _;
use rand_distr::StandardNormal;

/// How the action set is offered each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    /// m fresh unit-sphere tensors every step.
    FiniteResample { m: usize },
    /// m unit-sphere tensors drawn once and offered unchanged all horizon.
    FiniteFixed { m: usize },
    /// Any tensor in the closed unit Frobenius ball is playable.
    OpenBall,
}

/// The action set for one step.
#[derive(Debug, Clone)]
pub enum Offer {
    Finite(Vec<DenseTensor>),
    /// Play any tensor with Frobenius norm at most one.
    OpenBall,
}

/// System tensor with exact multi-linear rank (r,..,r), Frobenius norm
/// exactly `c`, and every mode unfolding's positive singular values at least
/// `omega_min`. Built from a superdiagonal core with an explicit spectrum,
/// rotated and embedded through random orthonormal factors, so the spectral
/// guarantees are exact rather than sampled-and-retried.
pub fn gen_system_tensor(
    d: usize,
    n_modes: usize,
    r: usize,
    c: f64,
    omega_min: f64,
    rng: &mut crate::Rng,
) -> Result<DenseTensor> {
    if r == 0 || r > d {
        return Err(Error::Invalid(format!("rank {r} invalid for dimension {d}")));
    }
    if c <= 0.0 || omega_min <= 0.0 {
        return Err(Error::Invalid("norm and spectral floor must be positive".into()));
    }
    let floor_energy = r as f64 * omega_min * omega_min;
    if floor_energy > c * c * (1.0 + 1e-12) {
        return Err(Error::Invalid(format!(
            "infeasible: r*omega_min^2 = {floor_energy:.6} exceeds C^2 = {:.6}; \
             lower omega_min or the rank, or raise C",
            c * c
        )));
    }
    // spectrum: s_i^2 = omega_min^2 + w_i (C^2 - r omega_min^2), w a random
    // point on the simplex, so sum s_i^2 = C^2 and min s_i >= omega_min
    let spare = (c * c - floor_energy).max(0.0);
    let gains: Vec<f64> = (0..r).map(|_| 0.25 + rng.random::<f64>()).collect();
    let total: f64 = gains.iter().sum();
    let spectrum: Vec<f64> = gains
        .iter()
        .map(|g| (omega_min * omega_min + spare * g / total).sqrt())
        .collect();
    let mut core = DenseTensor::zeros(vec![r; n_modes]);
    for (i, &s) in spectrum.iter().enumerate() {
        core.set(&vec![i; n_modes], s);
    }
    // rotate the core inside the rank-r space, then embed: neither step
    // moves any mode singular value
    for n in 0..n_modes {
        let q = random_orthonormal(r, r, rng);
        core = core.mode_n_product(&q, n)?;
    }
    let factors: Vec<Matrix> = (0..n_modes)
        .map(|_| random_orthonormal(d, r, rng))
        .collect();
    Ok(TuckerDecomp { core, factors }.reconstruct())
}

/// Worst-case instance: a core of i.i.d. uniform signs scaled by
/// Δ = (1/(8√3))·√(r^N/T), embedded in the leading r×..×r corner. Its
/// squared norm is r^(2N)/(192·T) exactly, independent of the signs.
pub fn gen_lower_bound_instance(
    d: usize,
    n_modes: usize,
    r: usize,
    t_horizon: usize,
    rng: &mut crate::Rng,
) -> Result<DenseTensor> {
    if r == 0 || r > d {
        return Err(Error::Invalid(format!("rank {r} invalid for dimension {d}")));
    }
    let r_pow = (r as f64).powi(n_modes as i32);
    if r_pow > 2.0 * t_horizon as f64 {
        return Err(Error::Invalid(format!(
            "requires r^N <= 2*T; got r^N = {r_pow} with T = {t_horizon}"
        )));
    }
    let delta = (r_pow / t_horizon as f64).sqrt() / (8.0 * 3f64.sqrt());
    let mut x = DenseTensor::zeros(vec![d; n_modes]);
    let mut idx = vec![0usize; n_modes];
    loop {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        x.set(&idx, sign * delta);
        let mut n = n_modes;
        loop {
            if n == 0 {
                return Ok(x);
            }
            n -= 1;
            idx[n] += 1;
            if idx[n] < r {
                break;
            }
            idx[n] = 0;
        }
    }
}

/// The gap scale of the worst-case instance.
pub fn lower_bound_delta(r: usize, n_modes: usize, t_horizon: usize) -> f64 {
    ((r as f64).powi(n_modes as i32) / t_horizon as f64).sqrt() / (8.0 * 3f64.sqrt())
}

/// A bandit instance: hidden system tensor, noise level, and an action
/// offer policy. Owns its RNG, so a seeded environment replays exactly.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    truth: DenseTensor,
    c_bound: f64,
    noise_std: f64,
    mode: ActionMode,
    rng: crate::Rng,
    fixed_offer: Option<Vec<DenseTensor>>,
    current: Option<CurrentOffer>,
}

#[derive(Debug, Clone)]
enum CurrentOffer {
    Finite { arms: Vec<DenseTensor>, best_mean: f64 },
    OpenBall { best_mean: f64 },
}

impl BanditEnv {
    pub fn new(
        truth: DenseTensor,
        c_bound: f64,
        noise_std: f64,
        mode: ActionMode,
        rng: crate::Rng,
    ) -> Result<Self> {
        if truth.frob_norm() > c_bound * (1.0 + 1e-9) {
            return Err(Error::Invalid(format!(
                "system tensor norm {} exceeds the bound {c_bound}",
                truth.frob_norm()
            )));
        }
        if noise_std < 0.0 {
            return Err(Error::Invalid("noise level must be nonnegative".into()));
        }
        if let ActionMode::FiniteResample { m } | ActionMode::FiniteFixed { m } = mode {
            if m == 0 {
                return Err(Error::Invalid("need at least one arm".into()));
            }
        }
        Ok(BanditEnv {
            truth,
            c_bound,
            noise_std,
            mode,
            rng,
            fixed_offer: None,
            current: None,
        })
    }

    pub fn truth(&self) -> &DenseTensor {
        &self.truth
    }

    pub fn c_bound(&self) -> f64 {
        self.c_bound
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn action_mode(&self) -> ActionMode {
        self.mode
    }

    fn sample_unit_sphere(&mut self) -> DenseTensor {
        let shape = self.truth.shape().to_vec();
        let count: usize = shape.iter().product();
        loop {
            let data: Vec<f64> = (0..count)
                .map(|_| self.rng.sample(StandardNormal))
                .collect();
            let norm = data.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                let data = data.into_iter().map(|v| v / norm).collect();
                return DenseTensor::new(shape, data).unwrap();
            }
        }
    }

    /// Produce this step's action set and remember its best mean reward for
    /// regret accounting.
    pub fn offer(&mut self) -> Offer {
        match self.mode {
            ActionMode::OpenBall => {
                let best = self.truth.frob_norm(); // argmax is truth/‖truth‖
                self.current = Some(CurrentOffer::OpenBall { best_mean: best });
                Offer::OpenBall
            }
            ActionMode::FiniteFixed { m } => {
                if self.fixed_offer.is_none() {
                    let arms: Vec<DenseTensor> =
                        (0..m).map(|_| self.sample_unit_sphere()).collect();
                    self.fixed_offer = Some(arms);
                }
                let arms = self.fixed_offer.clone().unwrap();
                let best = best_mean(&arms, &self.truth);
                self.current = Some(CurrentOffer::Finite {
                    arms: arms.clone(),
                    best_mean: best,
                });
                Offer::Finite(arms)
            }
            ActionMode::FiniteResample { m } => {
                let arms: Vec<DenseTensor> = (0..m).map(|_| self.sample_unit_sphere()).collect();
                let best = best_mean(&arms, &self.truth);
                self.current = Some(CurrentOffer::Finite {
                    arms: arms.clone(),
                    best_mean: best,
                });
                Offer::Finite(arms)
            }
        }
    }

    /// Play an arm from the current offer. Returns (reward, instantaneous
    /// regret). The noise draw advances the RNG even at zero noise, so
    /// traces replay identically across noise settings.
    pub fn step(&mut self, a: &DenseTensor) -> Result<(f64, f64)> {
        let norm = a.frob_norm();
        if norm > 1.0 + 1e-9 {
            return Err(Error::Invalid(format!("arm norm {norm} exceeds 1")));
        }
        let current = self
            .current
            .take()
            .ok_or_else(|| Error::Invalid("no outstanding offer; call offer() first".into()))?;
        let best_mean = match &current {
            CurrentOffer::OpenBall { best_mean } => *best_mean,
            CurrentOffer::Finite { arms, best_mean } => {
                let is_offered = arms.iter().any(|arm| {
                    arm.data()
                        .iter()
                        .zip(a.data())
                        .all(|(x, y)| (x - y).abs() <= 1e-12)
                });
                if !is_offered {
                    return Err(Error::Invalid(
                        "arm is not part of the current finite offer".into(),
                    ));
                }
                *best_mean
            }
        };
        let mean = a.inner(&self.truth)?;
        let z: f64 = self.rng.sample(StandardNormal);
        let reward = mean + self.noise_std * z;
        let regret = (best_mean - mean).max(0.0);
        Ok((reward, regret))
    }

    /// Play the i-th arm of the current finite offer.
    pub fn step_index(&mut self, i: usize) -> Result<(f64, f64)> {
        let arm = match &self.current {
            Some(CurrentOffer::Finite { arms, .. }) => arms
                .get(i)
                .cloned()
                .ok_or_else(|| Error::Invalid(format!("arm index {i} out of range")))?,
            _ => {
                return Err(Error::Invalid(
                    "no outstanding finite offer; call offer() first".into(),
                ))
            }
        };
        self.step(&arm)
    }
}

fn best_mean(arms: &[DenseTensor], truth: &DenseTensor) -> f64 {
    arms.iter()
        .map(|a| a.inner(truth).unwrap())
        .fold(f64::NEG_INFINITY, f64::max)
}
