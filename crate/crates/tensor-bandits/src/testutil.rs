//! Shared helpers for the unit and integration tests.

use crate::linalg::{random_orthonormal, Matrix};
use crate::tensor::DenseTensor;
use crate::tucker::TuckerDecomp;
use rand::Rng as _;
use rand_distr::StandardNormal;

pub fn random_tensor(shape: &[usize], rng: &mut crate::Rng) -> DenseTensor {
    let count: usize = shape.iter().product();
    let data: Vec<f64> = (0..count).map(|_| rng.sample(StandardNormal)).collect();
    DenseTensor::new(shape.to_vec(), data).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut crate::Rng) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    m
}

/// Exact multi-linear rank (r,..,r) tensor from a random core and random
/// orthonormal factors.
pub fn random_low_rank(d: usize, n_modes: usize, r: usize, rng: &mut crate::Rng) -> DenseTensor {
    let core = random_tensor(&vec![r; n_modes], rng);
    let factors: Vec<Matrix> = (0..n_modes)
        .map(|_| random_orthonormal(d, r, rng))
        .collect();
    TuckerDecomp { core, factors }.reconstruct()
}

/// Tensor with prescribed mode singular values: a superdiagonal core with
/// entries `spectrum` pushed through random orthonormal factors. Every mode
/// unfolding then has exactly `spectrum` as its positive singular values.
pub fn tensor_with_spectrum(
    d: usize,
    n_modes: usize,
    spectrum: &[f64],
    rng: &mut crate::Rng,
) -> DenseTensor {
    let r = spectrum.len();
    let mut core = DenseTensor::zeros(vec![r; n_modes]);
    for (i, &s) in spectrum.iter().enumerate() {
        core.set(&vec![i; n_modes], s);
    }
    let factors: Vec<Matrix> = (0..n_modes)
        .map(|_| random_orthonormal(d, r, rng))
        .collect();
    TuckerDecomp { core, factors }.reconstruct()
}

pub fn assert_close(a: f64, b: f64, tol: f64) {
    assert!(
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())),
        "{a} vs {b}"
    );
}
