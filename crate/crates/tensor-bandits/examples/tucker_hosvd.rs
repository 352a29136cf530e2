//! Higher-order SVD and Tucker decompositions: recovering an exact low
//! multilinear rank, truncating a noisy tensor, and reading off the mode-wise
//! spectral floor that drives the bandit's subspace guarantees.
//!
//! Run with: cargo run --example tucker_hosvd

use rand::Rng as _;
use rand::SeedableRng as _;
use rand_distr::StandardNormal;
use tensor_bandits::env::gen_system_tensor;
use tensor_bandits::error::Result;
use tensor_bandits::tensor::DenseTensor;
use tensor_bandits::tucker::{
    hosvd, is_orthonormal, min_positive_singular_values, multilinear_rank, RANK_TOL,
};
use tensor_bandits::Rng;

fn main() -> Result<()> {
    let mut rng = Rng::seed_from_u64(11);
    let (d, n_modes, r) = (6usize, 3usize, 2usize);

    // A unit-norm system tensor with exact multilinear rank (2,2,2) and all
    // positive mode singular values at least 0.3.
    let x = gen_system_tensor(d, n_modes, r, 1.0, 0.3, &mut rng)?;
    println!(
        "system tensor: shape {:?}, norm {:.6}, multilinear rank {:?}",
        x.shape(),
        x.frob_norm(),
        multilinear_rank(&x, RANK_TOL)
    );
    let floors = min_positive_singular_values(&x)?;
    println!("smallest positive mode singular values: {floors:?}");

    // HOSVD at the true rank reconstructs the tensor exactly.
    let dec = hosvd(&x, &[r, r, r])?;
    let exact_err = dec.reconstruct().sub(&x)?.frob_norm();
    println!("rank-(2,2,2) reconstruction error: {exact_err:.3e}");
    for (mode, u) in dec.factors.iter().enumerate() {
        println!(
            "  mode-{mode} factor {} x {}, orthonormal: {}",
            u.rows,
            u.cols,
            is_orthonormal(u, 1e-10)
        );
    }

    // Add entrywise noise, truncate again, and compare the truncation error
    // to the perturbation size: the best rank-(2,2,2) approximation of the
    // noisy tensor stays within a small factor of the noise that was added.
    let noise_data: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
    let noise = DenseTensor::new(x.shape().to_vec(), noise_data)?;
    let eps = 0.05;
    let noisy = x.sub(&noise.scale(-eps / noise.frob_norm()))?;
    let trunc = hosvd(&noisy, &[r, r, r])?;
    let err_vs_clean = trunc.reconstruct().sub(&x)?.frob_norm();
    println!("noise of size {eps} added; truncated estimate is {err_vs_clean:.4} from the truth");

    // At full rank the decomposition is lossless for any tensor.
    let raw: Vec<f64> = (0..64).map(|_| rng.sample(StandardNormal)).collect();
    let dense = DenseTensor::new(vec![4, 4, 4], raw)?;
    let full = hosvd(&dense, &[4, 4, 4])?;
    println!(
        "full-rank identity check on a random 4x4x4 tensor: error {:.3e}",
        full.reconstruct().sub(&dense)?.frob_norm()
    );
    Ok(())
}
