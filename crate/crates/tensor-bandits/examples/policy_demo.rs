//! The norm-constrained optimism policy on its own, outside the tensor
//! machinery: a hidden parameter whose mass sits almost entirely in the
//! first q coordinates, closed-form regularization weights, and a head-to-
//! head against an ordinary uniform ridge showing why the split matters.
//!
//! Run with: cargo run --example policy_demo

use rand::Rng as _;
use rand::SeedableRng as _;
use rand_distr::StandardNormal;
use tensor_bandits::bandit::{lowoful_init, lowoful_select, lowoful_update, closed_form_params, LowOfulConfig};
use tensor_bandits::error::Result;
use tensor_bandits::linalg::dot;
use tensor_bandits::Rng;

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = dot(&v, &v).sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn main() -> Result<()> {
    let mut rng = Rng::seed_from_u64(5);
    let (dim, q, t_horizon, sigma) = (16usize, 4usize, 2000usize, 0.1f64);

    // Hidden parameter: unit norm, all but 5% of its mass in the head block.
    let mut hidden: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let head_norm = dot(&hidden[..q], &hidden[..q]).sqrt();
    let tail_norm = dot(&hidden[q..], &hidden[q..]).sqrt();
    for v in hidden[..q].iter_mut() {
        *v *= (1.0f64 - 0.05 * 0.05).sqrt() / head_norm;
    }
    for v in hidden[q..].iter_mut() {
        *v *= 0.05 / tail_norm;
    }
    let tail_mass = dot(&hidden[q..], &hidden[q..]).sqrt();
    println!("hidden parameter: dim {dim}, head size {q}, tail mass {tail_mass:.3}");

    // Closed-form weights: lambda from the norm bound, lambda_perp grown
    // with the horizon, and the tail allowance from the subspace error.
    let (lambda, lambda_perp, c_perp) =
        closed_form_params(1.0, 0.5, 0.1, 2, 3, t_horizon, q)?;
    println!(
        "weights: lambda = {lambda:.3}, lambda_perp = {lambda_perp:.1}, tail allowance = {c_perp:.4}"
    );

    let weighted = LowOfulConfig { dim, q, lambda, lambda_perp, c: 1.0, c_perp, delta: 0.05 };
    // The uniform-ridge baseline treats every coordinate the same: same
    // policy, no head/tail split (q = dim makes the tail empty).
    let uniform = LowOfulConfig {
        dim,
        q: dim,
        lambda,
        lambda_perp: lambda,
        c: 1.0,
        c_perp: 0.0,
        delta: 0.05,
    };
    let mut state_w = lowoful_init(weighted)?;
    let mut state_u = lowoful_init(uniform)?;

    // A fixed finite action set of unit vectors.
    let arms: Vec<Vec<f64>> = (0..12)
        .map(|_| unit((0..dim).map(|_| rng.sample(StandardNormal)).collect()))
        .collect();
    let best: f64 = arms
        .iter()
        .map(|a| dot(a, &hidden))
        .fold(f64::NEG_INFINITY, f64::max);

    let (mut cum_w, mut cum_u) = (0.0f64, 0.0f64);
    println!();
    println!("{:>6} {:>16} {:>16}", "step", "weighted regret", "uniform regret");
    for t in 1..=t_horizon {
        let noise: f64 = rng.sample(StandardNormal);
        let i = lowoful_select(&state_w, &arms)?;
        cum_w += best - dot(&arms[i], &hidden);
        lowoful_update(&mut state_w, &arms[i], dot(&arms[i], &hidden) + sigma * noise)?;

        let j = lowoful_select(&state_u, &arms)?;
        cum_u += best - dot(&arms[j], &hidden);
        lowoful_update(&mut state_u, &arms[j], dot(&arms[j], &hidden) + sigma * noise)?;

        if t % 500 == 0 || t == 250 {
            println!("{t:>6} {cum_w:>16.2} {cum_u:>16.2}");
        }
    }

    // The confidence set still contains the truth at the end of the run.
    println!();
    println!(
        "weighted policy: distance to truth {:.3} vs confidence radius {:.3} (covered: {})",
        state_w.mahalanobis(&hidden),
        state_w.sqrt_beta(),
        state_w.mahalanobis(&hidden) <= state_w.sqrt_beta()
    );
    Ok(())
}
