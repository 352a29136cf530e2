//! Exploration-phase tensor regression: estimate a low-rank system tensor
//! from noisy linear measurements, then watch the subspace error shrink as
//! the measurement budget grows, in both bundled measurement regimes.
//!
//! Run with: cargo run --example tensor_regression

use rand::SeedableRng as _;
use tensor_bandits::env::gen_system_tensor;
use tensor_bandits::error::Result;
use tensor_bandits::regression::{collect_dataset, fit_ridge_hosvd, ArmRegime};
use tensor_bandits::Rng;

fn main() -> Result<()> {
    let (d, n_modes, r) = (4usize, 3usize, 1usize);
    let noise_std = 0.1;

    let mut rng = Rng::seed_from_u64(3);
    let truth = gen_system_tensor(d, n_modes, r, 1.0, 1.0, &mut rng)?;
    println!(
        "hidden system tensor: shape {:?}, rank-{r} per mode, norm {:.4}, noise std {noise_std}",
        truth.shape(),
        truth.frob_norm()
    );
    println!();
    println!("{:>10} {:>12} {:>12}   (median of 5 redraws)", "budget", "gaussian", "one-hot");

    for t1 in [250usize, 500, 1000, 2000, 4000] {
        let mut row = format!("{t1:>10}");
        for regime in [ArmRegime::Gaussian, ArmRegime::OneHot] {
            let mut etas = Vec::new();
            for redraw in 0..5u64 {
                let mut data_rng = Rng::seed_from_u64(1000 + t1 as u64 + redraw);
                let data = collect_dataset(&truth, t1, regime, noise_std, &mut data_rng)?;
                // Ridge regression on the vectorized model followed by a
                // rank-r truncation; passing the truth makes the report
                // measure the reconstruction error eta of the estimate.
                let report = fit_ridge_hosvd(&data, d, n_modes, r, 1e-4, Some(&truth))?;
                etas.push(report.eta_observed.expect("truth was supplied"));
            }
            etas.sort_by(f64::total_cmp);
            row.push_str(&format!(" {:>12.5}", etas[2]));
        }
        println!("{row}");
    }

    println!();
    println!("the error decays roughly like 1/sqrt(budget) in both regimes;");
    println!("the bandit uses exactly this fit to build its projection basis.");
    Ok(())
}
