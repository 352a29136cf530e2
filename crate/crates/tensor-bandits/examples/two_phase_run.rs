//! Anatomy of a single two-phase bandit run: the closed-form exploration
//! length, the exploration phase's flat regret, the hand-off into the
//! weighted-ridge optimism phase, and the per-step regret collapse after
//! the hand-off.
//!
//! Run with: cargo run --example two_phase_run

use rand::SeedableRng as _;
use tensor_bandits::bandit::{
    closed_form_t1, run_tofu, EtaSource, OmegaSource, Phase, Regressor, TofuConfig,
};
use tensor_bandits::env::{gen_system_tensor, ActionMode, BanditEnv};
use tensor_bandits::error::Result;
use tensor_bandits::Rng;

fn main() -> Result<()> {
    let (d, n_modes, r) = (4usize, 3usize, 1usize);

    // The closed-form exploration length balances exploration cost against
    // the residual subspace error; past the crossover it grows like T^{2/5}.
    println!("{:>8} {:>14}", "horizon", "closed-form t1");
    for t in [2_000usize, 8_000, 32_000, 128_000] {
        println!("{t:>8} {:>14}", closed_form_t1(0.0, 0.02, d, r, n_modes, 1.0, t));
    }

    // One full run at T = 8000 with the same knobs the experiment harness
    // uses for this shape.
    let t_horizon = 8_000usize;
    let cfg = TofuConfig {
        t_horizon,
        t1: 300,
        rho: 1,
        r,
        delta: 0.1,
        c_bound: 1.0,
        regressor: Regressor::RidgeHosvd { ridge: 1e-4 },
        omega_source: OmegaSource::Given(1.0),
        eta_source: EtaSource::FunctionalForm { c: 0.02 },
        oracle_factors: false,
    };
    let mut env_rng = Rng::seed_from_u64(99);
    let truth = gen_system_tensor(d, n_modes, r, 1.0, 1.0, &mut env_rng)?;
    let mut env = BanditEnv::new(
        truth,
        1.0,
        0.1,
        ActionMode::FiniteResample { m: 32 },
        Rng::seed_from_u64(100),
    )?;
    let trace = run_tofu(&mut env, &cfg, &mut Rng::seed_from_u64(101))?;

    let t1 = trace.steps.iter().filter(|s| s.phase == Phase::A).count();
    let regret_a: f64 = trace.steps[..t1].iter().map(|s| s.instant_regret).sum();
    let regret_b: f64 = trace.steps[t1..].iter().map(|s| s.instant_regret).sum();
    println!();
    println!("run: horizon {t_horizon}, exploration steps {t1}");
    println!(
        "exploration regret {regret_a:.1} ({:.4}/step), optimism regret {regret_b:.1} ({:.4}/step)",
        regret_a / t1 as f64,
        regret_b / (t_horizon - t1) as f64
    );

    // Per-step regret within the optimism phase, early vs late.
    let tenth = (t_horizon - t1) / 10;
    let early: f64 = trace.steps[t1..t1 + tenth].iter().map(|s| s.instant_regret).sum::<f64>()
        / tenth as f64;
    let late: f64 = trace.steps[t_horizon - tenth..].iter().map(|s| s.instant_regret).sum::<f64>()
        / tenth as f64;
    println!("optimism phase per-step regret: first tenth {early:.4}, last tenth {late:.4}");
    println!();
    println!("cumulative regret at the end: {:.1}", trace.final_cum_regret());
    Ok(())
}
