//! A complete regret experiment in miniature: parse a plain-text config,
//! run all four policies over paired seeds (same hidden tensor, same arm
//! stream, same noise per seed), then write the per-step traces as CSV and
//! render the quartile-band chart as SVG.
//!
//! Run with: cargo run --example regret_experiment

use tensor_bandits::error::Result;
use tensor_bandits::harness::{
    median_final_by_algo, parse_config_text, plot_svg, run_experiment, write_csv,
};

fn main() -> Result<()> {
    // The same format `tensor-bandits run <file>` accepts. Short horizon and
    // few seeds keep this demo under a minute; the acceptance-scale setup
    // uses T=8000 and twenty seeds.
    let cfg = parse_config_text(
        "# miniature regret study\n\
         d = 3\n\
         N = 3\n\
         r = 1\n\
         T = 600\n\
         algos = tofu, tofu_oracle, oful_vec, random\n\
         tofu.t1 = 80\n\
         tofu.rho = 1\n\
         tofu.eta_c = 0.05\n\
         env.noise_std = 0.1\n\
         env.m = 16\n\
         seeds = 0..4\n",
    )?;
    println!(
        "running {} policies x {} seeds at d={}, T={} ...",
        cfg.algos.len(),
        cfg.seeds.len(),
        cfg.d,
        cfg.t_horizon
    );

    let outcome = run_experiment(&cfg)?;
    for f in &outcome.failures {
        eprintln!("run failed: algo={} seed={}: {}", f.algo, f.seed, f.message);
    }

    println!();
    println!("{:>12} {:>18}", "policy", "median final regret");
    for (algo, med) in median_final_by_algo(&outcome.traces) {
        println!("{algo:>12} {med:>18.2}");
    }

    let dir = std::env::temp_dir();
    let csv_path = dir.join("regret_demo.csv");
    let svg_path = dir.join("regret_demo.svg");
    write_csv(&outcome.traces, &csv_path)?;
    plot_svg(&csv_path, &svg_path)?;
    println!();
    println!("traces: {}", csv_path.display());
    println!("chart:  {}", svg_path.display());
    Ok(())
}
