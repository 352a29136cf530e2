//! Thin command-line front end over the library: regret experiments,
//! plotting, the selftest suite, and TNSR instance import/export.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tensor_bandits::env::{gen_lower_bound_instance, gen_system_tensor, lower_bound_delta};
use tensor_bandits::error::Result;
use tensor_bandits::harness;
use tensor_bandits::tensor::DenseTensor;
use tensor_bandits::tucker::{min_positive_singular_values, multilinear_rank, RANK_TOL};

#[derive(Parser)]
#[command(
    name = "tensor-bandits",
    about = "Simulator for low-rank tensor bandits: a two-phase subspace-projected \
             UCB policy, baselines, and the analytic selftest suite."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the regret experiment described by a key=value config file
    Run {
        /// Config path; see `ExperimentConfig` docs for the key list
        config: PathBuf,
    },
    /// Render a trace CSV as a static SVG chart (median + IQR band)
    Plot { csv: PathBuf, svg: PathBuf },
    /// Run every built-in invariant suite; exit 0 only if all pass
    Selftest,
    /// Write a worst-case ±Δ corner instance as TNSR text
    Lowerbound {
        #[arg(long)]
        d: usize,
        #[arg(long = "N")]
        n_modes: usize,
        #[arg(long)]
        r: usize,
        #[arg(long = "T")]
        t_horizon: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate a random low-rank system tensor and write it as TNSR text
    ExportInstance {
        #[arg(long)]
        d: usize,
        #[arg(long = "N")]
        n_modes: usize,
        #[arg(long)]
        r: usize,
        /// Frobenius norm of the instance
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Spectral floor; defaults to c/(2·sqrt(r)), which is always feasible
        #[arg(long)]
        omega_min: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Read a TNSR file and print its shape, norm, and mode spectra
    ImportInstance { path: PathBuf },
}

fn seeded(seed: u64) -> tensor_bandits::Rng {
    use rand::SeedableRng as _;
    tensor_bandits::Rng::seed_from_u64(seed)
}

fn summarize_tensor(x: &DenseTensor) {
    let shape: Vec<String> = x.shape().iter().map(|v| v.to_string()).collect();
    println!("shape: {}", shape.join("x"));
    println!("frobenius norm: {:.12}", x.frob_norm());
    let ranks = multilinear_rank(x, RANK_TOL);
    let ranks: Vec<String> = ranks.iter().map(|v| v.to_string()).collect();
    println!("multilinear rank: ({})", ranks.join(","));
    if let Ok(omegas) = min_positive_singular_values(x) {
        let os: Vec<String> = omegas.iter().map(|v| format!("{v:.6}")).collect();
        println!("min positive mode singular values: [{}]", os.join(", "));
    }
}

fn cmd_run(config: &Path) -> Result<ExitCode> {
    let cfg = harness::parse_config(config)?;
    let outcome = harness::run_experiment(&cfg)?;
    let out = cfg.out.clone().unwrap_or_else(|| "traces.csv".into());
    harness::write_csv(&outcome.traces, Path::new(&out))?;
    println!("wrote {} traces to {}", outcome.traces.len(), out);
    println!("median final cumulative regret:");
    for (algo, med) in harness::median_final_by_algo(&outcome.traces) {
        println!("  {algo:<12} {med:.3}");
    }
    if outcome.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &outcome.failures {
            eprintln!("run failed: algo={} seed={}: {}", f.algo, f.seed, f.message);
        }
        eprintln!("{} run(s) failed", outcome.failures.len());
        Ok(ExitCode::FAILURE)
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Run { config } => cmd_run(&config),
        Cmd::Plot { csv, svg } => {
            harness::plot_svg(&csv, &svg)?;
            println!("wrote {}", svg.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Selftest => {
            let report = harness::selftest();
            print!("{}", report.render());
            Ok(if report.ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Cmd::Lowerbound {
            d,
            n_modes,
            r,
            t_horizon,
            out,
            seed,
        } => {
            let x = gen_lower_bound_instance(d, n_modes, r, t_horizon, &mut seeded(seed))?;
            std::fs::write(&out, x.to_text())?;
            println!(
                "gap scale delta = {:.9}",
                lower_bound_delta(r, n_modes, t_horizon)
            );
            summarize_tensor(&x);
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::ExportInstance {
            d,
            n_modes,
            r,
            c,
            omega_min,
            seed,
            out,
        } => {
            let omega = omega_min.unwrap_or(0.5 * c / (r as f64).sqrt());
            let x = gen_system_tensor(d, n_modes, r, c, omega, &mut seeded(seed))?;
            std::fs::write(&out, x.to_text())?;
            summarize_tensor(&x);
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::ImportInstance { path } => {
            let text = std::fs::read_to_string(&path)?;
            let x = DenseTensor::from_text(&text)?;
            summarize_tensor(&x);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
