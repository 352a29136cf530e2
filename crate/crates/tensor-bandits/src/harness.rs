//! Experiment orchestration: plain-text configs, parallel seeded regret
//! runs, CSV traces, a static SVG regret chart, and the selftest suite
//! that exercises the library's analytic invariants end to end.

use crate::bandit::{
    closed_form_t1, run_oful_vectorized, run_random, run_tofu, closed_form_params, EtaSource,
    OfulVecConfig, OmegaSource, Regressor, TofuConfig,
};
pub use crate::bandit::{Phase, RegretTrace, StepRecord};
use crate::env::{gen_lower_bound_instance, gen_system_tensor, lower_bound_delta, ActionMode, BanditEnv};
use crate::error::{Error, Result};
use crate::linalg::{dot, random_orthonormal};
use crate::projection::{binomial, block_norm, build_projection, project_action, project_system, q_of, tail_count};
use crate::tensor::DenseTensor;
use crate::tucker::{complement_basis, hosvd, min_positive_singular_values, multilinear_rank, RANK_TOL};
use rand::Rng as _;
use rand::SeedableRng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;

/// The four bundled policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AlgorithmId {
    Tofu,
    TofuOracle,
    OfulVec,
    Random,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 4] = [
        AlgorithmId::Tofu,
        AlgorithmId::TofuOracle,
        AlgorithmId::OfulVec,
        AlgorithmId::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmId::Tofu => "tofu",
            AlgorithmId::TofuOracle => "tofu_oracle",
            AlgorithmId::OfulVec => "oful_vec",
            AlgorithmId::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tofu" => Ok(AlgorithmId::Tofu),
            "tofu_oracle" => Ok(AlgorithmId::TofuOracle),
            "oful_vec" => Ok(AlgorithmId::OfulVec),
            "random" => Ok(AlgorithmId::Random),
            other => Err(Error::Parse(format!(
                "unknown algorithm `{other}` (expected tofu, tofu_oracle, oful_vec or random)"
            ))),
        }
    }
}

/// How the exploration length is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum T1Setting {
    /// Evaluate the closed-form length from the planning constants.
    Auto { iota: f64, c: f64 },
    Fixed(usize),
}

/// Everything one experiment needs: instance shape, horizon, policies,
/// exploration plan, environment knobs, seeds, and the output path.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub d: usize,
    pub n_modes: usize,
    pub r: usize,
    pub t_horizon: usize,
    pub algos: Vec<AlgorithmId>,
    pub t1: T1Setting,
    pub rho: usize,
    pub delta: f64,
    /// Constant inside the functional form of the Phase-A error level.
    pub eta_c: f64,
    pub regressor: Regressor,
    pub c_bound: f64,
    pub omega_min: f64,
    pub noise_std: f64,
    pub action_mode: ActionMode,
    pub seeds: Vec<u64>,
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    /// The reference comparison: d=4, N=3, r=1, T=8000, σ=0.1, C=1,
    /// 32 resampled arms, 20 seeds, all four policies.
    fn default() -> Self {
        ExperimentConfig {
            d: 4,
            n_modes: 3,
            r: 1,
            t_horizon: 8000,
            algos: AlgorithmId::ALL.to_vec(),
            t1: T1Setting::Auto { iota: 0.0, c: 1.0 },
            rho: 3,
            delta: 0.1,
            eta_c: 1.0,
            regressor: Regressor::RidgeHosvd { ridge: 1e-4 },
            c_bound: 1.0,
            omega_min: 1.0,
            noise_std: 0.1,
            action_mode: ActionMode::FiniteResample { m: 32 },
            seeds: (0..20).collect(),
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.r > self.d {
            return Err(Error::Invalid(format!(
                "rank r={} must lie in 1..=d (d={})",
                self.r, self.d
            )));
        }
        if self.n_modes < 3 {
            return Err(Error::Invalid(format!(
                "order N={} must be at least 3",
                self.n_modes
            )));
        }
        if self.t_horizon == 0 {
            return Err(Error::Invalid("horizon T must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Invalid("seed list must be nonempty".into()));
        }
        if self.rho == 0 || self.rho > self.n_modes {
            return Err(Error::Invalid(format!(
                "rho={} must lie in 1..=N (N={})",
                self.rho, self.n_modes
            )));
        }
        if self.algos.is_empty() {
            return Err(Error::Invalid("algorithm list must be nonempty".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Invalid(format!(
                "delta={} must lie strictly between 0 and 1",
                self.delta
            )));
        }
        if self.c_bound <= 0.0 || self.omega_min <= 0.0 || self.eta_c <= 0.0 {
            return Err(Error::Invalid(
                "env.c, env.omega_min and tofu.eta_c must be positive".into(),
            ));
        }
        let floor_energy = self.r as f64 * self.omega_min * self.omega_min;
        if floor_energy > self.c_bound * self.c_bound * (1.0 + 1e-12) {
            return Err(Error::Invalid(format!(
                "infeasible spectrum: r*omega_min^2 = {floor_energy} exceeds C^2 = {}",
                self.c_bound * self.c_bound
            )));
        }
        if self.noise_std < 0.0 {
            return Err(Error::Invalid("env.noise_std must be nonnegative".into()));
        }
        match self.action_mode {
            ActionMode::FiniteResample { m } | ActionMode::FiniteFixed { m } if m == 0 => {
                return Err(Error::Invalid("env.m must be at least 1".into()));
            }
            ActionMode::OpenBall => {
                return Err(Error::Invalid(
                    "the bundled policies need a finite action mode (resample or fixed)".into(),
                ));
            }
            _ => {}
        }
        if let T1Setting::Auto { iota, c } = self.t1 {
            if iota < 0.0 || c <= 0.0 {
                return Err(Error::Invalid(
                    "tofu.iota must be nonnegative and tofu.c positive".into(),
                ));
            }
        }
        if let T1Setting::Fixed(v) = self.t1 {
            let runs_tofu = self.algos.contains(&AlgorithmId::Tofu);
            if runs_tofu && v >= self.t_horizon {
                return Err(Error::Invalid(format!(
                    "tofu.t1={v} must be below the horizon T={}",
                    self.t_horizon
                )));
            }
            if runs_tofu && v == 0 {
                return Err(Error::Invalid(
                    "tofu.t1=0 is only meaningful for tofu_oracle".into(),
                ));
            }
        }
        Ok(())
    }

    /// Serialize as the same key=value text `parse_config_text` reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "d={}", self.d);
        let _ = writeln!(s, "N={}", self.n_modes);
        let _ = writeln!(s, "r={}", self.r);
        let _ = writeln!(s, "T={}", self.t_horizon);
        let algos: Vec<&str> = self.algos.iter().map(|a| a.as_str()).collect();
        let _ = writeln!(s, "algos={}", algos.join(","));
        let _ = writeln!(s, "seeds={}", seeds_to_text(&self.seeds));
        match self.t1 {
            T1Setting::Auto { iota, c } => {
                let _ = writeln!(s, "tofu.t1=auto");
                let _ = writeln!(s, "tofu.iota={iota}");
                let _ = writeln!(s, "tofu.c={c}");
            }
            T1Setting::Fixed(v) => {
                let _ = writeln!(s, "tofu.t1={v}");
            }
        }
        let _ = writeln!(s, "tofu.rho={}", self.rho);
        let _ = writeln!(s, "tofu.delta={}", self.delta);
        let _ = writeln!(s, "tofu.eta_c={}", self.eta_c);
        match self.regressor {
            Regressor::RidgeHosvd { ridge } => {
                let _ = writeln!(s, "tofu.regressor=ridge");
                let _ = writeln!(s, "tofu.ridge={ridge}");
            }
            Regressor::Als(_) => {
                let _ = writeln!(s, "tofu.regressor=als");
            }
        }
        let _ = writeln!(s, "env.c={}", self.c_bound);
        let _ = writeln!(s, "env.omega_min={}", self.omega_min);
        let _ = writeln!(s, "env.noise_std={}", self.noise_std);
        match self.action_mode {
            ActionMode::FiniteResample { m } => {
                let _ = writeln!(s, "env.action_mode=resample");
                let _ = writeln!(s, "env.m={m}");
            }
            ActionMode::FiniteFixed { m } => {
                let _ = writeln!(s, "env.action_mode=fixed");
                let _ = writeln!(s, "env.m={m}");
            }
            ActionMode::OpenBall => {
                let _ = writeln!(s, "env.action_mode=ball");
            }
        }
        if let Some(out) = &self.out {
            let _ = writeln!(s, "out={out}");
        }
        s
    }
}

fn seeds_to_text(seeds: &[u64]) -> String {
    if seeds.len() >= 2 && seeds.windows(2).all(|w| w[1] == w[0] + 1) {
        return format!("{}..{}", seeds[0], seeds[seeds.len() - 1] + 1);
    }
    let parts: Vec<String> = seeds.iter().map(|v| v.to_string()).collect();
    parts.join(",")
}

fn parse_seeds(value: &str, line: usize) -> Result<Vec<u64>> {
    if let Some((a, b)) = value.split_once("..") {
        let lo: u64 = parse_num(a, line, "seeds")?;
        let hi: u64 = parse_num(b, line, "seeds")?;
        if lo >= hi {
            return Err(Error::Parse(format!(
                "line {line}: empty seed range {lo}..{hi}"
            )));
        }
        return Ok((lo..hi).collect());
    }
    value
        .split(',')
        .map(|part| parse_num(part.trim(), line, "seeds"))
        .collect()
}

fn parse_num<T: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<T> {
    value.trim().parse::<T>().map_err(|_| {
        Error::Parse(format!("line {line}: cannot parse `{value}` for key `{key}`"))
    })
}

/// Parse the flat key=value format. Lines starting with `#` and blank
/// lines are skipped; later occurrences of a key override earlier ones.
pub fn parse_config_text(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    // pieces that only assemble into config fields once all lines are read
    let mut t1_fixed: Option<usize> = None;
    let mut iota = 0.0f64;
    let mut c_auto = 1.0f64;
    let mut ridge = 1e-4f64;
    let mut use_als = false;
    let mut m = 32usize;
    let mut mode_kind = "resample".to_string();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!("line {line_no}: expected key=value, got `{line}`"))
        })?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "d" => cfg.d = parse_num(value, line_no, key)?,
            "N" => cfg.n_modes = parse_num(value, line_no, key)?,
            "r" => cfg.r = parse_num(value, line_no, key)?,
            "T" => cfg.t_horizon = parse_num(value, line_no, key)?,
            "algos" => {
                cfg.algos = value
                    .split(',')
                    .map(|part| {
                        AlgorithmId::parse(part.trim())
                            .map_err(|e| Error::Parse(format!("line {line_no}: {e}")))
                    })
                    .collect::<Result<_>>()?;
            }
            "seeds" => cfg.seeds = parse_seeds(value, line_no)?,
            "tofu.t1" => {
                t1_fixed = if value == "auto" {
                    None
                } else {
                    Some(parse_num(value, line_no, key)?)
                };
            }
            "tofu.iota" => iota = parse_num(value, line_no, key)?,
            "tofu.c" => c_auto = parse_num(value, line_no, key)?,
            "tofu.rho" => cfg.rho = parse_num(value, line_no, key)?,
            "tofu.delta" => cfg.delta = parse_num(value, line_no, key)?,
            "tofu.eta_c" => cfg.eta_c = parse_num(value, line_no, key)?,
            "tofu.regressor" => {
                use_als = match value {
                    "ridge" => false,
                    "als" => true,
                    other => {
                        return Err(Error::Parse(format!(
                            "line {line_no}: unknown regressor `{other}` (expected ridge or als)"
                        )))
                    }
                };
            }
            "tofu.ridge" => ridge = parse_num(value, line_no, key)?,
            "env.c" => cfg.c_bound = parse_num(value, line_no, key)?,
            "env.omega_min" => cfg.omega_min = parse_num(value, line_no, key)?,
            "env.noise_std" => cfg.noise_std = parse_num(value, line_no, key)?,
            "env.m" => m = parse_num(value, line_no, key)?,
            "env.action_mode" => match value {
                "resample" | "fixed" | "ball" => mode_kind = value.to_string(),
                other => {
                    return Err(Error::Parse(format!(
                        "line {line_no}: unknown action mode `{other}` \
                         (expected resample, fixed or ball)"
                    )))
                }
            },
            "out" => cfg.out = Some(value.to_string()),
            other => {
                return Err(Error::Parse(format!("line {line_no}: unknown key `{other}`")));
            }
        }
    }

    cfg.t1 = match t1_fixed {
        Some(v) => T1Setting::Fixed(v),
        None => T1Setting::Auto { iota, c: c_auto },
    };
    cfg.regressor = if use_als {
        Regressor::Als(Default::default())
    } else {
        Regressor::RidgeHosvd { ridge }
    };
    cfg.action_mode = match mode_kind.as_str() {
        "resample" => ActionMode::FiniteResample { m },
        "fixed" => ActionMode::FiniteFixed { m },
        _ => ActionMode::OpenBall,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

/// One run that errored; the rest of the experiment proceeds regardless.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub algo: &'static str,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    /// Ordered by (algorithm position in the config, seed position).
    pub traces: Vec<RegretTrace>,
    pub failures: Vec<RunFailure>,
}

/// SplitMix-style mix so each (seed, purpose) pair gets an independent
/// deterministic stream.
fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn stream_rng(seed: u64, stream: u64) -> crate::Rng {
    crate::Rng::seed_from_u64(mix(seed, stream))
}

const STREAM_INSTANCE: u64 = 1;
const STREAM_ENV: u64 = 2;
const STREAM_ALGO_BASE: u64 = 16;

fn resolve_t1(cfg: &ExperimentConfig) -> usize {
    match cfg.t1 {
        T1Setting::Fixed(v) => v,
        T1Setting::Auto { iota, c } => closed_form_t1(
            iota,
            c,
            cfg.d,
            cfg.r,
            cfg.n_modes,
            cfg.omega_min,
            cfg.t_horizon,
        ),
    }
}

fn run_one(cfg: &ExperimentConfig, algo: AlgorithmId, seed: u64) -> Result<RegretTrace> {
    // The instance and reward streams depend only on the seed, so every
    // algorithm faces the same tensor, the same offers, and the same noise.
    let mut inst_rng = stream_rng(seed, STREAM_INSTANCE);
    let truth = gen_system_tensor(
        cfg.d,
        cfg.n_modes,
        cfg.r,
        cfg.c_bound,
        cfg.omega_min,
        &mut inst_rng,
    )?;
    let mut env = BanditEnv::new(
        truth,
        cfg.c_bound,
        cfg.noise_std,
        cfg.action_mode,
        stream_rng(seed, STREAM_ENV),
    )?;
    let mut algo_rng = stream_rng(seed, STREAM_ALGO_BASE + algo as u64);
    let tofu_cfg = |oracle: bool| TofuConfig {
        t_horizon: cfg.t_horizon,
        t1: if oracle { 0 } else { resolve_t1(cfg) },
        rho: cfg.rho,
        r: cfg.r,
        delta: cfg.delta,
        c_bound: cfg.c_bound,
        regressor: cfg.regressor,
        omega_source: OmegaSource::TrueFromEnv,
        eta_source: EtaSource::FunctionalForm { c: cfg.eta_c },
        oracle_factors: oracle,
    };
    let mut trace = match algo {
        AlgorithmId::Tofu => run_tofu(&mut env, &tofu_cfg(false), &mut algo_rng)?,
        AlgorithmId::TofuOracle => run_tofu(&mut env, &tofu_cfg(true), &mut algo_rng)?,
        AlgorithmId::OfulVec => run_oful_vectorized(
            &mut env,
            &OfulVecConfig {
                t_horizon: cfg.t_horizon,
                lambda: 1.0 / (cfg.c_bound * cfg.c_bound),
                delta: cfg.delta,
                c_bound: cfg.c_bound,
            },
        )?,
        AlgorithmId::Random => run_random(&mut env, cfg.t_horizon, &mut algo_rng)?,
    };
    trace.seed = seed;
    Ok(trace)
}

fn worker_count() -> usize {
    // 0 lets the pool pick its default width
    std::env::var("TBL_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .unwrap_or(0)
}

/// Run every (algorithm, seed) pair of the config on a worker pool.
/// Individual run errors are collected, not fatal.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let jobs: Vec<(AlgorithmId, u64)> = cfg
        .algos
        .iter()
        .flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::Invalid(format!("cannot build worker pool: {e}")))?;
    let results: Vec<std::result::Result<RegretTrace, String>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(algo, seed)| run_one(cfg, algo, seed).map_err(|e| e.to_string()))
            .collect()
    });
    let mut traces = Vec::new();
    let mut failures = Vec::new();
    for ((algo, seed), res) in jobs.into_iter().zip(results) {
        match res {
            Ok(trace) => traces.push(trace),
            Err(message) => failures.push(RunFailure {
                algo: algo.as_str(),
                seed,
                message,
            }),
        }
    }
    Ok(ExperimentOutcome { traces, failures })
}

/// Median of each algorithm's final cumulative regret, in first-seen order.
pub fn median_final_by_algo(traces: &[RegretTrace]) -> Vec<(String, f64)> {
    let mut order: Vec<String> = Vec::new();
    for tr in traces {
        if !order.contains(&tr.algo) {
            order.push(tr.algo.clone());
        }
    }
    order
        .into_iter()
        .map(|algo| {
            let mut finals: Vec<f64> = traces
                .iter()
                .filter(|tr| tr.algo == algo)
                .map(|tr| tr.final_cum_regret())
                .collect();
            finals.sort_by(f64::total_cmp);
            let med = quantile_sorted(&finals, 0.5);
            (algo, med)
        })
        .collect()
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&p));
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

pub const CSV_HEADER: &str = "algo,seed,t,phase,instant_regret,cum_regret";

fn phase_char(p: Phase) -> char {
    match p {
        Phase::A => 'A',
        Phase::B => 'B',
    }
}

pub fn csv_text(traces: &[RegretTrace]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for tr in traces {
        for s in &tr.steps {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                tr.algo,
                tr.seed,
                s.t,
                phase_char(s.phase),
                s.instant_regret,
                s.cum_regret
            );
        }
    }
    out
}

pub fn write_csv(traces: &[RegretTrace], path: &Path) -> Result<()> {
    std::fs::write(path, csv_text(traces))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub algo: String,
    pub seed: u64,
    pub t: usize,
    pub phase: char,
    pub instant_regret: f64,
    pub cum_regret: f64,
}

pub fn parse_csv_text(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "bad CSV header {:?}; expected {CSV_HEADER:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 2;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(Error::Parse(format!(
                "line {line_no}: expected 6 fields, got {}",
                parts.len()
            )));
        }
        let phase = match parts[3] {
            "A" => 'A',
            "B" => 'B',
            other => {
                return Err(Error::Parse(format!(
                    "line {line_no}: bad phase `{other}`"
                )))
            }
        };
        rows.push(CsvRow {
            algo: parts[0].to_string(),
            seed: parse_num(parts[1], line_no, "seed")?,
            t: parse_num(parts[2], line_no, "t")?,
            phase,
            instant_regret: parse_num(parts[4], line_no, "instant_regret")?,
            cum_regret: parse_num(parts[5], line_no, "cum_regret")?,
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_csv_text(&text)
}

const SVG_W: f64 = 860.0;
const SVG_H: f64 = 520.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 168.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#7f7f7f", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
/// Maximum number of x samples per curve.
const PLOT_POINTS: usize = 512;

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if (v - v.round()).abs() < 1e-9 * v.abs().max(1.0) {
        return format!("{}", v.round() as i64);
    }
    if v.abs() >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

fn nice_ceil(v: f64) -> f64 {
    if v <= 0.0 {
        return 1.0;
    }
    let exp = v.log10().floor();
    let base = 10f64.powf(exp);
    for m in [1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0] {
        if m * base >= v * (1.0 - 1e-12) {
            return m * base;
        }
    }
    10.0 * base
}

struct BandSeries {
    algo: String,
    xs: Vec<usize>,
    q25: Vec<f64>,
    q50: Vec<f64>,
    q75: Vec<f64>,
}

fn assemble_bands(rows: &[CsvRow]) -> Vec<BandSeries> {
    use std::collections::BTreeMap;
    let mut by_algo: BTreeMap<&str, BTreeMap<u64, Vec<(usize, f64)>>> = BTreeMap::new();
    for row in rows {
        by_algo
            .entry(&row.algo)
            .or_default()
            .entry(row.seed)
            .or_default()
            .push((row.t, row.cum_regret));
    }
    let t_max = rows.iter().map(|r| r.t).max().unwrap_or(1).max(1);
    let n_pts = PLOT_POINTS.min(t_max);
    let mut xs: Vec<usize> = (1..=n_pts)
        .map(|i| ((i as f64 / n_pts as f64) * t_max as f64).round() as usize)
        .collect();
    xs.dedup();
    let mut bands = Vec::new();
    for (algo, seeds) in by_algo {
        let series: Vec<&Vec<(usize, f64)>> = seeds.values().collect();
        let mut q25 = Vec::with_capacity(xs.len());
        let mut q50 = Vec::with_capacity(xs.len());
        let mut q75 = Vec::with_capacity(xs.len());
        for &x in &xs {
            let mut vals: Vec<f64> = series
                .iter()
                .map(|s| {
                    let idx = s.partition_point(|&(t, _)| t <= x);
                    if idx == 0 {
                        0.0
                    } else {
                        s[idx - 1].1
                    }
                })
                .collect();
            vals.sort_by(f64::total_cmp);
            q25.push(quantile_sorted(&vals, 0.25));
            q50.push(quantile_sorted(&vals, 0.5));
            q75.push(quantile_sorted(&vals, 0.75));
        }
        bands.push(BandSeries {
            algo: algo.to_string(),
            xs: xs.clone(),
            q25,
            q50,
            q75,
        });
    }
    bands
}

/// Render the chart: per algorithm, the median cumulative regret with the
/// interquartile band. Pure function of the rows, so identical input gives
/// identical bytes.
pub fn render_svg(rows: &[CsvRow]) -> String {
    let bands = assemble_bands(rows);
    let t_max = rows.iter().map(|r| r.t).max().unwrap_or(1).max(1) as f64;
    let y_top = nice_ceil(
        bands
            .iter()
            .flat_map(|b| b.q75.iter().copied())
            .fold(0.0f64, f64::max),
    );
    let px = |t: f64| MARGIN_L + (t / t_max) * (SVG_W - MARGIN_L - MARGIN_R);
    let py = |v: f64| SVG_H - MARGIN_B - (v / y_top) * (SVG_H - MARGIN_T - MARGIN_B);

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" \
         viewBox=\"0 0 {SVG_W} {SVG_H}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(
        s,
        "<rect x=\"0\" y=\"0\" width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">\
         Cumulative regret (median, interquartile band)</text>",
        MARGIN_L + (SVG_W - MARGIN_L - MARGIN_R) / 2.0
    );

    // gridlines and ticks
    for i in 0..=5 {
        let v = y_top * i as f64 / 5.0;
        let y = py(v);
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>",
            MARGIN_L,
            SVG_W - MARGIN_R
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"12\">{}</text>",
            MARGIN_L - 8.0,
            y + 4.0,
            fmt_tick(v)
        );
    }
    for i in 0..=4 {
        let t = t_max * i as f64 / 4.0;
        let x = px(t);
        let _ = writeln!(
            s,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>",
            MARGIN_T,
            SVG_H - MARGIN_B
        );
        let _ = writeln!(
            s,
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"12\">{}</text>",
            SVG_H - MARGIN_B + 18.0,
            fmt_tick(t)
        );
    }

    // axes
    let _ = writeln!(
        s,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"1.5\"/>",
        MARGIN_L,
        SVG_H - MARGIN_B,
        SVG_W - MARGIN_R,
        SVG_H - MARGIN_B
    );
    let _ = writeln!(
        s,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"1.5\"/>",
        MARGIN_L,
        MARGIN_T,
        MARGIN_L,
        SVG_H - MARGIN_B
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"13\">step t</text>",
        MARGIN_L + (SVG_W - MARGIN_L - MARGIN_R) / 2.0,
        SVG_H - 14.0
    );
    let _ = writeln!(
        s,
        "<text transform=\"rotate(-90)\" x=\"{:.2}\" y=\"20\" text-anchor=\"middle\" \
         font-size=\"13\">cumulative regret</text>",
        -(MARGIN_T + (SVG_H - MARGIN_T - MARGIN_B) / 2.0)
    );

    for (i, band) in bands.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = String::new();
        for (j, &x) in band.xs.iter().enumerate() {
            let _ = write!(pts, "{:.2},{:.2} ", px(x as f64), py(band.q75[j]));
        }
        for (j, &x) in band.xs.iter().enumerate().rev() {
            let _ = write!(pts, "{:.2},{:.2} ", px(x as f64), py(band.q25[j]));
        }
        let _ = writeln!(
            s,
            "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\"/>",
            pts.trim_end()
        );
        let mut mid = String::new();
        for (j, &x) in band.xs.iter().enumerate() {
            let _ = write!(mid, "{:.2},{:.2} ", px(x as f64), py(band.q50[j]));
        }
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>",
            mid.trim_end()
        );
        let ly = MARGIN_T + 14.0 + 22.0 * i as f64;
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" \
             stroke=\"{color}\" stroke-width=\"3\"/>",
            SVG_W - MARGIN_R + 16.0,
            SVG_W - MARGIN_R + 40.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\">{}</text>",
            SVG_W - MARGIN_R + 46.0,
            ly + 4.0,
            band.algo
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn plot_svg(csv_path: &Path, out_path: &Path) -> Result<()> {
    let rows = read_csv(csv_path)?;
    std::fs::write(out_path, render_svg(&rows))?;
    Ok(())
}

/// One named invariant suite of the selftest.
#[derive(Debug)]
pub struct GroupReport {
    pub name: &'static str,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl GroupReport {
    fn new(name: &'static str) -> Self {
        GroupReport {
            name,
            checks: 0,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, label: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(label());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug)]
pub struct SelftestReport {
    pub groups: Vec<GroupReport>,
}

impl SelftestReport {
    pub fn ok(&self) -> bool {
        self.groups.iter().all(|g| g.passed())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for g in &self.groups {
            if g.passed() {
                let _ = writeln!(s, "PASS {} ({} checks)", g.name, g.checks);
            } else {
                let _ = writeln!(
                    s,
                    "FAIL {} ({} checks, {} failed)",
                    g.name,
                    g.checks,
                    g.failures.len()
                );
                for f in g.failures.iter().take(8) {
                    let _ = writeln!(s, "    {f}");
                }
                if g.failures.len() > 8 {
                    let _ = writeln!(s, "    ... and {} more", g.failures.len() - 8);
                }
            }
        }
        let _ = writeln!(
            s,
            "selftest: {}",
            if self.ok() { "PASS" } else { "FAIL" }
        );
        s
    }
}

fn run_group(name: &'static str, body: impl FnOnce(&mut GroupReport) -> Result<()>) -> GroupReport {
    let mut g = GroupReport::new(name);
    if let Err(e) = body(&mut g) {
        g.checks += 1;
        g.failures.push(format!("aborted: {e}"));
    }
    g
}

fn random_gaussian_tensor(shape: Vec<usize>, rng: &mut crate::Rng) -> DenseTensor {
    let len: usize = shape.iter().product();
    let data: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    DenseTensor::new(shape, data).expect("gaussian data is finite")
}

fn group_coordinate_census() -> GroupReport {
    run_group("coordinate-count census", |g| {
        g.check(q_of(3, 5, 2, 3) == 98, || {
            format!("q(3; d=5,r=2,N=3) = {}, want 98", q_of(3, 5, 2, 3))
        });
        g.check(q_of(3, 5, 2, 3) == 5usize.pow(3) - 3usize.pow(3), || {
            "q(3; d=5,r=2,N=3) != d^3 - (d-r)^3".into()
        });
        for n_modes in [3usize, 4] {
            for d in 3..=6usize {
                for r in 1..=d {
                    for k in 1..=n_modes {
                        let mut census = 0usize;
                        let total = d.pow(n_modes as u32);
                        for flat in 0..total {
                            let mut rem = flat;
                            let mut tails = 0usize;
                            for _ in 0..n_modes {
                                if rem % d >= r {
                                    tails += 1;
                                }
                                rem /= d;
                            }
                            if tails < k {
                                census += 1;
                            }
                        }
                        g.check(census == q_of(k, d, r, n_modes), || {
                            format!(
                                "census mismatch at d={d} r={r} N={n_modes} k={k}: \
                                 {census} vs q = {}",
                                q_of(k, d, r, n_modes)
                            )
                        });
                    }
                }
            }
        }
        Ok(())
    })
}

fn group_projection_equivalence() -> GroupReport {
    run_group("projected inner-product equivalence", |g| {
        let mut rng = stream_rng(0xE0_01, 0);
        for i in 0..500usize {
            let n_modes = 3 + (i % 2);
            let d = 3 + (i % 3);
            let r = 1 + (i % d);
            let rho = 1 + (i % n_modes);
            let x = random_gaussian_tensor(vec![d; n_modes], &mut rng);
            let a = random_gaussian_tensor(vec![d; n_modes], &mut rng);
            let factors: Vec<_> = (0..n_modes)
                .map(|_| random_orthonormal(d, r, &mut rng))
                .collect();
            let map = build_projection(&factors, rho)?;
            let want = a.inner(&x)?;
            let got = dot(&project_action(&map, &a)?, &project_system(&map, &x)?);
            g.check((want - got).abs() <= 1e-10 * (1.0 + want.abs()), || {
                format!("pair {i}: ⟨A,X⟩ = {want} but projected product = {got}")
            });
        }
        Ok(())
    })
}

fn group_perturbation_bounds() -> GroupReport {
    run_group("subspace and tail-block perturbation bounds", |g| {
        let mut rng = stream_rng(0xE0_02, 0);
        let (d, n_modes, r, c) = (5usize, 3usize, 2usize, 1.0f64);
        let ranks = vec![r; n_modes];
        for trial in 0..1000usize {
            let omega_target = 0.15 + 0.5 * rng.random::<f64>();
            let x = gen_system_tensor(d, n_modes, r, c, omega_target, &mut rng)?;
            let eps = 1e-3 + 0.1 * rng.random::<f64>();
            let noise = random_gaussian_tensor(vec![d; n_modes], &mut rng);
            let noisy = x.sub(&noise.scale(-eps / noise.frob_norm()))?;
            let dec = hosvd(&noisy, &ranks)?;
            let xhat = dec.reconstruct();
            let eta = xhat.sub(&x)?.frob_norm();
            let true_dec = hosvd(&x, &ranks)?;
            let omegas = min_positive_singular_values(&x)?;
            for mode in 0..n_modes {
                let perp = complement_basis(&dec.factors[mode])?;
                let mass = perp.tr_matmul(&true_dec.factors[mode]).frob_norm();
                g.check(mass <= eta / omegas[mode] + 1e-9, || {
                    format!(
                        "trial {trial} mode {mode}: complement mass {mass} \
                         exceeds eta/omega = {}",
                        eta / omegas[mode]
                    )
                });
            }
            let omega = omegas.iter().copied().fold(f64::INFINITY, f64::min);
            let map = build_projection(&dec.factors, n_modes)?;
            for k in 1..=n_modes {
                let got = block_norm(&map, &x, k)?;
                let bound = (binomial(n_modes, k) as f64).sqrt() * c * (eta / omega).powi(k as i32);
                g.check(got <= bound + 1e-9, || {
                    format!(
                        "trial {trial} k={k}: tail-block mass {got} exceeds bound {bound}"
                    )
                });
            }
        }
        Ok(())
    })
}

fn group_rank_truncation() -> GroupReport {
    run_group("rank-truncation exactness", |g| {
        let mut rng = stream_rng(0xE0_03, 0);
        let ranks = vec![2usize; 3];
        for trial in 0..100usize {
            let x = gen_system_tensor(5, 3, 2, 1.0, 0.2, &mut rng)?;
            let err = hosvd(&x, &ranks)?.reconstruct().sub(&x)?.frob_norm();
            g.check(err <= 1e-8, || {
                format!("trial {trial}: exact-rank truncation error {err}")
            });
        }
        for trial in 0..10usize {
            let y = random_gaussian_tensor(vec![4; 3], &mut rng);
            let y = y.scale(1.0 / y.frob_norm());
            let err = hosvd(&y, &[4, 4, 4])?.reconstruct().sub(&y)?.frob_norm();
            g.check(err <= 1e-10, || {
                format!("trial {trial}: full-rank transform not lossless, error {err}")
            });
        }
        Ok(())
    })
}

fn group_closed_form_params() -> GroupReport {
    run_group("closed-form policy parameters", |g| {
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        let (lambda, lambda_perp, c_perp) = closed_form_params(1.0, 0.5, 0.1, 3, 3, 1000, 98)?;
        g.check((lambda - 1.0).abs() <= 1e-12, || {
            format!("lambda = {lambda}, want 1")
        });
        let want_lp = 1000.0 / (98.0 * 1001f64.ln());
        g.check(rel(lambda_perp, want_lp) <= 1e-12, || {
            format!("lambda_perp = {lambda_perp}, want {want_lp}")
        });
        let want_cp = 2f64.powf(1.5) * 0.2f64.powi(3);
        g.check(rel(c_perp, want_cp) <= 1e-12, || {
            format!("c_perp = {c_perp}, want {want_cp}")
        });
        g.check(closed_form_params(1.0, 0.5, 0.6, 3, 3, 1000, 98).is_err(), || {
            "eta above omega must be rejected".into()
        });
        Ok(())
    })
}

fn group_worst_case_instance() -> GroupReport {
    run_group("worst-case instance", |g| {
        let mut rng = stream_rng(0xE0_04, 0);
        let (d, n_modes, r, t) = (4usize, 3usize, 2usize, 1536usize);
        let x = gen_lower_bound_instance(d, n_modes, r, t, &mut rng)?;
        let delta = lower_bound_delta(r, n_modes, t);
        g.check((delta - 1.0 / 192.0).abs() <= 1e-12, || {
            format!("delta = {delta}, want 1/192")
        });
        let nf2 = x.frob_norm().powi(2);
        let want = (r as f64).powi(2 * n_modes as i32) / (192.0 * t as f64);
        g.check((nf2 - want).abs() <= 1e-12 * want, || {
            format!("squared norm = {nf2}, want {want}")
        });
        let ranks = multilinear_rank(&x, RANK_TOL);
        g.check(ranks.iter().all(|&rk| rk <= r), || {
            format!("multilinear rank {ranks:?} exceeds ({r},{r},{r})")
        });
        let mut outside_ok = true;
        for flat in 0..x.len() {
            let idx = x.multi_index(flat);
            if tail_count(&idx, r) > 0 && x.get(&idx) != 0.0 {
                outside_ok = false;
            }
        }
        g.check(outside_ok, || {
            "support leaks outside the leading corner".into()
        });
        g.check(gen_lower_bound_instance(d, n_modes, r, 3, &mut rng).is_err(), || {
            "r^N > 2T must be rejected".into()
        });
        Ok(())
    })
}

/// Run every invariant suite. Failures are content of the report, not
/// errors; the CLI maps them to a nonzero exit code.
pub fn selftest() -> SelftestReport {
    SelftestReport {
        groups: vec![
            group_coordinate_census(),
            group_projection_equivalence(),
            group_perturbation_bounds(),
            group_rank_truncation(),
            group_closed_form_params(),
            group_worst_case_instance(),
        ],
    }
}
