use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, ValueEnum};
use serde::Serialize;

use super::config::RunConfig;
use super::kernel_test::kernel_self_test;
use super::manifest::{RunManifest, CODE_VERSION};
use super::output::{fmt_real, trajectory_csv, write_profiles, CsvTable};
use crate::ergolab::{
    irreducibility_report, krylov_bogolyubov, steering_experiment, synchronous_coupling, uniqueness_probe, Binning, Observable, ReachStatus,
    SteeringPlan,
};
use crate::error::{Result, SpdeError};
use crate::solver::{simulate, Field};
use crate::tangent_bel::{bel_gradient, fd_gradient, fit_gradient_bound};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_BLOW_UP: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subcommand {
    Simulate,
    KernelTest,
    Invariant,
    Couple,
    Steer,
    Gradient,
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subcommand::Simulate => "simulate",
            Subcommand::KernelTest => "kernel-test",
            Subcommand::Invariant => "invariant",
            Subcommand::Couple => "couple",
            Subcommand::Steer => "steer",
            Subcommand::Gradient => "gradient",
        })
    }
}

impl FromStr for Subcommand {
    type Err = SpdeError;

    fn from_str(s: &str) -> Result<Self> {
        <Self as ValueEnum>::from_str(s, false).map_err(|_| SpdeError::config(format!("unknown subcommand '{s}'")))
    }
}

#[derive(Debug, Parser)]
#[command(name = "spdelab", version, about = "Simulation and ergodicity diagnostics for stochastic reaction-diffusion-flux equations")]
pub struct CliArgs {
    #[arg(value_enum)]
    pub subcommand: Subcommand,
    /// config file, or a run manifest (.json) to replay
    #[arg(long)]
    pub config: PathBuf,
    /// overrides noise.seed
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// worker threads (default: all cores)
    #[arg(long)]
    pub threads: Option<usize>,
}

/// What a subcommand produced: files written under the output directory and
/// the exit code to report.
struct Outcome {
    outputs: Vec<String>,
    exit_code: i32,
}

pub fn exit_code_for(err: &SpdeError) -> i32 {
    match err {
        SpdeError::Config(_) | SpdeError::Validation(_) | SpdeError::Hypothesis { .. } | SpdeError::Domain(_) => EXIT_INVALID,
        SpdeError::BlowUp { .. } | SpdeError::TangentBlowUp { .. } => EXIT_BLOW_UP,
        _ => EXIT_FAILURE,
    }
}

/// Loads a config file, or the resolved config stored in a manifest.
pub fn load_config(path: &Path, subcommand: Subcommand) -> Result<RunConfig> {
    if path.extension().is_some_and(|e| e == "json") {
        let manifest = RunManifest::read(path)?;
        if manifest.subcommand != subcommand.to_string() {
            return Err(SpdeError::config(format!(
                "manifest {} was recorded for '{}', not '{subcommand}'",
                path.display(),
                manifest.subcommand
            )));
        }
        RunConfig::parse(&manifest.resolved_config)
    } else {
        RunConfig::from_path(path)
    }
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match CliArgs::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    let mut cfg = match load_config(&args.config, args.subcommand) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    match dispatch(args.subcommand, &cfg, &args.out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

/// Runs one subcommand, writing its data files and `manifest.json` under
/// `out`. Returns the exit code; errors before any output is produced are
/// returned as `Err`.
pub fn dispatch(subcommand: Subcommand, cfg: &RunConfig, out: &Path) -> Result<i32> {
    std::fs::create_dir_all(out)?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let result = match subcommand {
        Subcommand::Simulate => run_simulate(cfg, out),
        Subcommand::KernelTest => run_kernel_test(cfg, out),
        Subcommand::Invariant => run_invariant(cfg, out),
        Subcommand::Couple => run_couple(cfg, out),
        Subcommand::Steer => run_steer(cfg, out),
        Subcommand::Gradient => run_gradient(cfg, out),
    };
    let (outcome, err) = match result {
        Ok(o) => (o, None),
        Err(e) => {
            let code = exit_code_for(&e);
            (
                Outcome {
                    outputs: Vec::new(),
                    exit_code: code,
                },
                Some(e),
            )
        }
    };
    let manifest = RunManifest {
        subcommand: subcommand.to_string(),
        resolved_config: cfg.to_text(),
        seeds: vec![cfg.seed],
        stream: cfg.stream,
        version: CODE_VERSION.to_string(),
        started_unix: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
        exit_code: outcome.exit_code,
        outputs: outcome.outputs,
    };
    manifest.write(&out.join("manifest.json"))?;
    match err {
        Some(e) => Err(e),
        None => Ok(outcome.exit_code),
    }
}

fn write_table(out: &Path, name: &str, table: &CsvTable, outputs: &mut Vec<String>) -> Result<()> {
    table.write(&out.join(name))?;
    outputs.push(name.to_string());
    Ok(())
}

fn write_json(out: &Path, name: &str, value: &impl Serialize, outputs: &mut Vec<String>) -> Result<()> {
    std::fs::write(out.join(name), serde_json::to_string_pretty(value)? + "\n")?;
    outputs.push(name.to_string());
    Ok(())
}

fn observable_by_name(cfg: &RunConfig) -> Result<Observable> {
    let e = &cfg.experiment;
    let name = e.psi.as_str();
    Ok(match name {
        "h_norm_sq" => Observable::h_norm_sq(),
        "point" => Observable::point(cfg.observable_point),
        "sup_abs" => Observable::sup_abs(),
        "constant" => Observable::constant(1.0),
        _ => {
            if let Some(n) = name.strip_prefix("tanh_mode_").and_then(|n| n.parse().ok()) {
                Observable::tanh_mode(n, e.psi_eps)
            } else if let Some(n) = name.strip_prefix("mode_").and_then(|n| n.parse().ok()) {
                Observable::mode(n)
            } else {
                return Err(SpdeError::config(format!(
                    "experiment.psi: unknown observable '{name}' (h_norm_sq, point, sup_abs, constant, mode_<n>, tanh_mode_<n>)"
                )));
            }
        }
    })
}

fn run_simulate(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let sim = cfg.sim_config()?;
    let traj = simulate(&sim)?;
    let mut outputs = Vec::new();
    write_table(out, "trajectory.csv", &trajectory_csv(&traj), &mut outputs)?;
    if !traj.exit_times.is_empty() {
        let mut table = CsvTable::new(&["level", "tau"]);
        for rec in &traj.exit_times {
            table.reals(&[rec.level, rec.tau]);
        }
        write_table(out, "exit_times.csv", &table, &mut outputs)?;
    }
    if cfg.experiment.dump_profiles {
        write_profiles(&traj, &out.join("profiles.bin"))?;
        outputs.push("profiles.bin".into());
    }
    Ok(Outcome { outputs, exit_code: EXIT_OK })
}

fn run_kernel_test(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let n_modes = cfg.experiment.kernel_modes.unwrap_or(cfg.n_cells / 2).max(1);
    let rows = kernel_self_test(n_modes, cfg.seed)?;
    let mut table = CsvTable::new(&["identity", "parameters", "max_error", "tolerance", "passed"]);
    let mut all = true;
    for r in &rows {
        all &= r.passed();
        if !r.passed() {
            eprintln!("kernel-test: {} failed: {:e} > {:e}", r.identity, r.max_error, r.tolerance);
        }
        table.row(&[
            r.identity.to_string(),
            r.parameters.clone(),
            fmt_real(r.max_error),
            fmt_real(r.tolerance),
            r.passed().to_string(),
        ]);
    }
    let mut outputs = Vec::new();
    write_table(out, "kernel_test.csv", &table, &mut outputs)?;
    Ok(Outcome {
        outputs,
        exit_code: if all { EXIT_OK } else { EXIT_FAILURE },
    })
}

fn run_invariant(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let sim = cfg.sim_config()?;
    let burn_in = cfg.experiment.burn_in.unwrap_or(cfg.horizon / 10.0);
    let traj = simulate(&sim)?;
    let observables = Observable::builtins(cfg.observable_point);
    let measure = krylov_bogolyubov(&traj, burn_in, &observables, &Binning::Count(cfg.experiment.n_bins))?;
    let mut bins = CsvTable::new(&["observable", "lo", "hi", "mass"]);
    let mut summary = CsvTable::new(&["observable", "mean", "variance", "n_samples"]);
    for h in &measure.histograms {
        for (k, m) in h.masses.iter().enumerate() {
            bins.row(&[h.name.clone(), fmt_real(h.edges[k]), fmt_real(h.edges[k + 1]), fmt_real(*m)]);
        }
        summary.row(&[h.name.clone(), fmt_real(h.mean()), fmt_real(h.variance()), h.samples.len().to_string()]);
    }
    let mut outputs = Vec::new();
    write_table(out, "invariant_histograms.csv", &bins, &mut outputs)?;
    write_table(out, "invariant_summary.csv", &summary, &mut outputs)?;
    Ok(Outcome { outputs, exit_code: EXIT_OK })
}

fn run_couple(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let sim = cfg.sim_config()?;
    let f1 = sim.initial.clone();
    let f2 = cfg.experiment.second.field(sim.grid);
    let mut outputs = Vec::new();

    let curve = synchronous_coupling(&f1, &f2, &sim)?;
    let mut table = CsvTable::new(&["t", "distance"]);
    for (t, d) in curve.times.iter().zip(&curve.distance) {
        table.reals(&[*t, *d]);
    }
    write_table(out, "coupling.csv", &table, &mut outputs)?;

    let burn_in = cfg.experiment.burn_in.unwrap_or(cfg.horizon / 10.0);
    let report = uniqueness_probe(&f1, &f2, &sim, &Observable::builtins(cfg.observable_point), burn_in)?;
    let mut table = CsvTable::new(&["observable", "distance", "noise", "ratio"]);
    for d in &report.distances {
        table.row(&[d.name.clone(), fmt_real(d.distance), fmt_real(d.noise), fmt_real(d.ratio())]);
    }
    write_table(out, "uniqueness.csv", &table, &mut outputs)?;
    eprintln!("couple: max distance/noise ratio {:.3}", report.max_ratio());
    Ok(Outcome { outputs, exit_code: EXIT_OK })
}

#[derive(Serialize)]
struct SteerStatus {
    status: String,
    lower_bound: f64,
    n_paths: usize,
    hits: usize,
    hit_lower: f64,
    gap_events: usize,
    gap_upper: f64,
    controlled_hit_fraction: f64,
    controlled_hit_lower_95: f64,
    k_threshold: f64,
    regime_fraction: f64,
    i2_exceed_fraction: f64,
    i3_exceed_fraction: f64,
}

fn run_steer(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let sim = cfg.sim_config()?;
    if sim.truncation.is_none() {
        return Err(SpdeError::config("steer needs truncation.R"));
    }
    let e = &cfg.experiment;
    let a = e.target.field(sim.grid);
    let plan = match e.k_threshold {
        Some(k) => SteeringPlan::new(a, e.radius, e.t, e.t1, k)?,
        None => SteeringPlan::with_pilot(a, e.radius, e.t, e.t1, &sim, e.n_pilot)?,
    }
    .with_reaction(e.with_reaction);

    let controlled = steering_experiment(&plan, &sim, e.n_paths)?;
    let mut table = CsvTable::new(&["path", "final_distance", "i1_error", "i2_norm", "i3_norm"]);
    for k in 0..controlled.n_paths {
        table.row(&[
            k.to_string(),
            fmt_real(controlled.final_distances[k]),
            fmt_real(controlled.i1_errors[k]),
            fmt_real(controlled.i2_norms[k]),
            fmt_real(controlled.i3_norms[k]),
        ]);
    }
    let mut outputs = Vec::new();
    write_table(out, "steer_paths.csv", &table, &mut outputs)?;

    let full = sim.clone().without_truncation();
    let report = irreducibility_report(&plan, &sim, &full, e.n_paths)?;
    let status = SteerStatus {
        status: report.status.to_string(),
        lower_bound: report.lower_bound,
        n_paths: report.n_paths,
        hits: report.hits,
        hit_lower: report.hit_lower,
        gap_events: report.gap_events,
        gap_upper: report.gap_upper,
        controlled_hit_fraction: controlled.hit_fraction,
        controlled_hit_lower_95: controlled.hit_lower_95,
        k_threshold: controlled.k_threshold,
        regime_fraction: controlled.regime_fraction,
        i2_exceed_fraction: controlled.i2_exceed_fraction,
        i3_exceed_fraction: controlled.i3_exceed_fraction,
    };
    write_json(out, "steer_status.json", &status, &mut outputs)?;
    eprintln!(
        "steer: status {} (hits {}/{}, lower bound {:.4}); I1 regime {:.3}, P(|I2|>=r/6) {:.3}, P(|I3|>=r/6) {:.3}",
        report.status, report.hits, report.n_paths, report.lower_bound, status.regime_fraction, status.i2_exceed_fraction, status.i3_exceed_fraction
    );
    let exit_code = match report.status {
        ReachStatus::Positive => EXIT_OK,
        ReachStatus::Inconclusive => EXIT_INCONCLUSIVE,
    };
    Ok(Outcome { outputs, exit_code })
}

fn run_gradient(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let sim = cfg.sim_config()?;
    let e = &cfg.experiment;
    let psi = observable_by_name(cfg)?;
    let f = sim.initial.clone();
    let h = Field::mode(sim.grid, e.direction_mode, 1.0);
    let mut table = CsvTable::new(&["t", "bel", "bel_std_err", "fd", "fd_std_err", "z"]);
    for &t in &e.times {
        let bel = bel_gradient(&psi, &f, &h, t, &sim, e.n_samples)?;
        let fd = fd_gradient(&psi, &f, &h, t, &sim, e.n_samples, e.fd_eps)?;
        table.reals(&[t, bel.value, bel.std_err, fd.value, fd.std_err, bel.z_score(&fd)]);
    }
    let mut outputs = Vec::new();
    write_table(out, "gradient.csv", &table, &mut outputs)?;

    if e.times.len() >= 2 && psi.sup_bound.is_some() {
        let dirs: Vec<Field> = (1..=3).map(|n| Field::mode(sim.grid, n, 1.0)).collect();
        let fit = fit_gradient_bound(&psi, &f, &dirs, &e.times, &sim, e.n_samples)?;
        let mut table = CsvTable::new(&["t", "sup_gradient", "exponent", "constant"]);
        for (t, g) in fit.times.iter().zip(&fit.sup_gradient) {
            table.reals(&[*t, *g, fit.exponent, fit.constant]);
        }
        write_table(out, "gradient_bound.csv", &table, &mut outputs)?;
        eprintln!("gradient: fitted time exponent {:.3}", fit.exponent);
    }
    Ok(Outcome { outputs, exit_code: EXIT_OK })
}
