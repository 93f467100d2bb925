//! `flexctl`: run, compare, map and validate the switching-period controller.
//!
//! Exit codes: 0 ok, 1 validation failure, 2 usage/config error, 3 divergence.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flexctl::config::{self, RunManifest};
use flexctl::simulator::{self, ComparisonSummary, SimConfig};
use flexctl::stability::{self, MapSpec};
use flexctl::validation;
use flexctl::{Error, Fidelity, GainMode, SeriesOptions};

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "flexctl", version, about = "Energy-based DC motor control under switching sampling periods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one closed-loop run and write its trace.
    Run(RunArgs),
    /// Run dynamic and constant energy gain on shared schedules.
    Compare(CompareArgs),
    /// Sweep the V1 stability margin over sampling period and speed.
    StabilityMap(MapArgs),
    /// Check the series and discretization identities against reference routes.
    Validate(ValidateArgs),
}

#[derive(Args, Debug, Clone)]
struct SharedArgs {
    /// `key = value` configuration file applied over the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "FLEXCTL_SEED")]
    seed: Option<u64>,
    /// Simulated horizon in seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    h_min: Option<f64>,
    #[arg(long)]
    h_max: Option<f64>,
    /// dynamic | constant
    #[arg(long)]
    gain_mode: Option<String>,
    /// corrected | paper_literal
    #[arg(long)]
    fidelity: Option<String>,
}

impl SharedArgs {
    /// Defaults, then the config file, then explicit flags.
    fn resolve(&self) -> Result<SimConfig, Error> {
        let mut cfg = SimConfig::default();
        if let Some(path) = &self.config {
            config::load_file(&mut cfg, path)?;
        }
        if let Some(s) = self.seed {
            cfg.schedule.seed = s;
        }
        if let Some(d) = self.duration {
            cfg.duration = d;
        }
        if let Some(h) = self.h_min {
            cfg.schedule.h_min = h;
        }
        if let Some(h) = self.h_max {
            cfg.schedule.h_max = h;
        }
        if let Some(m) = &self.gain_mode {
            cfg.gains.gain_mode = m.parse::<GainMode>()?;
        }
        if let Some(f) = &self.fidelity {
            cfg.params.fidelity = f.parse::<Fidelity>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    shared: SharedArgs,
    /// Trace CSV path.
    #[arg(long, default_value = "trace.csv")]
    out: PathBuf,
    /// Also write the period sequence as `k,t,h_k`.
    #[arg(long)]
    schedule_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    shared: SharedArgs,
    /// Output directory for dynamic.csv, constant.csv and summary.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Number of consecutive seeds, starting at --seed, in the summary.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
}

#[derive(Args, Debug)]
struct MapArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    h_min: f64,
    #[arg(long, default_value_t = 0.3)]
    h_max: f64,
    #[arg(long, default_value_t = 50)]
    h_steps: usize,
    #[arg(long, default_value_t = 0.0)]
    omega_min: f64,
    #[arg(long, default_value_t = 10.0)]
    omega_max: f64,
    #[arg(long, default_value_t = 50)]
    omega_steps: usize,
    /// Overrides the proportional gain.
    #[arg(long)]
    kp: Option<f64>,
    /// Overrides the damping gain.
    #[arg(long)]
    kd: Option<f64>,
    /// Held current, A (default: initial current).
    #[arg(long)]
    current: Option<f64>,
    /// Held angle, rad (default: initial angle).
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value = "stability_map.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Series truncation threshold.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_terms: Option<usize>,
    /// Random matrices per identity.
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<(), Error> {
    fs::write(manifest_path(out), manifest.render())?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<u8, Error> {
    let cfg = args.shared.resolve()?;
    let mut manifest = RunManifest::new("run", cfg);
    manifest.outputs.push(args.out.display().to_string());
    if let Some(p) = &args.schedule_out {
        flexctl::scheduler::write_schedule_csv(&cfg.schedule, cfg.duration, BufWriter::new(File::create(p)?))?;
        manifest.outputs.push(p.display().to_string());
    }
    let (trace, code) = match simulator::run(&cfg) {
        Ok(trace) => (trace, 0),
        Err(Error::Diverged {
            step,
            magnitude,
            trace,
        }) => {
            eprintln!("diverged at step {step} (|x| = {magnitude:e}); partial trace written");
            (*trace, EXIT_DIVERGED)
        }
        Err(e) => return Err(e),
    };
    trace.write_csv(BufWriter::new(File::create(&args.out)?))?;
    write_manifest(&args.out, &manifest)?;
    if code == 0 {
        let f = &trace.final_state;
        println!(
            "steps={} t={} theta={} omega={} current={}",
            trace.records.len(),
            trace.final_time,
            f.theta,
            f.omega,
            f.current
        );
    }
    Ok(code)
}

fn cmd_compare(args: CompareArgs) -> Result<u8, Error> {
    let cfg = args.shared.resolve()?;
    if args.seeds == 0 {
        return Err(Error::InvalidConfig("--seeds must be at least 1".into()));
    }
    fs::create_dir_all(&args.out)?;
    let base = cfg.schedule.seed;
    let seeds: Vec<u64> = (0..args.seeds).map(|i| base.wrapping_add(i)).collect();
    let comparisons = match simulator::compare_seeds(&cfg, &seeds) {
        Ok(c) => c,
        Err(Error::Diverged { step, magnitude, .. }) => {
            eprintln!("a run diverged at step {step} (|x| = {magnitude:e})");
            return Ok(EXIT_DIVERGED);
        }
        Err(e) => return Err(e),
    };
    let dynamic_path = args.out.join("dynamic.csv");
    let constant_path = args.out.join("constant.csv");
    let summary_path = args.out.join("summary.csv");
    comparisons[0]
        .dynamic
        .write_csv(BufWriter::new(File::create(&dynamic_path)?))?;
    comparisons[0]
        .constant
        .write_csv(BufWriter::new(File::create(&constant_path)?))?;
    let rows: Vec<ComparisonSummary> = comparisons.iter().map(|c| c.summary.clone()).collect();
    simulator::write_summary_csv(&rows, BufWriter::new(File::create(&summary_path)?))?;

    let mut manifest = RunManifest::new("compare", cfg);
    manifest.seeds = seeds;
    manifest.outputs = [&dynamic_path, &constant_path, &summary_path]
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    write_manifest(&summary_path, &manifest)?;
    for r in &rows {
        println!(
            "seed={} dynamic_theta_err={} constant_theta_err={}",
            r.seed, r.dynamic.theta, r.constant.theta
        );
    }
    Ok(0)
}

fn cmd_stability_map(args: MapArgs) -> Result<u8, Error> {
    let mut cfg = SimConfig::default();
    if let Some(path) = &args.config {
        config::load_file(&mut cfg, path)?;
    }
    if let Some(kp) = args.kp {
        cfg.gains.k_p = kp;
    }
    if let Some(kd) = args.kd {
        cfg.gains.k_d = kd;
    }
    cfg.params.validate()?;
    cfg.gains.validate()?;
    cfg.guards.validate()?;
    if args.h_steps == 0 || args.omega_steps == 0 {
        return Err(Error::InvalidConfig("grid axes must be non-empty".into()));
    }
    if args.h_min > args.h_max || args.h_min < cfg.guards.eps_h {
        return Err(Error::InvalidConfig(format!(
            "h axis [{}, {}] must be ordered and above eps_h = {}",
            args.h_min, args.h_max, cfg.guards.eps_h
        )));
    }
    if args.omega_min > args.omega_max {
        return Err(Error::InvalidConfig("omega axis must be ordered".into()));
    }
    let spec = MapSpec::linear(
        (args.h_min, args.h_max, args.h_steps),
        (args.omega_min, args.omega_max, args.omega_steps),
        args.current.unwrap_or(cfg.initial.current),
        args.theta.unwrap_or(cfg.initial.theta),
        cfg.desired,
        cfg.guards.eps_h,
    );
    let grid = stability::stability_map(&cfg.params, &cfg.gains, &spec)?;
    grid.write_csv(BufWriter::new(File::create(&args.out)?))?;
    let mut manifest = RunManifest::new("stability-map", cfg);
    manifest.outputs.push(args.out.display().to_string());
    write_manifest(&args.out, &manifest)?;
    println!(
        "cells={} stable_cells={}",
        grid.axis1.len() * grid.axis2.len(),
        grid.stable_cells()
    );
    Ok(0)
}

fn cmd_validate(args: ValidateArgs) -> Result<u8, Error> {
    let mut opts = SeriesOptions::default();
    if let Some(t) = args.tol {
        opts.tol = t;
    }
    if let Some(m) = args.max_terms {
        opts.max_terms = m;
    }
    opts.validate()?;
    let results = validation::run_identity_suite(&opts, args.count, args.seed)?;
    println!("{:<44} {:>6} {:>12} {:>10}  result", "check", "cases", "max_error", "tolerance");
    for r in &results {
        println!(
            "{:<44} {:>6} {:>12.3e} {:>10.1e}  {}",
            r.name,
            r.cases,
            r.max_error,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    Ok(if results.iter().all(|r| r.passed) { 0 } else { EXIT_FAILED })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::StabilityMap(a) => cmd_stability_map(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e @ (Error::InvalidConfig(_) | Error::SamplingTooSmall { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}
