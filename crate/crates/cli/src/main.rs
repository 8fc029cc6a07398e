//! `gibbsflock`: validate and run flocking scenarios, rasterize patterns.
//!
//! Exit codes: 0 success, 2 input error, 3 runtime error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use gibbsflock_core::output::{metrics_csv, plot_data, trajectory_csv};
use gibbsflock_core::{rasterize, run, Error, Outline, Scenario};
use serde::Serialize;

const EXIT_INPUT: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const PLOT_FILE: &str = "plot_data.dat";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Parser)]
#[command(name = "gibbsflock", version, about = "Gibbs-random-field swarm flocking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trajectory, metrics, plot data and a manifest.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replace the scenario seed (re-draws random placement).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Rasterize an outline file into a pattern file.
    Rasterize {
        #[arg(long)]
        outline: PathBuf,
        #[arg(long = "cell-size")]
        cell_size: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a scenario against every invariant.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(Serialize)]
struct RunManifest<'a> {
    scenario: &'a Path,
    scenario_name: &'a str,
    seed: u64,
    steps: usize,
    tool_version: &'static str,
    config_hash: String,
    start_unix_s: f64,
    end_unix_s: f64,
    outputs: Vec<&'static str>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Numeric { .. } => EXIT_RUNTIME,
        _ => EXIT_INPUT,
    }
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code_for(err))
}

fn write_output(path: &Path, contents: &str) -> Result<(), ExitCode> {
    fs::write(path, contents).map_err(|e| {
        eprintln!("error: writing {}: {e}", path.display());
        ExitCode::from(EXIT_RUNTIME)
    })
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, Error> {
    let scenario = Scenario::load(path)?;
    match seed {
        Some(s) => scenario.with_seed(s),
        None => Ok(scenario),
    }
}

fn cmd_run(scenario_path: &Path, out: &Path, seed: Option<u64>, steps: Option<usize>) -> ExitCode {
    let start = unix_now();
    let mut scenario = match load_scenario(scenario_path, seed) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    if let Some(n) = steps {
        scenario.steps = n;
    }
    if let Err(e) = scenario.validate() {
        return fail(&e);
    }
    log::info!(
        "running `{}`: {} robots, {} steps, dt = {}",
        scenario.name,
        scenario.robots.len(),
        scenario.steps,
        scenario.dt
    );
    let log = match run(&scenario) {
        Ok(l) => l,
        Err(e) => return fail(&e),
    };
    if let Err(e) = fs::create_dir_all(out) {
        eprintln!("error: creating {}: {e}", out.display());
        return ExitCode::from(EXIT_RUNTIME);
    }
    let files = [
        (TRAJECTORY_FILE, trajectory_csv(&log)),
        (METRICS_FILE, metrics_csv(&log)),
        (PLOT_FILE, plot_data(&log)),
    ];
    for (name, body) in &files {
        if let Err(code) = write_output(&out.join(name), body) {
            return code;
        }
    }
    let manifest = RunManifest {
        scenario: scenario_path,
        scenario_name: &scenario.name,
        seed: scenario.seed,
        steps: scenario.steps,
        tool_version: env!("CARGO_PKG_VERSION"),
        config_hash: scenario.config_hash(),
        start_unix_s: start,
        end_unix_s: unix_now(),
        outputs: vec![TRAJECTORY_FILE, METRICS_FILE, PLOT_FILE, MANIFEST_FILE],
    };
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    if let Err(code) = write_output(&out.join(MANIFEST_FILE), &(body + "\n")) {
        return code;
    }
    if let Some(m) = log.last().map(|s| &s.metrics) {
        println!(
            "{} steps, t = {:.2} s, order = {:.4}, d_min = {:.4} m",
            log.len(),
            m.t,
            m.order,
            m.d_min
        );
    }
    ExitCode::SUCCESS
}

fn cmd_rasterize(outline: &Path, cell_size: f64, out: &Path) -> ExitCode {
    let pattern = match Outline::load(outline).and_then(|o| rasterize(&o, cell_size)) {
        Ok(p) => p,
        Err(e) => return fail(&e),
    };
    if let Err(code) = write_output(out, &pattern.to_text()) {
        return code;
    }
    println!("{}", pattern.len());
    ExitCode::SUCCESS
}

fn cmd_validate(path: &Path) -> ExitCode {
    let scenario = match Scenario::load(path) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let errors = scenario.validation_errors();
    if errors.is_empty() {
        println!(
            "{}: ok ({} robots, {} obstacles, {} steps, config {})",
            path.display(),
            scenario.robots.len(),
            scenario.obstacles.len(),
            scenario.steps,
            &scenario.config_hash()[..12]
        );
        return ExitCode::SUCCESS;
    }
    for e in &errors {
        eprintln!("error: {e}");
    }
    eprintln!("{}: {} problem(s)", path.display(), errors.len());
    ExitCode::from(EXIT_INPUT)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GIBBSFLOCK_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            steps,
        } => cmd_run(&scenario, &out, seed, steps),
        Command::Rasterize {
            outline,
            cell_size,
            out,
        } => cmd_rasterize(&outline, cell_size, &out),
        Command::Validate { scenario } => cmd_validate(&scenario),
    }
}
