//! `graspsim`: run grasp scenarios, experiment grids and closure checks.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grasp_core::closure::{is_force_closure, ContactSet};
use grasp_core::harness::{
    fmt_sig, run_calibration, run_experiment_a, run_experiment_b, run_trial, write_csv, ExperimentConfig, ScenarioSpec,
};
use grasp_core::GraspError;

const EXIT_FAULT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_CLOSURE: u8 = 3;

#[derive(Parser)]
#[command(name = "graspsim", version, about = "Tactile grasp controller simulator and force-closure checker")]
struct Cli {
    /// Print progress to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Override a scenario value by dotted path, e.g. `controller.f_goal=2.5`.
    /// May be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Base random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write its time series and result summary.
    Run {
        /// Scenario file (TOML).
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the displacement grid (3 objects, 5 offsets, 3 repetitions, 2 controllers).
    ExpA {
        #[command(flatten)]
        common: Common,
        /// Also write every trial's time series.
        #[arg(long)]
        series: bool,
    },
    /// Run the push and rotation scenarios with every ablation.
    ExpB {
        #[command(flatten)]
        common: Common,
    },
    /// Check force closure for a contact list (TOML with `[[contacts]]` tables).
    /// Exits 0 when the grasp is force-closure and 3 when it is not.
    Closure {
        contacts: PathBuf,
        /// Friction cone polygon sides; overrides the file's `sides`.
        #[arg(long)]
        sides: Option<usize>,
    },
    /// Estimate sensor biases and report the unloaded noise level.
    Calibrate {
        /// Scenario file; built-in defaults when omitted.
        scenario: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// Unloaded reads used to measure false detections.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<GraspError> for Failure {
    fn from(e: GraspError) -> Self {
        let code = if e.is_config() { EXIT_CONFIG } else { EXIT_FAULT };
        Failure { code, message: e.to_string() }
    }
}

/// Input files that cannot be read are a configuration error, unlike
/// failures writing results.
fn input_error(e: GraspError) -> Failure {
    match e {
        GraspError::Io { .. } => Failure { code: EXIT_CONFIG, message: e.to_string() },
        other => other.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, Failure> {
    let verbose = cli.verbose > 0;
    match &cli.command {
        Command::Run { scenario, common } => {
            let spec = load_scenario(Some(scenario), common)?;
            if verbose {
                eprintln!("running {} for {} s", spec.name, spec.duration);
            }
            let outcome = run_trial(&spec)?;
            ensure_dir(&common.out)?;
            let csv = common.out.join(format!("{}.csv", spec.name));
            write_csv(&outcome.series, &csv)?;
            let r = &outcome.result;
            let mut text = String::new();
            let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), fmt_sig);
            let _ = writeln!(text, "scenario = {}", spec.name);
            let _ = writeln!(text, "displacement_truth_mm = {}", fmt_sig(r.displacement_truth * 1e3));
            let _ = writeln!(text, "displacement_proxy_mm = {}", fmt_sig(r.displacement_proxy * 1e3));
            let _ = writeln!(text, "max_total_force = {}", fmt_sig(r.max_total_force));
            let _ = writeln!(text, "overshoot = {}", fmt_sig(r.overshoot));
            let _ = writeln!(text, "settle_time = {}", opt(r.settle_time));
            let _ = writeln!(text, "holding_start = {}", opt(r.holding_start));
            let _ = writeln!(text, "final_drift_rate_mm_s = {}", fmt_sig(r.final_drift_rate * 1e3));
            let _ = writeln!(text, "finished = {}", r.finished);
            write_text(&common.out.join(format!("{}_result.txt", spec.name)), &text)?;
            print!("{text}");
            if verbose {
                eprintln!("wrote {}", csv.display());
            }
            Ok(0)
        }
        Command::ExpA { common, series } => {
            let cfg = experiment_config(common, *series);
            if verbose {
                eprintln!("experiment A: 90 trials");
            }
            let (report, outcomes) = run_experiment_a(&cfg)?;
            ensure_dir(&common.out)?;
            report.write(&common.out, &outcomes, *series)?;
            print!("{}", report.render_table());
            Ok(0)
        }
        Command::ExpB { common } => {
            let cfg = experiment_config(common, true);
            if verbose {
                eprintln!("experiment B: 8 trials");
            }
            let (report, outcomes) = run_experiment_b(&cfg)?;
            ensure_dir(&common.out)?;
            report.write(&common.out, &outcomes)?;
            print!("{}", report.render_table());
            Ok(0)
        }
        Command::Closure { contacts, sides } => {
            let set = ContactSet::load(contacts).map_err(input_error)?;
            let list = set.to_contacts()?;
            let report = is_force_closure(&list, sides.unwrap_or(set.sides))?;
            println!("contacts: {}", list.len());
            println!("surjective: {}", yes_no(report.surjective));
            println!("strict internal force: {}", yes_no(report.has_strict_internal));
            println!("margin: {}", fmt_sig(report.margin));
            println!("force-closure: {}", yes_no(report.is_force_closure));
            Ok(if report.is_force_closure { 0 } else { EXIT_NOT_CLOSURE })
        }
        Command::Calibrate { scenario, common, samples } => {
            let spec = load_scenario(scenario.as_deref(), common)?;
            let rep = run_calibration(&spec, *samples)?;
            for i in 0..2 {
                println!(
                    "finger {}: gamma {} bias {} estimate {} max unloaded {} N false detections {}",
                    i + 1,
                    fmt_sig(rep.gamma[i]),
                    fmt_sig(rep.bias_true[i]),
                    fmt_sig(rep.bias_estimate[i]),
                    fmt_sig(rep.max_unloaded_abs[i]),
                    fmt_sig(rep.false_positive_rate[i]),
                );
            }
            Ok(0)
        }
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn load_scenario(path: Option<&Path>, common: &Common) -> Result<ScenarioSpec, Failure> {
    let mut spec = match path {
        Some(p) => ScenarioSpec::load(p).map_err(input_error)?,
        None => ScenarioSpec::default(),
    };
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    spec.apply_overrides(&common.overrides)?;
    spec.validate()?;
    Ok(spec)
}

fn experiment_config(common: &Common, write_series: bool) -> ExperimentConfig {
    ExperimentConfig { seed: common.seed.unwrap_or(0), overrides: common.overrides.clone(), write_series }
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure { code: EXIT_FAULT, message: format!("{}: {e}", dir.display()) })
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure { code: EXIT_FAULT, message: format!("{}: {e}", path.display()) })
}
