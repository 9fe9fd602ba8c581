//! `dcik` command line: scenario runs, offline verification, metrics, path
//! export and one-shot solves.
//!
//! Exit codes: 0 success, 1 runtime failure or unmet expectation (solver
//! errors, collisions in a run that expects none), 2 bad input.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use dcik::costs::{CostWeights, GoalMode, GoalSpec};
use dcik::harness::{metrics_csv, MetricsDocument, RunLog, RunOptions, Scenario, VerificationReport};
use dcik::kinematics::{Arm, ArmState, Pose};
use dcik::model::{build_acm, RobotModel};
use dcik::proximity::ProximityConfig;
use dcik::solver::{Solver, SolverConfig};
use nalgebra::{Isometry3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

pub const CONFIG_DIR_ENV: &str = "DAWNIK_DEFAULT_CONFIG_DIR";

#[derive(Parser, Debug)]
#[command(name = "dcik", version, about = "Collision-aware multi-arm IK solver and scenario simulator")]
pub struct Cli {
    /// Suppress progress output on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a scenario (or every scenario in a directory), then verify and score it.
    Run(RunArgs),
    /// Re-check recorded logs for collisions.
    Verify(LogArgs),
    /// Recompute metrics from recorded logs.
    Metrics(LogArgs),
    /// Export the reference waypoints of a scenario as CSV.
    Paths(PathsArgs),
    /// Solve one tick for a single arm and print the result as JSON.
    Solve(SolveArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Scenario file or directory; relative paths fall back to $DAWNIK_DEFAULT_CONFIG_DIR.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Record every tick's active pairs in the logs.
    #[arg(long)]
    pub dump_active_pairs: bool,
    #[arg(long)]
    pub no_verify: bool,
    #[arg(long)]
    pub no_metrics: bool,
}

#[derive(Args, Debug)]
pub struct LogArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory holding `trial_*.jsonl` written by `run`.
    #[arg(long)]
    pub logs: PathBuf,
    /// Where to write results; defaults to the log directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PathsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Robot description file.
    #[arg(long)]
    pub model: PathBuf,
    /// Current joint positions as a JSON array.
    #[arg(long)]
    pub q: String,
    /// Goal as JSON: {"mode": "pose", "position": [..], "rpy": [..], "w11": 1, "w12": 1}.
    #[arg(long)]
    pub goal: String,
    /// Cost weight overrides as JSON.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<dcik::Error> for CliError {
    fn from(e: dcik::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a, cli.quiet),
        Command::Verify(a) => cmd_verify(a, cli.quiet),
        Command::Metrics(a) => cmd_metrics(a, cli.quiet),
        Command::Paths(a) => cmd_paths(a),
        Command::Solve(a) => cmd_solve(a),
    }
}

/// Resolves a config argument: as given if it exists, else inside the
/// default config directory. With no argument, the directory itself.
pub fn resolve_config(arg: Option<&Path>) -> Result<PathBuf, CliError> {
    let default_dir = std::env::var_os(CONFIG_DIR_ENV).map(PathBuf::from);
    match (arg, default_dir) {
        (Some(p), _) if p.exists() => Ok(p.to_path_buf()),
        (Some(p), Some(dir)) if p.is_relative() && dir.join(p).exists() => Ok(dir.join(p)),
        (Some(p), _) => Err(CliError::Input(format!("config not found: {}", p.display()))),
        (None, Some(dir)) => Ok(dir),
        (None, None) => Err(CliError::Input(format!("no --config given and {CONFIG_DIR_ENV} is not set"))),
    }
}

/// Scenario files named by a config argument (a file, or every `*.json` in a directory).
fn config_files(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| io_err(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Input(format!("no scenario files in {}", path.display())));
    }
    Ok(files)
}

fn load_scenario(path: &Path, seed: Option<u64>, trials: Option<usize>) -> Result<Scenario, CliError> {
    let mut config = dcik::harness::ScenarioConfig::from_file(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(t) = trials {
        config.trials = t;
    }
    Ok(Scenario::from_config(config, path.parent().unwrap_or(Path::new(".")))?)
}

/// Writes to stdout; a reader that went away early is not an error.
fn emit(text: &str) -> Result<(), CliError> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Runtime(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

#[derive(Serialize)]
struct TimingSummary {
    solves: usize,
    median_ms: f64,
    p90_ms: f64,
    p99_ms: f64,
    max_ms: f64,
}

fn timing_summary(logs: &[RunLog]) -> TimingSummary {
    let mut t: Vec<f64> =
        logs.iter().flat_map(|l| l.records.iter().filter_map(|r| r.wall_time)).map(|s| s * 1e3).collect();
    t.sort_by(f64::total_cmp);
    let q = |p: f64| if t.is_empty() { 0.0 } else { t[((t.len() - 1) as f64 * p).round() as usize] };
    TimingSummary { solves: t.len(), median_ms: q(0.5), p90_ms: q(0.9), p99_ms: q(0.99), max_ms: q(1.0) }
}

fn write_outputs(
    dir: &Path,
    scenario: &Scenario,
    verification: &[VerificationReport],
    metrics: Option<&MetricsDocument>,
) -> Result<(), CliError> {
    if !verification.is_empty() {
        write_json(&dir.join("verification.json"), &verification)?;
    }
    if let Some(m) = metrics {
        write_json(&dir.join("metrics.json"), m)?;
        let csv = metrics_csv(&scenario.config.name, &m.arms);
        fs::write(dir.join("metrics.csv"), csv).map_err(|e| io_err(dir, e))?;
    }
    Ok(())
}

fn cmd_run(a: &RunArgs, quiet: bool) -> Result<(), CliError> {
    let files = config_files(&resolve_config(a.config.as_deref())?)?;
    // load everything first so a bad file fails before any simulation
    let scenarios = files.iter().map(|f| load_scenario(f, a.seed, a.trials)).collect::<Result<Vec<_>, _>>()?;
    let options = RunOptions { dump_active_pairs: a.dump_active_pairs };
    let mut failures = Vec::new();
    for scenario in &scenarios {
        let name = &scenario.config.name;
        let dir = a.out.join(name);
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let logs = dcik::harness::run_trials(scenario, options)?;
        for log in &logs {
            let path = dir.join(format!("trial_{}.jsonl", log.trial));
            log.save(&path)?;
        }
        let errors: usize = logs.iter().map(|l| l.records.iter().filter(|r| r.error.is_some()).count()).sum();
        let verification = if a.no_verify {
            Vec::new()
        } else {
            logs.iter().map(|l| scenario.verify(l)).collect::<Result<Vec<_>, _>>()?
        };
        let metrics = if a.no_metrics || a.no_verify { None } else { Some(scenario.metrics(&logs, &verification)?) };
        write_outputs(&dir, scenario, &verification, metrics.as_ref())?;
        write_json(&dir.join("timing.json"), &timing_summary(&logs))?;
        let collisions: usize = verification.iter().map(|v| v.collisions).sum();
        if !quiet {
            eprint!("{name}: {} trials, {collisions} colliding ticks", logs.len());
            if let Some(m) = &metrics {
                for arm in &m.arms {
                    eprint!(", {} {:.2} mm / {:.2} mrad", arm.arm, arm.mean_position(), arm.mean_orientation());
                }
            }
            eprintln!();
        }
        if errors > 0 {
            failures.push(format!("{name}: {errors} solver errors"));
        }
        if scenario.config.expect_no_collisions && collisions > 0 {
            failures.push(format!("{name}: {collisions} colliding ticks"));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(failures.join("; ")))
    }
}

fn load_logs(dir: &Path) -> Result<Vec<RunLog>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("trial_") && n.ends_with(".jsonl"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Input(format!("no trial logs in {}", dir.display())));
    }
    let mut logs = files.iter().map(|f| RunLog::load(f)).collect::<Result<Vec<_>, _>>()?;
    logs.sort_by_key(|l| l.trial);
    Ok(logs)
}

fn single_scenario(config: Option<&Path>) -> Result<Scenario, CliError> {
    let path = resolve_config(config)?;
    if path.is_dir() {
        return Err(CliError::Input("this command needs a single scenario file".into()));
    }
    load_scenario(&path, None, None)
}

fn cmd_verify(a: &LogArgs, quiet: bool) -> Result<(), CliError> {
    let scenario = single_scenario(a.config.as_deref())?;
    let logs = load_logs(&a.logs)?;
    let reports = logs.iter().map(|l| scenario.verify(l)).collect::<Result<Vec<_>, _>>()?;
    let out = a.out.clone().unwrap_or_else(|| a.logs.clone());
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    write_outputs(&out, &scenario, &reports, None)?;
    let collisions: usize = reports.iter().map(|r| r.collisions).sum();
    if !quiet {
        eprintln!("{}: {collisions} colliding ticks over {} trials", scenario.config.name, reports.len());
    }
    if scenario.config.expect_no_collisions && collisions > 0 {
        return Err(CliError::Runtime(format!("{collisions} colliding ticks")));
    }
    Ok(())
}

fn cmd_metrics(a: &LogArgs, quiet: bool) -> Result<(), CliError> {
    let scenario = single_scenario(a.config.as_deref())?;
    let logs = load_logs(&a.logs)?;
    let reports = logs.iter().map(|l| scenario.verify(l)).collect::<Result<Vec<_>, _>>()?;
    let metrics = scenario.metrics(&logs, &reports)?;
    let out = a.out.clone().unwrap_or_else(|| a.logs.clone());
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    write_outputs(&out, &scenario, &reports, Some(&metrics))?;
    if !quiet {
        emit(&metrics_csv(&scenario.config.name, &metrics.arms))?;
    }
    Ok(())
}

fn cmd_paths(a: &PathsArgs) -> Result<(), CliError> {
    let scenario = single_scenario(a.config.as_deref())?;
    fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;
    for c in &scenario.controlled {
        let mut csv = String::from("stamp,x,y,z\n");
        for w in &c.waypoints {
            csv.push_str(&format!("{},{},{},{}\n", w.stamp, w.position.x, w.position.y, w.position.z));
        }
        let path = a.out.join(format!("{}_{}.csv", scenario.config.name, c.name));
        fs::write(&path, csv).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GoalInput {
    #[serde(default = "pose_mode")]
    mode: GoalMode,
    #[serde(default)]
    position: [f64; 3],
    /// Fixed-axis roll, pitch, yaw.
    #[serde(default)]
    rpy: Option<[f64; 3]>,
    /// `[w, x, y, z]`, alternative to `rpy`.
    #[serde(default)]
    quaternion: Option<[f64; 4]>,
    #[serde(default)]
    w11: Option<f64>,
    #[serde(default)]
    w12: Option<f64>,
}

fn pose_mode() -> GoalMode {
    GoalMode::Pose
}

impl GoalInput {
    fn into_goal(self) -> Result<GoalSpec, CliError> {
        let orientation = match (self.rpy, self.quaternion) {
            (Some(_), Some(_)) => return Err(CliError::Input("give either rpy or quaternion, not both".into())),
            (Some([r, p, y]), None) => UnitQuaternion::from_euler_angles(r, p, y),
            (None, Some([w, x, y, z])) => {
                let q = Quaternion::new(w, x, y, z);
                if !(q.norm() > 1e-9) {
                    return Err(CliError::Input("goal quaternion has zero norm".into()));
                }
                UnitQuaternion::from_quaternion(q)
            }
            (None, None) => UnitQuaternion::identity(),
        };
        let (w11, w12) = match self.mode {
            GoalMode::Position => (self.w11.unwrap_or(1.0), 0.0),
            GoalMode::Orientation => (0.0, self.w12.unwrap_or(1.0)),
            GoalMode::Pose => (self.w11.unwrap_or(1.0), self.w12.unwrap_or(1.0)),
        };
        let goal = GoalSpec { mode: self.mode, target: Pose::new(Vector3::from(self.position), orientation), w11, w12 };
        goal.validate()?;
        Ok(goal)
    }
}

fn cmd_solve(a: &SolveArgs) -> Result<(), CliError> {
    let model = RobotModel::from_file(&a.model)?;
    let q: Vec<f64> = serde_json::from_str(&a.q).map_err(|e| CliError::Input(format!("--q: {e}")))?;
    if q.len() != model.dof() {
        return Err(CliError::Input(format!("--q has {} values, model has {} joints", q.len(), model.dof())));
    }
    let goal: GoalInput = serde_json::from_str(&a.goal).map_err(|e| CliError::Input(format!("--goal: {e}")))?;
    let goal = goal.into_goal()?;
    let weights: CostWeights = match &a.weights {
        Some(w) => serde_json::from_str(w).map_err(|e| CliError::Input(format!("--weights: {e}")))?,
        None => CostWeights::default(),
    };
    let acm = build_acm(&model, &[]);
    let arm = Arm::new(Arc::new(model), Isometry3::identity());
    let mut solver = Solver::new(arm, acm, weights, ProximityConfig::default(), SolverConfig::default(), a.seed)?;
    let result = solver.solve(&ArmState::new(q, 0.0), &[], &goal, a.dt)?;
    let text = serde_json::to_string_pretty(&result).map_err(|e| CliError::Runtime(e.to_string()))?;
    emit(&(text + "\n"))
}
