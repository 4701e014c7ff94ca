//! Command-line front end for the wrpower engine: scenario ingestion,
//! method dispatch and report emission.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod output;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use wrpower::grid_model::GridError;
use wrpower::sim_di::{simulate_di_case, DiStats};
use wrpower::sim_wr::{simulate_wr_case, WrStats};
use wrpower::sim_wrw::{simulate_wrw_case, WrwStats};
use wrpower::{GridModel, Method, Mode, Partition, PartitionRef, PreparedCase, Scenario, SimError, Trajectory, WindowPlan};

/// Partition used when a relaxation method runs without one configured.
pub const DEFAULT_PARTITION: &str = "table2-3";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    /// 1 for configuration errors, 2 for solver divergence, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Sim(SimError::Grid(GridError::Io(_))) => 3,
            Self::Sim(e) if e.is_divergence() => 2,
            Self::Sim(_) => 1,
            Self::Io { .. } => 3,
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(io::Error) -> Self + '_ {
        move |source| Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wrpower", version, about = "Power-system dynamic simulation by DI, WR and WRW")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write its trajectory, statistics and logs.
    Run(RunArgs),
    /// Run DI, WR and WRW over every partition preset and write the
    /// timing, accuracy and horizon-sweep reports.
    BenchPaper(BenchArgs),
    /// Solve time of DI, WR and WRW against the simulation horizon.
    SweepHorizon(SweepArgs),
    /// Write the power-flow initial operating point as CSV.
    DumpInit(DumpArgs),
    /// Check that a scenario parses, validates and initialises.
    Validate(ConfigArgs),
}

/// Scenario selection plus command-line overrides of its fields.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Scenario JSON; the three-disturbance 39-bus scenario when absent.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Preset name (table2-2 .. table2-7, single, per-bus), a partition JSON
    /// file or inline JSON such as `[[1,2],[3,4]]`.
    #[arg(long)]
    pub partition: Option<String>,
    /// WRW window length in seconds.
    #[arg(long)]
    pub window: Option<f64>,
    /// WR convergence threshold.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Jacobi worker threads.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Simulation horizon in seconds.
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Write rotor speeds in per-unit of synchronous speed instead of rad/s.
    #[arg(long)]
    pub omega_pu: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value = "bench")]
    pub out: PathBuf,
    /// Horizons of the solve-time sweep.
    #[arg(long, value_delimiter = ',', default_values_t = vec![5.0, 10.0, 15.0, 20.0])]
    pub horizons: Vec<f64>,
    /// Also relax with every bus as its own subsystem.
    #[arg(long)]
    pub include_per_bus: bool,
    /// Compute rotor-angle percent errors on angles relative to the slack.
    #[arg(long)]
    pub relative_angles: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value = "sweep")]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![5.0, 10.0, 15.0, 20.0])]
    pub horizons: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct DumpArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output CSV file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ConfigArgs {
    /// The scenario file (or the default scenario) with overrides applied
    /// and validated.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let mut s = match &self.scenario {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(CliError::io(path))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => Scenario::reference(),
        };
        if let Some(method) = self.method {
            s.method = method;
        }
        if let Some(mode) = self.mode {
            s.mode = mode;
        }
        if let Some(p) = &self.partition {
            s.partition = Some(parse_partition_arg(p)?);
        }
        if let Some(w) = self.window {
            s.window = Some(w);
        }
        if let Some(eps) = self.eps {
            s.wr.eps = eps;
        }
        if let Some(workers) = self.workers {
            s.wr.workers = Some(workers);
        }
        if let Some(t) = self.horizon {
            s.horizon = t;
        }
        s.validate()?;
        Ok(s)
    }
}

/// Interpret a `--partition` value as inline JSON, a JSON file or a preset
/// name, in that order.
pub fn parse_partition_arg(arg: &str) -> Result<PartitionRef, CliError> {
    let arg = arg.trim();
    let bad = |e: serde_json::Error| CliError::Config(format!("partition '{arg}': {e}"));
    if arg.starts_with('[') {
        return serde_json::from_str(arg).map_err(bad);
    }
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        return serde_json::from_str(&text).map_err(bad);
    }
    Ok(PartitionRef::Preset(arg.to_string()))
}

/// The scenario's partition, or the default preset, checked against `grid`.
pub fn scenario_partition(scenario: &Scenario, grid: &GridModel) -> Result<Partition, CliError> {
    let part = scenario
        .partition
        .clone()
        .unwrap_or_else(|| PartitionRef::Preset(DEFAULT_PARTITION.into()));
    Ok(part.resolve(grid)?)
}

pub fn window_plan(scenario: &Scenario) -> Result<WindowPlan, CliError> {
    Ok(WindowPlan::new(
        scenario.horizon,
        scenario.h,
        scenario.window.unwrap_or(scenario.h),
    )?)
}

/// Statistics of whichever method ran.
#[derive(Debug, Clone)]
pub enum RunStats {
    Di(DiStats),
    Wr(WrStats),
    Wrw(WrwStats),
}

/// Run the scenario's method on a prepared case.
pub fn execute(
    case: &PreparedCase,
    scenario: &Scenario,
    partition: Option<&Partition>,
) -> Result<(Trajectory, RunStats), SimError> {
    let need = || partition.ok_or_else(|| SimError::Config("relaxation needs a partition".into()));
    match scenario.method {
        Method::Di => simulate_di_case(case).map(|(t, s)| (t, RunStats::Di(s))),
        Method::Wr => simulate_wr_case(case, need()?, scenario.mode, &scenario.wr).map(|(t, s)| (t, RunStats::Wr(s))),
        Method::Wrw => {
            let plan = WindowPlan::new(scenario.horizon, scenario.h, scenario.window.unwrap_or(scenario.h))?;
            simulate_wrw_case(case, need()?, &plan, scenario.mode, &scenario.wr).map(|(t, s)| (t, RunStats::Wrw(s)))
        }
    }
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let scenario = args.config.scenario()?;
    let grid = scenario.load_grid()?;
    let case = PreparedCase::new(&grid, &scenario)?;
    let partition = match scenario.method {
        Method::Di => None,
        _ => Some(scenario_partition(&scenario, &case.grid)?),
    };
    output::ensure_dir(&args.out)?;
    log::info!("running {:?} for {} steps", scenario.method, case.steps);
    match execute(&case, &scenario, partition.as_ref()) {
        Ok((traj, stats)) => {
            let speed_base = args.omega_pu.then(|| case.grid.omega_s());
            output::write_run(&args.out, &case, &scenario, partition.as_ref(), &traj, &stats, speed_base)?;
            log::info!("wrote {}", args.out.display());
            Ok(())
        }
        Err(err) => {
            output::write_failure_metadata(&args.out, &scenario, partition.as_ref(), &err)?;
            Err(err.into())
        }
    }
}

pub fn validate(args: &ConfigArgs) -> Result<String, CliError> {
    let scenario = args.scenario()?;
    let grid = scenario.load_grid()?;
    let case = PreparedCase::new(&grid, &scenario)?;
    let mut summary = format!(
        "ok: method {:?}, {} steps of {} s, power flow converged in {} iteration(s)",
        scenario.method, case.steps, case.h, case.pf.iterations
    );
    if scenario.method != Method::Di || scenario.partition.is_some() {
        let part = scenario_partition(&scenario, &case.grid)?;
        summary.push_str(&format!(", {} subsystem(s)", part.len()));
    }
    if scenario.method == Method::Wrw {
        summary.push_str(&format!(", {} window(s)", window_plan(&scenario)?.w_max));
    }
    Ok(summary)
}

pub fn dump_init(args: &DumpArgs) -> Result<(), CliError> {
    let scenario = args.config.scenario()?;
    let grid = scenario.load_grid()?;
    let case = PreparedCase::new(&grid, &scenario)?;
    match &args.out {
        Some(path) => {
            let file = fs::File::create(path).map_err(CliError::io(path))?;
            output::write_init(file, &case).map_err(CliError::io(path))
        }
        None => output::write_init(io::stdout().lock(), &case).map_err(CliError::io(Path::new("<stdout>"))),
    }
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(args) => run(args),
        Command::BenchPaper(args) => bench::bench_paper(args).map(|summary| println!("{summary}")),
        Command::SweepHorizon(args) => bench::sweep(args),
        Command::DumpInit(args) => dump_init(args),
        Command::Validate(args) => validate(args).map(|s| println!("{s}")),
    }
}
