//! Files written by `run` and `dump-init`.
//!
//! Everything except `timings.csv` and the timing block of `metadata.json`
//! is a deterministic function of the scenario.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use wrpower::{Partition, PreparedCase, Scenario, SimError, Trajectory};

use crate::{CliError, RunStats};

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

/// Write `rows` under `header` as CSV.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let inner = || -> csv::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    };
    inner().map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    pub os: String,
    pub arch: String,
    pub logical_cpus: usize,
}

impl Machine {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            logical_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Wall-clock seconds of the solve loop (DI) or the windowed run (WRW).
    pub wall_seconds: Option<f64>,
    /// Row-max parallel time of the relaxation.
    pub parallel_seconds: Option<f64>,
    /// Sum of every subsystem solve.
    pub serial_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    /// The scenario exactly as run, overrides included.
    pub scenario: Scenario,
    pub partition: Option<Vec<Vec<usize>>>,
    pub status: String,
    pub steps: usize,
    pub iterations: Option<usize>,
    pub windows: Option<usize>,
    pub newton_iterations: usize,
    pub converged: bool,
    pub timings: Timings,
    pub machine: Machine,
}

impl Metadata {
    fn base(scenario: &Scenario, partition: Option<&Partition>, status: String) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").into(),
            scenario: scenario.clone(),
            partition: partition.map(|p| p.subsystems.clone()),
            status,
            steps: scenario.n_steps().unwrap_or(0),
            iterations: None,
            windows: None,
            newton_iterations: 0,
            converged: false,
            timings: Timings::default(),
            machine: Machine::current(),
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(CliError::io(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    writeln!(w).and_then(|_| w.flush()).map_err(CliError::io(path))
}

/// Metadata for a run whose solver failed.
pub fn write_failure_metadata(
    dir: &Path,
    scenario: &Scenario,
    partition: Option<&Partition>,
    err: &SimError,
) -> Result<(), CliError> {
    let meta = Metadata::base(scenario, partition, format!("failed: {err}"));
    write_json(&dir.join("metadata.json"), &meta)
}

fn g(x: f64) -> String {
    format!("{x:e}")
}

/// Trajectory, statistics, iteration logs, timings and metadata of a
/// finished run. Rotor speeds are divided by `speed_base` when given.
pub fn write_run(
    dir: &Path,
    case: &PreparedCase,
    scenario: &Scenario,
    partition: Option<&Partition>,
    traj: &Trajectory,
    stats: &RunStats,
    speed_base: Option<f64>,
) -> Result<(), CliError> {
    let path = dir.join("trajectory.csv");
    let file = fs::File::create(&path).map_err(CliError::io(&path))?;
    let mut w = BufWriter::new(file);
    let written = speed_base.map(|base| traj.with_speed_per_unit(base));
    written
        .as_ref()
        .unwrap_or(traj)
        .write_csv(&mut w)
        .and_then(|_| w.flush())
        .map_err(CliError::io(&path))?;

    let residual = case
        .step_residual_norms(traj)?
        .into_iter()
        .fold(0.0, f64::max);
    let mut meta = Metadata::base(scenario, partition, "ok".into());
    meta.steps = case.steps;
    meta.converged = true;
    let mut summary: Vec<(&str, String)> = vec![
        ("method", format!("{:?}", scenario.method).to_lowercase()),
        ("steps", case.steps.to_string()),
        ("records", traj.len().to_string()),
        ("max_step_residual", g(residual)),
        ("speed_unit", if speed_base.is_some() { "pu" } else { "rad/s" }.to_string()),
    ];
    let mut timings: Vec<[String; 3]> = Vec::new();

    match stats {
        RunStats::Di(s) => {
            meta.newton_iterations = s.newton_iters.iter().sum();
            meta.timings.wall_seconds = Some(s.total_solve_time);
            timings.push(["solve".into(), String::new(), g(s.total_solve_time)]);
            write_csv(
                &dir.join("newton.csv"),
                &["step", "t", "newton_iterations"],
                s.newton_iters
                    .iter()
                    .enumerate()
                    .map(|(k, n)| [(k + 1).to_string(), g(case.time(k + 1)), n.to_string()]),
            )?;
        }
        RunStats::Wr(s) => {
            meta.iterations = Some(s.iterations);
            meta.newton_iterations = s.newton_iters;
            meta.converged = s.converged;
            meta.timings.parallel_seconds = Some(s.parallel_time);
            meta.timings.serial_seconds = Some(s.total_time());
            summary.push(("mode", format!("{:?}", scenario.mode).to_lowercase()));
            summary.push(("subsystems", partition.map_or(0, Partition::len).to_string()));
            summary.push(("iterations", s.iterations.to_string()));
            write_csv(
                &dir.join("wr_iterations.csv"),
                &["iteration", "delta"],
                s.deltas.iter().enumerate().map(|(k, d)| [(k + 1).to_string(), g(*d)]),
            )?;
            timings.push(["parallel".into(), String::new(), g(s.parallel_time)]);
            timings.push(["serial".into(), String::new(), g(s.total_time())]);
            for (k, row) in s.subsystem_times.iter().enumerate() {
                for (i, t) in row.iter().enumerate() {
                    timings.push([format!("iteration {}", k + 1), (i + 1).to_string(), g(*t)]);
                }
            }
        }
        RunStats::Wrw(s) => {
            meta.iterations = Some(s.total_iterations);
            meta.windows = Some(s.windows.len());
            meta.newton_iterations = s.windows.iter().map(|w| w.newton_iters).sum();
            meta.converged = s.windows.iter().all(|w| w.converged);
            meta.timings.wall_seconds = Some(s.wall_time);
            meta.timings.parallel_seconds = Some(s.parallel_time);
            meta.timings.serial_seconds = Some(s.windows.iter().map(|w| w.total_time()).sum());
            summary.push(("mode", format!("{:?}", scenario.mode).to_lowercase()));
            summary.push(("subsystems", partition.map_or(0, Partition::len).to_string()));
            summary.push(("windows", s.windows.len().to_string()));
            summary.push(("iterations", s.total_iterations.to_string()));
            let t_win = case.h * (case.steps / s.windows.len().max(1)) as f64;
            write_csv(
                &dir.join("windows.csv"),
                &["window", "t_start", "t_end", "iterations", "final_delta", "newton_iterations"],
                s.windows.iter().enumerate().map(|(w, ws)| {
                    [
                        (w + 1).to_string(),
                        g(w as f64 * t_win),
                        g((w + 1) as f64 * t_win),
                        ws.iterations.to_string(),
                        g(ws.deltas.last().copied().unwrap_or(0.0)),
                        ws.newton_iters.to_string(),
                    ]
                }),
            )?;
            write_csv(
                &dir.join("window_iterations.csv"),
                &["window", "iteration", "delta"],
                s.windows.iter().enumerate().flat_map(|(w, ws)| {
                    ws.deltas
                        .iter()
                        .enumerate()
                        .map(move |(k, d)| [(w + 1).to_string(), (k + 1).to_string(), g(*d)])
                }),
            )?;
            timings.push(["wall".into(), String::new(), g(s.wall_time)]);
            timings.push(["parallel".into(), String::new(), g(s.parallel_time)]);
            timings.push(["mean_window".into(), String::new(), g(s.mean_window_time())]);
            for (w, ws) in s.windows.iter().enumerate() {
                timings.push(["window".into(), (w + 1).to_string(), g(ws.parallel_time)]);
            }
        }
    }
    summary.push(("newton_iterations", meta.newton_iterations.to_string()));
    summary.push(("converged", meta.converged.to_string()));

    write_csv(&dir.join("stats.csv"), &["key", "value"], summary.iter().map(|(k, v)| [k.to_string(), v.clone()]))?;
    write_csv(&dir.join("timings.csv"), &["scope", "index", "seconds"], timings)?;
    write_json(&dir.join("metadata.json"), &meta)
}

/// One row per bus: solved voltage, angle, generation and load.
pub fn write_init<W: Write>(out: W, case: &PreparedCase) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bus", "kind", "v", "delta", "p_gen", "q_gen", "p_mech", "p_load", "q_load"])?;
    for (i, bus) in case.grid.buses.iter().enumerate() {
        let gen = case.grid.generators.iter().position(|gn| gn.bus == bus.id);
        let (p_gen, q_gen, p_mech) = match gen {
            Some(k) => (g(case.pf.pe[k]), g(case.pf.qe[k]), g(case.grid.generators[k].p_mech)),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([
            bus.id.to_string(),
            format!("{:?}", bus.kind).to_lowercase(),
            g(case.pf.v[i]),
            g(case.pf.delta[i]),
            p_gen,
            q_gen,
            p_mech,
            g(bus.p_load),
            g(bus.q_load),
        ])?;
    }
    w.flush()
}
