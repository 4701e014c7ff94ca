//! The benchmark suite: DI once, WR and WRW over every partition preset,
//! error statistics against DI, the horizon sweep and per-window timing.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use wrpower::grid_model::PRESET_NAMES;
use wrpower::metrics::{percent_error_stats, relative_rotor_angle, render_error_table, MetricsError, Variable};
use wrpower::sim_di::simulate_di_case;
use wrpower::sim_wr::simulate_wr_case;
use wrpower::sim_wrw::{simulate_wrw_case, sweep_horizon, SweepRow};
use wrpower::{Partition, PartitionRef, PreparedCase, Scenario, Trajectory};

use crate::output::{ensure_dir, write_csv};
use crate::{scenario_partition, window_plan, BenchArgs, CliError, SweepArgs};

/// Generators whose δ, ω and Pe enter the error statistics.
pub const ERROR_GENERATORS: [usize; 3] = [7, 8, 9];

/// Result of one method on one partition.
#[derive(Debug, Clone)]
pub struct Cell {
    pub outcome: Result<CellTimes, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellTimes {
    pub parallel_seconds: f64,
    pub iterations: usize,
    pub mean_window_seconds: Option<f64>,
}

impl Cell {
    fn seconds(&self) -> String {
        self.outcome.as_ref().map(|t| format!("{:e}", t.parallel_seconds)).unwrap_or_default()
    }

    fn iterations(&self) -> String {
        self.outcome.as_ref().map(|t| t.iterations.to_string()).unwrap_or_default()
    }

    fn status(&self) -> String {
        match &self.outcome {
            Ok(_) => "ok".into(),
            Err(e) => format!("failed: {e}"),
        }
    }

    fn short(&self) -> String {
        match &self.outcome {
            Ok(t) => format!("{:.3}", t.parallel_seconds),
            Err(_) => "diverged".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PartitionRow {
    pub name: String,
    pub subsystems: usize,
    pub wr: Cell,
    pub wrw: Cell,
}

fn relative_angles(traj: &Trajectory) -> Result<Trajectory, MetricsError> {
    let mut out = traj.clone();
    for g in 0..traj.gen_buses.len() {
        let rel = relative_rotor_angle(traj, g + 1)?;
        for (r, d) in out.records.iter_mut().zip(rel) {
            r.gen_delta[g] = d;
        }
    }
    Ok(out)
}

fn run_partition(
    case: &PreparedCase,
    scenario: &Scenario,
    name: &str,
    part: &Partition,
) -> Result<(PartitionRow, Option<Trajectory>, Option<Trajectory>), CliError> {
    let plan = window_plan(scenario)?;
    log::info!("{name}: WR");
    let wr = simulate_wr_case(case, part, scenario.mode, &scenario.wr);
    log::info!("{name}: WRW over {} windows", plan.w_max);
    let wrw = simulate_wrw_case(case, part, &plan, scenario.mode, &scenario.wr);
    let wr_cell = Cell {
        outcome: wr.as_ref().map_err(|e| e.to_string()).map(|(_, s)| CellTimes {
            parallel_seconds: s.parallel_time,
            iterations: s.iterations,
            mean_window_seconds: None,
        }),
    };
    let wrw_cell = Cell {
        outcome: wrw.as_ref().map_err(|e| e.to_string()).map(|(_, s)| CellTimes {
            parallel_seconds: s.parallel_time,
            iterations: s.total_iterations,
            mean_window_seconds: Some(s.mean_window_time()),
        }),
    };
    for (label, cell) in [("WR", &wr_cell), ("WRW", &wrw_cell)] {
        if let Err(e) = &cell.outcome {
            log::warn!("{name}: {label} {e}");
        }
    }
    Ok((
        PartitionRow {
            name: name.into(),
            subsystems: part.len(),
            wr: wr_cell,
            wrw: wrw_cell,
        },
        wr.ok().map(|(t, _)| t),
        wrw.ok().map(|(t, _)| t),
    ))
}

/// Aligned text rendering of the solve-time table.
pub fn render_time_table(di_seconds: f64, rows: &[PartitionRow]) -> String {
    let mut out = format!("{:<10} {:>4} {:>10} {:>10} {:>10}\n", "partition", "p", "DI [s]", "WR [s]", "WRW [s]");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<10} {:>4} {:>10.3} {:>10} {:>10}",
            r.name,
            r.subsystems,
            di_seconds,
            r.wr.short(),
            r.wrw.short()
        );
    }
    out
}

fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let cell = |c: &Result<f64, String>| match c {
        Ok(t) => (format!("{t:e}"), "ok".to_string()),
        Err(e) => (String::new(), format!("failed: {e}")),
    };
    write_csv(
        path,
        &["horizon", "di_seconds", "di_status", "wr_seconds", "wr_status", "wrw_seconds", "wrw_status"],
        rows.iter().map(|r| {
            let (di, di_s) = cell(&r.di_time);
            let (wr, wr_s) = cell(&r.wr_time);
            let (wrw, wrw_s) = cell(&r.wrw_time);
            [format!("{}", r.horizon), di, di_s, wr, wr_s, wrw, wrw_s]
        }),
    )
}

/// Largest relative deviation of `times` from the line through the origin
/// and the last point, and the ratio of the last to the first time.
pub fn sweep_trend(horizons: &[f64], times: &[f64]) -> Option<(f64, f64)> {
    let (&t_last, &y_last) = (horizons.last()?, times.last()?);
    if times.len() != horizons.len() || !(y_last > 0.0) {
        return None;
    }
    let slope = y_last / t_last;
    let deviation = horizons
        .iter()
        .zip(times)
        .map(|(t, y)| (y - slope * t).abs() / (slope * t))
        .fold(0.0, f64::max);
    Some((deviation, y_last / times[0]))
}

fn trend_line(label: &str, horizons: &[f64], cells: Vec<&Result<f64, String>>) -> String {
    let times: Option<Vec<f64>> = cells.iter().map(|c| c.as_ref().ok().copied()).collect();
    match times.and_then(|t| sweep_trend(horizons, &t)) {
        Some((dev, ratio)) => format!(
            "{label}: deviation from linear {:.1} %, time(last)/time(first) {ratio:.2}",
            100.0 * dev
        ),
        None => format!("{label}: failed at one or more horizons"),
    }
}

/// Run the whole suite and write its reports into `args.out`. Only a DI
/// failure aborts; relaxation failures become marked cells.
pub fn bench_paper(args: &BenchArgs) -> Result<String, CliError> {
    let scenario = args.config.scenario()?;
    let grid = scenario.load_grid()?;
    let case = PreparedCase::new(&grid, &scenario)?;
    ensure_dir(&args.out)?;

    log::info!("DI over {} steps", case.steps);
    let (di, di_stats) = simulate_di_case(&case)?;
    let error_partition = scenario
        .partition
        .clone()
        .unwrap_or_else(|| PartitionRef::Preset(crate::DEFAULT_PARTITION.into()));

    let mut refs: Vec<PartitionRef> = PRESET_NAMES.iter().map(|n| PartitionRef::Preset(n.to_string())).collect();
    if !refs.contains(&error_partition) {
        refs.insert(0, error_partition.clone());
    }
    if args.include_per_bus {
        refs.push(PartitionRef::Preset("per-bus".into()));
    }

    let mut rows = Vec::new();
    let mut error_runs = (None, None);
    for r in &refs {
        let name = match r {
            PartitionRef::Preset(n) => n.clone(),
            PartitionRef::Explicit(_) => "custom".into(),
        };
        let part = r.resolve(&case.grid)?;
        let (row, wr, wrw) = run_partition(&case, &scenario, &name, &part)?;
        if *r == error_partition {
            error_runs = (wr, wrw);
        }
        rows.push(row);
    }

    write_csv(
        &args.out.join("solve_times.csv"),
        &[
            "partition",
            "subsystems",
            "di_seconds",
            "wr_seconds",
            "wr_iterations",
            "wr_status",
            "wrw_seconds",
            "wrw_iterations",
            "wrw_status",
            "wrw_faster",
        ],
        rows.iter().map(|r| {
            let faster = match (&r.wr.outcome, &r.wrw.outcome) {
                (Ok(a), Ok(b)) => (b.parallel_seconds < a.parallel_seconds).to_string(),
                _ => String::new(),
            };
            [
                r.name.clone(),
                r.subsystems.to_string(),
                format!("{:e}", di_stats.total_solve_time),
                r.wr.seconds(),
                r.wr.iterations(),
                r.wr.status(),
                r.wrw.seconds(),
                r.wrw.iterations(),
                r.wrw.status(),
                faster,
            ]
        }),
    )?;
    let table = render_time_table(di_stats.total_solve_time, &rows);
    fs::write(args.out.join("solve_times.txt"), &table).map_err(CliError::io(&args.out))?;

    write_csv(
        &args.out.join("window_time.csv"),
        &["partition", "window_seconds", "mean_window_solve_seconds", "faster_than_real_time"],
        rows.iter().filter_map(|r| {
            let t_win = scenario.window.unwrap_or(scenario.h);
            r.wrw.outcome.as_ref().ok().and_then(|t| t.mean_window_seconds).map(|m| {
                [r.name.clone(), format!("{t_win}"), format!("{m:e}"), (m < t_win).to_string()]
            })
        }),
    )?;

    let vars: Vec<Variable> = Variable::generator_set(&ERROR_GENERATORS)
        .into_iter()
        .filter(|v| v.series(&di).is_ok())
        .collect();
    let transform = |t: &Trajectory| {
        if args.relative_angles {
            relative_angles(t).map_err(|e| CliError::Config(e.to_string()))
        } else {
            Ok(t.clone())
        }
    };
    let reference = transform(&di)?;
    let mut reports = Vec::new();
    for (label, traj) in [("WR", &error_runs.0), ("WRW", &error_runs.1)] {
        match traj {
            Some(t) => {
                let rep = percent_error_stats(&reference, &transform(t)?, &vars)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                reports.push((label, rep));
            }
            None => log::warn!("no {label} trajectory for the error statistics"),
        }
    }
    let named: Vec<(&str, &_)> = reports.iter().map(|(n, r)| (*n, r)).collect();
    fs::write(args.out.join("error_stats.csv"), render_error_table(&named)).map_err(CliError::io(&args.out))?;
    write_csv(
        &args.out.join("max_abs_errors.csv"),
        &["variable", "method", "max_abs_error"],
        reports.iter().flat_map(|(label, rep)| {
            rep.rows
                .iter()
                .map(move |r| [r.variable.to_string(), label.to_string(), format!("{:e}", r.max_abs)])
        }),
    )?;

    let sweep_part = error_partition.resolve(&case.grid)?;
    log::info!("horizon sweep over {:?}", args.horizons);
    let sweep_rows = sweep_horizon(&case.grid, &scenario, &sweep_part, &args.horizons)?;
    write_sweep(&args.out.join("sweep.csv"), &sweep_rows)?;

    let mut summary = table;
    let _ = writeln!(summary);
    let _ = writeln!(
        summary,
        "{}",
        trend_line("WR sweep", &args.horizons, sweep_rows.iter().map(|r| &r.wr_time).collect())
    );
    let _ = writeln!(
        summary,
        "{}",
        trend_line("WRW sweep", &args.horizons, sweep_rows.iter().map(|r| &r.wrw_time).collect())
    );
    for (label, rep) in &reports {
        let avg: Vec<String> = rep.rows.iter().map(|r| format!("{} {:.3e} %", r.variable, r.average)).collect();
        let _ = writeln!(summary, "{label} average percent errors: {}", avg.join(", "));
    }
    Ok(summary)
}

pub fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let scenario = args.config.scenario()?;
    let grid = scenario.load_grid()?;
    let part = scenario_partition(&scenario, &grid)?;
    ensure_dir(&args.out)?;
    let rows = sweep_horizon(&grid, &scenario, &part, &args.horizons)?;
    write_sweep(&args.out.join("sweep.csv"), &rows)?;
    println!("{}", trend_line("WR", &args.horizons, rows.iter().map(|r| &r.wr_time).collect()));
    println!("{}", trend_line("WRW", &args.horizons, rows.iter().map(|r| &r.wrw_time).collect()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_times_have_no_deviation() {
        let (dev, ratio) = sweep_trend(&[5.0, 10.0, 20.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!(dev < 1e-12);
        assert!((ratio - 4.0).abs() < 1e-12);
        let (dev, _) = sweep_trend(&[5.0, 10.0], &[1.5, 2.0]).unwrap();
        assert!((dev - 0.5).abs() < 1e-12);
        assert!(sweep_trend(&[1.0], &[]).is_none());
    }

    #[test]
    fn failed_cells_render_as_diverged() {
        let rows = vec![PartitionRow {
            name: "x".into(),
            subsystems: 2,
            wr: Cell { outcome: Err("boom".into()) },
            wrw: Cell {
                outcome: Ok(CellTimes {
                    parallel_seconds: 0.5,
                    iterations: 4,
                    mean_window_seconds: Some(0.1),
                }),
            },
        }];
        let table = render_time_table(1.0, &rows);
        assert!(table.contains("diverged"));
        assert!(table.contains("0.500"));
        assert_eq!(rows[0].wr.status(), "failed: boom");
        assert_eq!(rows[0].wr.seconds(), "");
    }
}
