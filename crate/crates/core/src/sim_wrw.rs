//! Waveform relaxation with windowing: the horizon is cut into equal windows
//! that are relaxed to convergence one after another, each starting from the
//! final values of the window before it.

use std::time::Instant;

use crate::dae_core::StatePoint;
use crate::error::{Result, SimError};
use crate::grid_model::{GridModel, Partition};
use crate::scenario::{steps_of, PreparedCase, Scenario};
use crate::sim_di::simulate_di_case;
use crate::sim_wr::{simulate_wr_case, Mode, Relaxation, WrConfig, WrStats};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct WindowPlan {
    pub t_win: f64,
    pub w_max: usize,
    pub steps_per_window: usize,
    /// `[start, end]` of every window in seconds.
    pub bounds: Vec<(f64, f64)>,
}

impl WindowPlan {
    pub fn new(horizon: f64, h: f64, t_win: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(SimError::PlanMismatch(format!("horizon must be positive, got {horizon}")));
        }
        if !(h > 0.0) || !(t_win > 0.0) {
            return Err(SimError::PlanMismatch("step and window length must be positive".into()));
        }
        let steps_per_window = steps_of(t_win, h).ok_or_else(|| {
            SimError::PlanMismatch(format!("window length {t_win} is not a multiple of h = {h}"))
        })?;
        let w_max = steps_of(horizon, t_win).ok_or_else(|| {
            SimError::PlanMismatch(format!(
                "horizon {horizon} is not a multiple of the window length {t_win}"
            ))
        })?;
        let len = steps_per_window as f64 * h;
        Ok(Self {
            t_win,
            w_max,
            steps_per_window,
            bounds: (0..w_max)
                .map(|w| (w as f64 * len, (w + 1) as f64 * len))
                .collect(),
        })
    }

    /// A single window spanning the whole horizon.
    pub fn whole(horizon: f64, h: f64) -> Result<Self> {
        Self::new(horizon, h, horizon)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WrwStats {
    pub windows: Vec<WrStats>,
    /// Row-max rule summed over every window.
    pub parallel_time: f64,
    pub total_iterations: usize,
    /// Wall-clock seconds for the whole windowed run.
    pub wall_time: f64,
}

impl WrwStats {
    pub fn per_window_iterations(&self) -> Vec<usize> {
        self.windows.iter().map(|w| w.iterations).collect()
    }

    /// Average parallel solve time of one window.
    pub fn mean_window_time(&self) -> f64 {
        if self.windows.is_empty() {
            0.0
        } else {
            self.parallel_time / self.windows.len() as f64
        }
    }
}

pub fn simulate_wrw(
    grid: &GridModel,
    scenario: &Scenario,
    partition: &Partition,
    plan: &WindowPlan,
    mode: Mode,
    cfg: &WrConfig,
) -> Result<(Trajectory, WrwStats)> {
    let case = PreparedCase::new(grid, scenario)?;
    simulate_wrw_case(&case, partition, plan, mode, cfg)
}

pub fn simulate_wrw_case(
    case: &PreparedCase,
    partition: &Partition,
    plan: &WindowPlan,
    mode: Mode,
    cfg: &WrConfig,
) -> Result<(Trajectory, WrwStats)> {
    if plan.w_max * plan.steps_per_window != case.steps {
        return Err(SimError::PlanMismatch(format!(
            "{} windows of {} steps do not cover {} steps",
            plan.w_max, plan.steps_per_window, case.steps
        )));
    }
    let relax = Relaxation::new(case, partition, mode, cfg)?;
    let clock = Instant::now();
    let mut states: Vec<StatePoint> = Vec::with_capacity(case.steps + 1);
    states.push(case.init.clone());
    let mut stats = WrwStats::default();
    for w in 0..plan.w_max {
        let start = w * plan.steps_per_window;
        let init = states[start].clone();
        let (window, wstats) = relax
            .run_window(start, plan.steps_per_window, &init)
            .map_err(|e| SimError::WindowFailure {
                window: w + 1,
                source: Box::new(e),
            })?;
        // window[0] is the previous window's final point
        states.extend(window.into_iter().skip(1));
        stats.parallel_time += wstats.parallel_time;
        stats.total_iterations += wstats.iterations;
        stats.windows.push(wstats);
    }
    stats.wall_time = clock.elapsed().as_secs_f64();
    Ok((Trajectory::from_states(case, 0, &states), stats))
}

/// Outcome of one method at one horizon: solve seconds or the error text.
pub type SweepCell = std::result::Result<f64, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub horizon: f64,
    pub di_time: SweepCell,
    pub wr_time: SweepCell,
    pub wrw_time: SweepCell,
}

/// Solve time of DI, WR and WRW (window = h) for every horizon.
pub fn sweep_horizon(
    grid: &GridModel,
    base: &Scenario,
    partition: &Partition,
    horizons: &[f64],
) -> Result<Vec<SweepRow>> {
    for &t in horizons {
        if !(t > 0.0) || steps_of(t, base.h).is_none() {
            return Err(SimError::PlanMismatch(format!(
                "horizon {t} is not a positive multiple of h = {}",
                base.h
            )));
        }
    }
    let cell = |r: Result<f64>| r.map_err(|e| e.to_string());
    horizons
        .iter()
        .map(|&horizon| {
            let scenario = base.with_horizon(horizon);
            let case = PreparedCase::new(grid, &scenario)?;
            let t_win = base.window.unwrap_or(base.h);
            let di_time = cell(simulate_di_case(&case).map(|(_, s)| s.total_solve_time));
            let wr_time = cell(
                simulate_wr_case(&case, partition, base.mode, &base.wr).map(|(_, s)| s.parallel_time),
            );
            let wrw_time = cell(WindowPlan::new(horizon, base.h, t_win).and_then(|plan| {
                simulate_wrw_case(&case, partition, &plan, base.mode, &base.wr)
                    .map(|(_, s)| s.parallel_time)
            }));
            Ok(SweepRow {
                horizon,
                di_time,
                wr_time,
                wrw_time,
            })
        })
        .collect()
}
