//! Simulation scenario and the prepared per-run case shared by all methods.

use serde::{Deserialize, Serialize};

use crate::dae_core::{DaeModel, StatePoint, StepResidualContext};
use crate::error::{Result, SimError};
use crate::grid_model::{
    effective_load, validate_partition, Disturbance, DisturbanceAction, GridModel, Partition,
};
use crate::newton::{inf_norm, NewtonConfig};
use crate::powerflow::{prepare_dynamics, PowerFlowSolution};
use crate::sim_wr::{Mode, WrConfig};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Di,
    Wr,
    Wrw,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "di" => Ok(Self::Di),
            "wr" => Ok(Self::Wr),
            "wrw" => Ok(Self::Wrw),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

/// A partition given by preset name or explicitly as lists of bus ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PartitionRef {
    Preset(String),
    Explicit(Vec<Vec<usize>>),
}

impl PartitionRef {
    pub fn resolve(&self, grid: &GridModel) -> Result<Partition> {
        let part = match self {
            Self::Preset(name) if name == "single" => Partition::single(grid),
            Self::Preset(name) if name == "per-bus" => Partition::per_bus(grid),
            Self::Preset(name) => Partition::preset(name)
                .ok_or_else(|| SimError::Config(format!("unknown partition preset '{name}'")))?,
            Self::Explicit(groups) => Partition::new(groups.clone()),
        };
        validate_partition(&part, &grid.buses).map_err(SimError::Partition)?;
        Ok(part)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    /// Step size in seconds.
    pub h: f64,
    /// Horizon T in seconds.
    #[serde(alias = "T")]
    pub horizon: f64,
    pub disturbances: Vec<Disturbance>,
    pub newton: NewtonConfig,
    pub wr: WrConfig,
    /// Window length for WRW; defaults to `h`.
    pub window: Option<f64>,
    pub method: Method,
    pub mode: Mode,
    pub partition: Option<PartitionRef>,
    /// Network JSON path; the bundled 39-bus system when absent.
    pub network: Option<String>,
    /// Override of the dataset's slack bus.
    pub slack_bus: Option<usize>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            h: 0.05,
            horizon: 20.0,
            disturbances: Vec::new(),
            newton: NewtonConfig::default(),
            wr: WrConfig::default(),
            window: None,
            method: Method::Di,
            mode: Mode::Jacobi,
            partition: None,
            network: None,
            slack_bus: None,
        }
    }
}

impl Scenario {
    /// Load at bus 29 off on [0.2, 0.4) s, load at bus 25 doubled on
    /// [7.2, 7.4) s, load at bus 23 off on [13.2, 13.4) s; 0.05 s steps
    /// over 20 s.
    pub fn reference() -> Self {
        let ev = |t_start, t_end, bus, action| Disturbance {
            t_start,
            t_end,
            bus,
            action,
        };
        Self {
            disturbances: vec![
                ev(0.2, 0.4, 29, DisturbanceAction::DisconnectLoad),
                ev(7.2, 7.4, 25, DisturbanceAction::ScaleLoad(2.0)),
                ev(13.2, 13.4, 23, DisturbanceAction::DisconnectLoad),
            ],
            partition: Some(PartitionRef::Preset("table2-3".into())),
            ..Self::default()
        }
    }

    pub fn with_horizon(&self, horizon: f64) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }

    /// Number of steps `T/h`; errors unless it is a positive integer.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.h > 0.0) {
            return Err(SimError::Config(format!("step size must be positive, got {}", self.h)));
        }
        if !(self.horizon > 0.0) {
            return Err(SimError::Config(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        steps_of(self.horizon, self.h)
            .ok_or_else(|| SimError::Config(format!("T/h not integral (T = {}, h = {})", self.horizon, self.h)))
    }

    pub fn validate(&self) -> Result<()> {
        self.n_steps()?;
        self.newton.validate().map_err(SimError::Config)?;
        self.wr.validate().map_err(SimError::Config)?;
        if self.method == Method::Wrw {
            let t_win = self.window.unwrap_or(self.h);
            crate::sim_wrw::WindowPlan::new(self.horizon, self.h, t_win)?;
        }
        for d in &self.disturbances {
            if d.t_end > self.horizon + 1e-9 {
                log::warn!(
                    "disturbance at bus {} ends at {} s, beyond the horizon {} s",
                    d.bus,
                    d.t_end,
                    self.horizon
                );
            }
        }
        Ok(())
    }

    /// Load the configured network (or the bundled system) with the slack
    /// override applied.
    pub fn load_grid(&self) -> Result<GridModel> {
        let mut grid = match &self.network {
            Some(path) => GridModel::from_path(path)?,
            None => GridModel::ne39(),
        };
        if let Some(id) = self.slack_bus {
            grid.set_slack(id)?;
        }
        Ok(grid)
    }
}

/// `round(a / b)` when `a` is that integer multiple of `b`.
pub(crate) fn steps_of(a: f64, b: f64) -> Option<usize> {
    let k = (a / b).round();
    (k >= 1.0 && (k * b - a).abs() <= 1e-9 * a.abs().max(1.0)).then_some(k as usize)
}

/// Everything a simulation method needs, computed once per scenario: the
/// initial operating point, the step equations and the effective load at
/// every grid time.
#[derive(Debug, Clone)]
pub struct PreparedCase {
    pub grid: GridModel,
    pub model: DaeModel,
    pub pf: PowerFlowSolution,
    pub init: StatePoint,
    pub h: f64,
    pub steps: usize,
    /// `loads[k]` holds the effective loads at `t = k h`.
    pub loads: Vec<Vec<(f64, f64)>>,
    pub newton: NewtonConfig,
    pub disturbances: Vec<Disturbance>,
}

impl PreparedCase {
    pub fn new(grid: &GridModel, scenario: &Scenario) -> Result<Self> {
        let steps = scenario.n_steps()?;
        scenario.newton.validate().map_err(SimError::Config)?;
        let h = scenario.h;
        let disturbances: Vec<Disturbance> = scenario
            .disturbances
            .iter()
            .map(|d| {
                if grid.bus_index(d.bus).is_none() {
                    return Err(SimError::Config(format!("disturbance at unknown bus {}", d.bus)));
                }
                let (snapped, moved) = d.snapped(h);
                if moved {
                    log::warn!(
                        "disturbance at bus {} moved from [{}, {}) to [{}, {}) to align with h = {}",
                        d.bus,
                        d.t_start,
                        d.t_end,
                        snapped.t_start,
                        snapped.t_end,
                        h
                    );
                }
                Ok(snapped)
            })
            .collect::<Result<_>>()?;
        let (grid, model, init, pf) = prepare_dynamics(grid)?;
        let loads = (0..=steps)
            .map(|k| effective_load(&grid.buses, &disturbances, k as f64 * h))
            .collect();
        Ok(Self {
            grid,
            model,
            pf,
            init,
            h,
            steps,
            loads,
            newton: scenario.newton,
            disturbances,
        })
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    /// Context for the step from grid time `k` (state `prev`) to `k + 1`.
    pub fn step_context(&self, k: usize, prev: &StatePoint) -> StepResidualContext {
        StepResidualContext::from_point(&self.model, self.h, prev, self.loads[k + 1].clone())
    }

    /// ∞-norm of the full step residual at every step of a trajectory.
    pub fn step_residual_norms(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        let states: Vec<StatePoint> = (0..traj.len()).map(|k| traj.state(k, &self.model)).collect();
        states
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let ctx = self.step_context(k, &w[0]);
                Ok(inf_norm(&self.model.residual_at(&ctx, &w[1])?))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_integral_horizon_rejected() {
        let s = Scenario {
            h: 0.3,
            horizon: 20.0,
            ..Scenario::default()
        };
        let err = s.n_steps().unwrap_err();
        assert!(err.to_string().contains("T/h not integral"));
        assert_eq!(Scenario::default().n_steps().unwrap(), 400);
        assert!(Scenario { horizon: 0.0, ..Scenario::default() }.n_steps().is_err());
    }

    #[test]
    fn scenario_json_round_trip() {
        let s = Scenario::reference();
        let text = serde_json::to_string_pretty(&s).unwrap();
        let back: Scenario = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let minimal: Scenario = serde_json::from_str(r#"{"T": 5.0, "method": "wrw"}"#).unwrap();
        assert_eq!(minimal.horizon, 5.0);
        assert_eq!(minimal.method, Method::Wrw);
        assert_eq!(minimal.h, 0.05);
    }

    #[test]
    fn partition_refs_resolve() {
        let grid = GridModel::ne39();
        let p: PartitionRef = serde_json::from_str(r#""table2-4""#).unwrap();
        assert_eq!(p.resolve(&grid).unwrap().len(), 4);
        let p: PartitionRef = serde_json::from_str("[[1,2,3],[4]]").unwrap();
        assert!(matches!(p.resolve(&grid), Err(SimError::Partition(_))));
        assert!(PartitionRef::Preset("nope".into()).resolve(&grid).is_err());
        assert_eq!(PartitionRef::Preset("per-bus".into()).resolve(&grid).unwrap().len(), 39);
    }

    #[test]
    fn prepared_case_load_schedule() {
        let grid = GridModel::ne39();
        let case = PreparedCase::new(&grid, &Scenario::reference()).unwrap();
        assert_eq!(case.loads.len(), 401);
        let base = grid.buses[28].p_load;
        assert_eq!(case.loads[3][28].0, base);
        assert_eq!(case.loads[4][28].0, 0.0);
        assert_eq!(case.loads[7][28].0, 0.0);
        assert_eq!(case.loads[8][28].0, base);
        assert_eq!(case.loads[144][24].0, 2.0 * grid.buses[24].p_load);
        assert_eq!(case.loads[148][24].0, grid.buses[24].p_load);
        assert_eq!(case.loads[264][22].0, 0.0);
    }
}
