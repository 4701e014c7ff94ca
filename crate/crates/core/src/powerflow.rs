//! Static AC power flow (polar Newton) providing the initial operating point
//! and the generators' mechanical power.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::dae_core::{DaeModel, StatePoint};
use crate::grid_model::{BusKind, GridError, GridModel};
use crate::network::{injection, injection_partials};
use crate::newton::{newton_solve, NewtonConfig, NewtonError};

pub const PF_TOL: f64 = 1e-10;
pub const PF_MAX_ITER: usize = 50;

#[derive(Debug, Error)]
pub enum PowerFlowError {
    #[error("power flow did not converge in {iterations} iterations (mismatch {residual_norm:e})")]
    NonConvergence { iterations: usize, residual_norm: f64 },
    #[error("power flow Jacobian is singular")]
    SingularJacobian,
    #[error("power flow solution is not converged")]
    NotConverged,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    /// Per bus.
    pub v: Vec<f64>,
    pub delta: Vec<f64>,
    /// Gross generation per generator, in `grid.generators` order.
    pub pe: Vec<f64>,
    pub qe: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub mismatch: f64,
}

struct PfLayout {
    /// Buses whose angle is unknown (all but slack).
    ang: Vec<usize>,
    /// Buses whose magnitude is unknown (load buses).
    mag: Vec<usize>,
    ang_pos: Vec<Option<usize>>,
    mag_pos: Vec<Option<usize>>,
}

impl PfLayout {
    fn new(grid: &GridModel) -> Self {
        let n = grid.n_bus();
        let ang: Vec<usize> = (0..n).filter(|&i| grid.buses[i].kind != BusKind::Slack).collect();
        let mag: Vec<usize> = (0..n).filter(|&i| grid.buses[i].kind == BusKind::Load).collect();
        let mut ang_pos = vec![None; n];
        let mut mag_pos = vec![None; n];
        for (k, &i) in ang.iter().enumerate() {
            ang_pos[i] = Some(k);
        }
        for (k, &i) in mag.iter().enumerate() {
            mag_pos[i] = Some(ang.len() + k);
        }
        Self {
            ang,
            mag,
            ang_pos,
            mag_pos,
        }
    }

    fn apply(&self, x: &[f64], v: &mut [f64], delta: &mut [f64]) {
        for (k, &i) in self.ang.iter().enumerate() {
            delta[i] = x[k];
        }
        for (k, &i) in self.mag.iter().enumerate() {
            v[i] = x[self.ang.len() + k];
        }
    }
}

/// Newton power flow with generator buses at `|V| = v0` and scheduled net
/// power, load buses at specified `P, Q`, and the slack at `v0∠delta0`.
pub fn solve_powerflow(
    grid: &GridModel,
    tol: f64,
    max_iter: usize,
) -> Result<PowerFlowSolution, PowerFlowError> {
    grid.validate()?;
    let y = grid.ybus()?;
    let n = grid.n_bus();
    let layout = PfLayout::new(grid);
    let mut p_spec: Vec<f64> = grid.buses.iter().map(|b| -b.p_load).collect();
    for g in &grid.generators {
        p_spec[g.bus - 1] += g.p_sched;
    }
    let q_spec: Vec<f64> = grid.buses.iter().map(|b| -b.q_load).collect();

    let base_v: Vec<f64> = grid
        .buses
        .iter()
        .map(|b| if b.kind == BusKind::Load { 1.0 } else { b.v0 })
        .collect();
    let base_delta: Vec<f64> = grid
        .buses
        .iter()
        .map(|b| if b.kind == BusKind::Slack { b.delta0 } else { 0.0 })
        .collect();

    let state = |x: &[f64]| {
        let mut v = base_v.clone();
        let mut d = base_delta.clone();
        layout.apply(x, &mut v, &mut d);
        (v, d)
    };
    let residual = |x: &[f64]| {
        let (v, d) = state(x);
        let mut r = Vec::with_capacity(x.len());
        for &i in &layout.ang {
            r.push(injection(&y, &v, &d, i).0 - p_spec[i]);
        }
        for &i in &layout.mag {
            r.push(injection(&y, &v, &d, i).1 - q_spec[i]);
        }
        r
    };
    let jacobian = |x: &[f64]| {
        let (v, d) = state(x);
        let m = x.len();
        let mut jac = DMatrix::zeros(m, m);
        let rows = layout.ang.iter().map(|&i| (i, true)).chain(layout.mag.iter().map(|&i| (i, false)));
        for (row, (i, is_p)) in rows.enumerate() {
            let part = injection_partials(&y, &v, &d, i);
            let (dd, dv) = if is_p {
                (&part.dp_ddelta, &part.dp_dv)
            } else {
                (&part.dq_ddelta, &part.dq_dv)
            };
            for j in 0..n {
                if let Some(c) = layout.ang_pos[j] {
                    jac[(row, c)] = dd[j];
                }
                if let Some(c) = layout.mag_pos[j] {
                    jac[(row, c)] = dv[j];
                }
            }
        }
        jac
    };

    let x0 = vec![0.0; layout.ang.len()]
        .into_iter()
        .chain(std::iter::repeat_n(1.0, layout.mag.len()))
        .collect::<Vec<_>>();
    let cfg = NewtonConfig {
        tol,
        max_iter,
        damping: 1.0,
    };
    let out = newton_solve(residual, jacobian, &x0, &cfg).map_err(|e| match e {
        NewtonError::NonConvergence {
            iterations,
            residual_norm,
            ..
        } => PowerFlowError::NonConvergence {
            iterations,
            residual_norm,
        },
        _ => PowerFlowError::SingularJacobian,
    })?;
    let (v, delta) = state(&out.x);
    let (pe, qe) = grid
        .generators
        .iter()
        .map(|g| {
            let b = g.bus - 1;
            let (p, q) = injection(&y, &v, &delta, b);
            (grid.buses[b].p_load + p, grid.buses[b].q_load + q)
        })
        .unzip();
    Ok(PowerFlowSolution {
        v,
        delta,
        pe,
        qe,
        converged: true,
        iterations: out.iterations,
        mismatch: out.residual_norm,
    })
}

/// Default tolerance and iteration cap.
pub fn solve_powerflow_default(grid: &GridModel) -> Result<PowerFlowSolution, PowerFlowError> {
    solve_powerflow(grid, PF_TOL, PF_MAX_ITER)
}

/// Assign `Pm := Pe(0)` to every generator and return the initial point:
/// bus values from the power flow and every speed at ω_s.
pub fn init_dynamic_state(
    grid: &mut GridModel,
    pf: &PowerFlowSolution,
) -> Result<StatePoint, PowerFlowError> {
    if !pf.converged {
        return Err(PowerFlowError::NotConverged);
    }
    for (g, &pe) in grid.generators.iter_mut().zip(&pf.pe) {
        g.p_mech = pe;
    }
    let n_dyn = grid
        .buses
        .iter()
        .filter(|b| b.kind == BusKind::Generator)
        .count();
    Ok(StatePoint {
        v: pf.v.clone(),
        delta: pf.delta.clone(),
        omega: vec![grid.omega_s(); n_dyn],
    })
}

/// Power flow, mechanical power assignment and the dynamic model in one go.
pub fn prepare_dynamics(grid: &GridModel) -> Result<(GridModel, DaeModel, StatePoint, PowerFlowSolution), PowerFlowError> {
    let pf = solve_powerflow_default(grid)?;
    let mut grid = grid.clone();
    let init = init_dynamic_state(&mut grid, &pf)?;
    let model = DaeModel::new(&grid)?;
    Ok((grid, model, init, pf))
}
