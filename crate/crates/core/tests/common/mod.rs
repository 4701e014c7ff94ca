#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use wrpower::dae_core::Slot;
use wrpower::grid_model::{Branch, Bus, BusKind, Generator};
use wrpower::newton::NewtonConfig;
use wrpower::powerflow::PowerFlowSolution;
use wrpower::sim_di::simulate_di_case;
use wrpower::{DaeModel, Disturbance, DisturbanceAction, GridModel, PreparedCase, Scenario, StatePoint};

pub fn bus(id: usize, kind: BusKind, v0: f64, p_load: f64, q_load: f64) -> Bus {
    Bus {
        id,
        kind,
        v0,
        delta0: 0.0,
        p_load,
        q_load,
    }
}

pub fn line(from_bus: usize, to_bus: usize, r: f64, x: f64) -> Branch {
    Branch {
        from_bus,
        to_bus,
        r,
        x,
        b_charging: 0.0,
        tap: 1.0,
    }
}

pub fn generator(bus: usize, h_inertia: f64, p_sched: f64) -> Generator {
    Generator {
        bus,
        h_inertia,
        p_sched,
        p_mech: 0.0,
    }
}

pub fn grid(buses: Vec<Bus>, branches: Vec<Branch>, generators: Vec<Generator>) -> GridModel {
    GridModel {
        name: "test".into(),
        source: String::new(),
        base_mva: 100.0,
        frequency_hz: 60.0,
        buses,
        branches,
        generators,
    }
}

/// Single machine on bus 2 behind a lossless reactance `x` to the slack on
/// bus 1, with a local load on the machine bus.
pub fn smib(x: f64, h_inertia: f64, p_load: f64) -> GridModel {
    grid(
        vec![
            bus(1, BusKind::Slack, 1.0, 0.0, 0.0),
            bus(2, BusKind::Generator, 1.0, p_load, 0.0),
        ],
        vec![line(1, 2, 0.0, x)],
        vec![generator(1, 500.0, 0.0), generator(2, h_inertia, 1.0 + p_load)],
    )
}

/// Two electrically separate islands: {1, 2, 3} with the slack and a
/// generator, and {4, 5} with a generator feeding a load bus.
pub fn two_islands() -> GridModel {
    grid(
        vec![
            bus(1, BusKind::Slack, 1.0, 0.0, 0.0),
            bus(2, BusKind::Generator, 1.02, 0.0, 0.0),
            bus(3, BusKind::Load, 1.0, 0.8, 0.2),
            bus(4, BusKind::Generator, 1.01, 0.0, 0.0),
            bus(5, BusKind::Load, 1.0, 0.5, 0.1),
        ],
        vec![
            line(1, 2, 0.01, 0.1),
            line(2, 3, 0.01, 0.12),
            line(1, 3, 0.02, 0.2),
            line(4, 5, 0.01, 0.1),
        ],
        vec![
            generator(1, 50.0, 0.0),
            generator(2, 5.0, 0.5),
            generator(4, 4.0, 0.5),
        ],
    )
}

/// A prepared case built without a power flow: the initial point is the
/// model's base point, so the dynamics start away from equilibrium. Island
/// networks without a slack of their own need this.
pub fn manual_case(grid: &GridModel, h: f64, steps: usize, disturbances: Vec<Disturbance>) -> PreparedCase {
    let mut grid = grid.clone();
    for g in &mut grid.generators {
        g.p_mech = g.p_sched;
    }
    let model = DaeModel::new(&grid).unwrap();
    let init = model.base_point();
    let loads = (0..=steps)
        .map(|k| wrpower::grid_model::effective_load(&grid.buses, &disturbances, k as f64 * h))
        .collect();
    PreparedCase {
        pf: PowerFlowSolution {
            v: init.v.clone(),
            delta: init.delta.clone(),
            pe: vec![0.0; grid.generators.len()],
            qe: vec![0.0; grid.generators.len()],
            converged: false,
            iterations: 0,
            mismatch: f64::NAN,
        },
        grid,
        model,
        init,
        h,
        steps,
        loads,
        newton: NewtonConfig::default(),
        disturbances,
    }
}

pub fn disconnect(bus: usize, t_start: f64, t_end: f64) -> Disturbance {
    Disturbance {
        t_start,
        t_end,
        bus,
        action: DisturbanceAction::DisconnectLoad,
    }
}

pub fn reference_case(horizon: f64) -> PreparedCase {
    PreparedCase::new(&GridModel::ne39(), &Scenario::reference().with_horizon(horizon)).unwrap()
}

pub fn quiet_case(horizon: f64) -> PreparedCase {
    let scenario = Scenario {
        horizon,
        ..Scenario::default()
    };
    PreparedCase::new(&GridModel::ne39(), &scenario).unwrap()
}

/// Central-difference Jacobian of `f` at `x`.
pub fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], step: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut hi = x.to_vec();
        let mut lo = x.to_vec();
        hi[j] += step;
        lo[j] -= step;
        let (a, b) = (f(&hi), f(&lo));
        cols.push(a.iter().zip(&b).map(|(p, m)| (p - m) / (2.0 * step)).collect::<Vec<_>>());
    }
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

/// Largest entrywise discrepancy relative to max(1, |analytic|).
pub fn worst_relative(analytic: &nalgebra::DMatrix<f64>, fd: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0_f64;
    for (i, row) in fd.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let a = analytic[(i, j)];
            worst = worst.max((a - v).abs() / a.abs().max(1.0));
        }
    }
    worst
}

pub fn random_point(model: &DaeModel, base: &StatePoint, rng: &mut StdRng) -> StatePoint {
    let mut p = base.clone();
    for u in 0..model.n_unknowns() {
        let x = model.read_slot(&p, u);
        let dx = match model.index.slot(u) {
            Slot::GenAngle(_) | Slot::LoadAngle(_) => rng.gen_range(-0.2..0.2),
            Slot::GenSpeed(_) => rng.gen_range(-2.0..2.0),
            Slot::LoadMag(_) => rng.gen_range(-0.05..0.05),
        };
        model.write_slot(&mut p, u, x + dx);
    }
    p
}

pub const SMIB_X: f64 = 0.5;
pub const SMIB_H: f64 = 50.0;
pub const SMIB_LOAD: f64 = 0.2;

pub fn smib_case(h: f64, horizon: f64) -> PreparedCase {
    let scenario = Scenario {
        h,
        horizon,
        disturbances: vec![disconnect(2, 0.2, 0.4)],
        ..Scenario::default()
    };
    PreparedCase::new(&smib(SMIB_X, SMIB_H, SMIB_LOAD), &scenario).unwrap()
}


/// Worst relative Jacobian discrepancy of the 39-bus step equations over
/// `points` random points around the initial operating point.
pub fn full_jacobian_discrepancy(points: usize, seed: u64) -> f64 {
    let case = reference_case(1.0);
    let model = &case.model;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for k in 0..points {
        let prev = random_point(model, &case.init, &mut rng);
        let point = random_point(model, &prev, &mut rng);
        let ctx = case.step_context(k % case.steps, &prev);
        let x = model.pack(&point);
        let analytic = model.jacobian_full(&ctx, &x).unwrap();
        let fd = fd_jacobian(|y| model.residual_full(&ctx, y).unwrap(), &x, 1e-6);
        worst = worst.max(worst_relative(&analytic, &fd));
    }
    worst
}

/// Ratio of successive step-halving differences of the single-machine rotor
/// angle for h = 0.02, 0.01, 0.005.
pub fn backward_euler_order_factor() -> f64 {
    let runs: Vec<Vec<f64>> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&h| {
            let (traj, _) = simulate_di_case(&smib_case(h, 2.0)).unwrap();
            traj.records.iter().map(|r| r.delta[1]).collect()
        })
        .collect();
    let gap = |coarse: &[f64], fine: &[f64]| {
        coarse
            .iter()
            .enumerate()
            .map(|(k, c)| (c - fine[2 * k]).abs())
            .fold(0.0, f64::max)
    };
    gap(&runs[0], &runs[1]) / gap(&runs[1], &runs[2])
}
