//! Backward Euler discretization of the classical-generator swing equations
//! coupled with the network power balance, for the full system and for a
//! single subsystem with frozen external bus values.
//!
//! Unknowns per step are the rotor angle and speed `(δ_m, ω_m)` of every
//! non-slack generator followed by `(V_r, δ_r)` of every load bus, both in
//! bus order. Generator-bus magnitudes stay at `v0`; the slack keeps
//! `v0`/`delta0`. The generator bus angle doubles as its rotor angle.
//!
//! Residual rows, in unknown order:
//!
//! ```text
//! R_δ = δ_m(t+1) − δ_m(t) − h[ω_m(t+1) − ω_s]
//! R_ω = ω_m(t+1) − ω_m(t) − (h/M_m)[Pm_m − Pe_m(t+1)],  Pe_m = P_Lm + P_m(V, δ)
//! R_P = P_Lr + P_r(V, δ)
//! R_Q = Q_Lr + Q_r(V, δ)
//! ```

use nalgebra::DMatrix;
use thiserror::Error;

use crate::grid_model::{AdmittanceMatrix, BusKind, GridError, GridModel, Partition};
use crate::network::{injection, injection_partials};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DaeError {
    #[error("dimension mismatch: expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no frozen value for external bus {0}")]
    MissingExternalValue(usize),
}

/// What a position of the flat unknown vector holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Rotor angle of dynamic generator `k` (also its bus angle).
    GenAngle(usize),
    GenSpeed(usize),
    /// Magnitude of the load bus with this bus index.
    LoadMag(usize),
    LoadAngle(usize),
}

#[derive(Debug, Clone)]
pub struct UnknownIndexMap {
    slots: Vec<Slot>,
    /// Per bus index: position of its angle in the unknown vector.
    angle_slot: Vec<Option<usize>>,
    /// Per bus index: position of its magnitude in the unknown vector.
    mag_slot: Vec<Option<usize>>,
    /// Bus index of each dynamic generator.
    gen_bus: Vec<usize>,
}

impl UnknownIndexMap {
    fn new(grid: &GridModel) -> Self {
        let n = grid.n_bus();
        let mut slots = Vec::new();
        let mut angle_slot = vec![None; n];
        let mut mag_slot = vec![None; n];
        let mut gen_bus = Vec::new();
        for (i, bus) in grid.buses.iter().enumerate() {
            if bus.kind == BusKind::Generator {
                let k = gen_bus.len();
                gen_bus.push(i);
                angle_slot[i] = Some(slots.len());
                slots.push(Slot::GenAngle(k));
                slots.push(Slot::GenSpeed(k));
            }
        }
        for (i, bus) in grid.buses.iter().enumerate() {
            if bus.kind == BusKind::Load {
                mag_slot[i] = Some(slots.len());
                slots.push(Slot::LoadMag(i));
                angle_slot[i] = Some(slots.len());
                slots.push(Slot::LoadAngle(i));
            }
        }
        Self {
            slots,
            angle_slot,
            mag_slot,
            gen_bus,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot(&self, index: usize) -> Slot {
        self.slots[index]
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn angle_slot(&self, bus: usize) -> Option<usize> {
        self.angle_slot[bus]
    }

    pub fn mag_slot(&self, bus: usize) -> Option<usize> {
        self.mag_slot[bus]
    }

    pub fn n_dynamic_gens(&self) -> usize {
        self.gen_bus.len()
    }

    pub fn gen_bus(&self, k: usize) -> usize {
        self.gen_bus[k]
    }

    /// Position of dynamic generator `k`'s speed.
    pub fn speed_slot(&self, k: usize) -> usize {
        self.angle_slot[self.gen_bus[k]].expect("generator angle slot") + 1
    }
}

/// Complete values at one time point: every bus magnitude and angle plus the
/// speed of every dynamic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePoint {
    pub v: Vec<f64>,
    pub delta: Vec<f64>,
    pub omega: Vec<f64>,
}

impl StatePoint {
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let d = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
        };
        d(&self.v, &other.v)
            .max(d(&self.delta, &other.delta))
            .max(d(&self.omega, &other.omega))
    }
}

/// Static data the step equations need: admittance, boundary constants,
/// inertia and mechanical power.
#[derive(Debug, Clone)]
pub struct DaeModel {
    pub y: AdmittanceMatrix,
    pub index: UnknownIndexMap,
    pub kinds: Vec<BusKind>,
    pub bus_ids: Vec<usize>,
    pub v0: Vec<f64>,
    pub delta0: Vec<f64>,
    pub slack: usize,
    pub omega_s: f64,
    /// Per dynamic generator.
    pub m_coeff: Vec<f64>,
    pub p_mech: Vec<f64>,
    /// Bus index of every generator in `grid.generators` order, slack included.
    pub output_gen_bus: Vec<usize>,
}

/// Previous-step states and the loads at the new time.
#[derive(Debug, Clone)]
pub struct StepResidualContext {
    pub h: f64,
    /// Rotor angles at t, per dynamic generator.
    pub prev_delta: Vec<f64>,
    pub prev_omega: Vec<f64>,
    /// Effective `(P_L, Q_L)` per bus at t+1.
    pub loads: Vec<(f64, f64)>,
}

impl StepResidualContext {
    pub fn from_point(model: &DaeModel, h: f64, prev: &StatePoint, loads: Vec<(f64, f64)>) -> Self {
        let n = model.index.n_dynamic_gens();
        Self {
            h,
            prev_delta: (0..n).map(|k| prev.delta[model.index.gen_bus(k)]).collect(),
            prev_omega: prev.omega.clone(),
            loads,
        }
    }
}

/// Buses and unknowns owned by one subsystem.
#[derive(Debug, Clone)]
pub struct SubsystemMap {
    /// Bus indices in the subsystem.
    pub buses: Vec<usize>,
    /// Global unknown positions owned, ascending.
    pub unknowns: Vec<usize>,
    /// Global unknown position → local position.
    local_of: Vec<Option<usize>>,
    /// External bus indices whose values enter this subsystem's rows.
    pub coupled_external: Vec<usize>,
}

impl SubsystemMap {
    pub fn len(&self) -> usize {
        self.unknowns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unknowns.is_empty()
    }

    pub fn local(&self, global: usize) -> Option<usize> {
        self.local_of[global]
    }

    /// Local unknown values read from a full point.
    pub fn gather(&self, model: &DaeModel, point: &StatePoint) -> Vec<f64> {
        self.unknowns.iter().map(|&u| model.read_slot(point, u)).collect()
    }

    /// Write local unknown values into a full point.
    pub fn scatter(&self, model: &DaeModel, local: &[f64], point: &mut StatePoint) {
        for (&u, &x) in self.unknowns.iter().zip(local) {
            model.write_slot(point, u, x);
        }
    }
}

impl DaeModel {
    /// Build from a grid whose generators carry their mechanical power.
    pub fn new(grid: &GridModel) -> Result<Self, GridError> {
        grid.validate()?;
        let y = grid.ybus()?;
        let index = UnknownIndexMap::new(grid);
        let omega_s = grid.omega_s();
        let gen_at = |bus: usize| {
            grid.generators
                .iter()
                .find(|g| g.bus == grid.buses[bus].id)
                .expect("generator bus has a generator")
        };
        let (m_coeff, p_mech) = (0..index.n_dynamic_gens())
            .map(|k| {
                let g = gen_at(index.gen_bus(k));
                (g.m_coeff(omega_s), g.p_mech)
            })
            .unzip();
        Ok(Self {
            y,
            kinds: grid.buses.iter().map(|b| b.kind).collect(),
            bus_ids: grid.buses.iter().map(|b| b.id).collect(),
            v0: grid.buses.iter().map(|b| b.v0).collect(),
            delta0: grid.buses.iter().map(|b| b.delta0).collect(),
            slack: grid.slack_index(),
            omega_s,
            m_coeff,
            p_mech,
            output_gen_bus: grid
                .generators
                .iter()
                .map(|g| grid.bus_index(g.bus).expect("validated"))
                .collect(),
            index,
        })
    }

    pub fn n_bus(&self) -> usize {
        self.v0.len()
    }

    pub fn n_unknowns(&self) -> usize {
        self.index.len()
    }

    /// Point with boundary values applied: load magnitudes 1, all angles at
    /// `delta0`, speeds at ω_s.
    pub fn base_point(&self) -> StatePoint {
        StatePoint {
            v: self
                .kinds
                .iter()
                .zip(&self.v0)
                .map(|(k, &v)| if *k == BusKind::Load { 1.0 } else { v })
                .collect(),
            delta: self.delta0.clone(),
            omega: vec![self.omega_s; self.index.n_dynamic_gens()],
        }
    }

    /// Reset the pinned entries of a point to their boundary values.
    pub fn pin(&self, point: &mut StatePoint) {
        for (i, k) in self.kinds.iter().enumerate() {
            if *k != BusKind::Load {
                point.v[i] = self.v0[i];
            }
        }
        point.delta[self.slack] = self.delta0[self.slack];
    }

    pub fn read_slot(&self, point: &StatePoint, u: usize) -> f64 {
        match self.index.slot(u) {
            Slot::GenAngle(k) => point.delta[self.index.gen_bus(k)],
            Slot::GenSpeed(k) => point.omega[k],
            Slot::LoadMag(b) => point.v[b],
            Slot::LoadAngle(b) => point.delta[b],
        }
    }

    pub fn write_slot(&self, point: &mut StatePoint, u: usize, x: f64) {
        match self.index.slot(u) {
            Slot::GenAngle(k) => point.delta[self.index.gen_bus(k)] = x,
            Slot::GenSpeed(k) => point.omega[k] = x,
            Slot::LoadMag(b) => point.v[b] = x,
            Slot::LoadAngle(b) => point.delta[b] = x,
        }
    }

    pub fn pack(&self, point: &StatePoint) -> Vec<f64> {
        (0..self.n_unknowns()).map(|u| self.read_slot(point, u)).collect()
    }

    pub fn unpack(&self, x: &[f64]) -> Result<StatePoint, DaeError> {
        self.check_len(x.len(), self.n_unknowns())?;
        let mut point = self.base_point();
        for (u, &val) in x.iter().enumerate() {
            self.write_slot(&mut point, u, val);
        }
        Ok(point)
    }

    fn check_len(&self, got: usize, expected: usize) -> Result<(), DaeError> {
        if got == expected {
            Ok(())
        } else {
            Err(DaeError::DimensionMismatch { expected, got })
        }
    }

    fn check_ctx(&self, ctx: &StepResidualContext) -> Result<(), DaeError> {
        let n = self.index.n_dynamic_gens();
        self.check_len(ctx.prev_delta.len(), n)?;
        self.check_len(ctx.prev_omega.len(), n)?;
        self.check_len(ctx.loads.len(), self.n_bus())
    }

    fn row(&self, ctx: &StepResidualContext, point: &StatePoint, u: usize) -> f64 {
        match self.index.slot(u) {
            Slot::GenAngle(k) => {
                let b = self.index.gen_bus(k);
                point.delta[b] - ctx.prev_delta[k] - ctx.h * (point.omega[k] - self.omega_s)
            }
            Slot::GenSpeed(k) => {
                let b = self.index.gen_bus(k);
                let (p, _) = injection(&self.y, &point.v, &point.delta, b);
                let pe = ctx.loads[b].0 + p;
                point.omega[k] - ctx.prev_omega[k]
                    - (ctx.h / self.m_coeff[k]) * (self.p_mech[k] - pe)
            }
            Slot::LoadMag(b) => ctx.loads[b].0 + injection(&self.y, &point.v, &point.delta, b).0,
            Slot::LoadAngle(b) => ctx.loads[b].1 + injection(&self.y, &point.v, &point.delta, b).1,
        }
    }

    fn rows(&self, ctx: &StepResidualContext, point: &StatePoint, rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&u| self.row(ctx, point, u)).collect()
    }

    /// Fill the Jacobian rows `rows`; `col_of` maps a global unknown to a
    /// column, or `None` when that unknown is frozen.
    fn jacobian_rows(
        &self,
        ctx: &StepResidualContext,
        point: &StatePoint,
        rows: &[usize],
        col_of: impl Fn(usize) -> Option<usize>,
        ncols: usize,
    ) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(rows.len(), ncols);
        let idx = &self.index;
        let put_bus_partials = |jac: &mut DMatrix<f64>, i: usize, scale: f64, dd: &[f64], dv: &[f64]| {
            for j in 0..self.n_bus() {
                if let Some(c) = idx.angle_slot(j).and_then(&col_of) {
                    jac[(i, c)] += scale * dd[j];
                }
                if let Some(c) = idx.mag_slot(j).and_then(&col_of) {
                    jac[(i, c)] += scale * dv[j];
                }
            }
        };
        for (i, &u) in rows.iter().enumerate() {
            match idx.slot(u) {
                Slot::GenAngle(k) => {
                    if let Some(c) = col_of(u) {
                        jac[(i, c)] = 1.0;
                    }
                    if let Some(c) = col_of(idx.speed_slot(k)) {
                        jac[(i, c)] = -ctx.h;
                    }
                }
                Slot::GenSpeed(k) => {
                    if let Some(c) = col_of(u) {
                        jac[(i, c)] = 1.0;
                    }
                    let b = idx.gen_bus(k);
                    let d = injection_partials(&self.y, &point.v, &point.delta, b);
                    put_bus_partials(&mut jac, i, ctx.h / self.m_coeff[k], &d.dp_ddelta, &d.dp_dv);
                }
                Slot::LoadMag(b) => {
                    let d = injection_partials(&self.y, &point.v, &point.delta, b);
                    put_bus_partials(&mut jac, i, 1.0, &d.dp_ddelta, &d.dp_dv);
                }
                Slot::LoadAngle(b) => {
                    let d = injection_partials(&self.y, &point.v, &point.delta, b);
                    put_bus_partials(&mut jac, i, 1.0, &d.dq_ddelta, &d.dq_dv);
                }
            }
        }
        jac
    }

    pub fn residual_full(&self, ctx: &StepResidualContext, x: &[f64]) -> Result<Vec<f64>, DaeError> {
        self.check_ctx(ctx)?;
        let point = self.unpack(x)?;
        let all: Vec<usize> = (0..self.n_unknowns()).collect();
        Ok(self.rows(ctx, &point, &all))
    }

    pub fn jacobian_full(
        &self,
        ctx: &StepResidualContext,
        x: &[f64],
    ) -> Result<DMatrix<f64>, DaeError> {
        self.check_ctx(ctx)?;
        let point = self.unpack(x)?;
        let all: Vec<usize> = (0..self.n_unknowns()).collect();
        let n = all.len();
        Ok(self.jacobian_rows(ctx, &point, &all, Some, n))
    }

    /// Full residual evaluated at a complete point.
    pub fn residual_at(&self, ctx: &StepResidualContext, point: &StatePoint) -> Result<Vec<f64>, DaeError> {
        self.residual_full(ctx, &self.pack(point))
    }

    /// Subsystem map for a list of bus ids.
    pub fn subsystem(&self, bus_ids: &[usize]) -> SubsystemMap {
        let n = self.n_bus();
        let mut inside = vec![false; n];
        let buses: Vec<usize> = bus_ids
            .iter()
            .filter_map(|id| self.bus_ids.iter().position(|b| b == id))
            .collect();
        for &b in &buses {
            inside[b] = true;
        }
        let unknowns: Vec<usize> = (0..self.n_unknowns())
            .filter(|&u| {
                let b = match self.index.slot(u) {
                    Slot::GenAngle(k) | Slot::GenSpeed(k) => self.index.gen_bus(k),
                    Slot::LoadMag(b) | Slot::LoadAngle(b) => b,
                };
                inside[b]
            })
            .collect();
        let mut local_of = vec![None; self.n_unknowns()];
        for (l, &u) in unknowns.iter().enumerate() {
            local_of[u] = Some(l);
        }
        let mut coupled = vec![false; n];
        for &b in &buses {
            for j in 0..n {
                if !inside[j] && (self.y.g[(b, j)] != 0.0 || self.y.b[(b, j)] != 0.0) {
                    coupled[j] = true;
                }
            }
        }
        SubsystemMap {
            buses,
            unknowns,
            local_of,
            coupled_external: (0..n).filter(|&j| coupled[j]).collect(),
        }
    }

    pub fn subsystems(&self, partition: &Partition) -> Vec<SubsystemMap> {
        partition
            .subsystems
            .iter()
            .map(|ids| self.subsystem(ids))
            .collect()
    }

    /// Full point assembled from frozen external values and the subsystem's
    /// own unknowns.
    fn subsystem_point(
        &self,
        sub: &SubsystemMap,
        external: &StatePoint,
        x_local: &[f64],
    ) -> Result<StatePoint, DaeError> {
        self.check_len(x_local.len(), sub.len())?;
        self.check_len(external.v.len(), self.n_bus())?;
        self.check_len(external.delta.len(), self.n_bus())?;
        self.check_len(external.omega.len(), self.index.n_dynamic_gens())?;
        for &j in &sub.coupled_external {
            if !external.v[j].is_finite() || !external.delta[j].is_finite() {
                return Err(DaeError::MissingExternalValue(self.bus_ids[j]));
            }
        }
        let mut point = external.clone();
        self.pin(&mut point);
        sub.scatter(self, x_local, &mut point);
        Ok(point)
    }

    pub fn residual_subsystem(
        &self,
        ctx: &StepResidualContext,
        sub: &SubsystemMap,
        external: &StatePoint,
        x_local: &[f64],
    ) -> Result<Vec<f64>, DaeError> {
        self.check_ctx(ctx)?;
        let point = self.subsystem_point(sub, external, x_local)?;
        Ok(self.rows(ctx, &point, &sub.unknowns))
    }

    pub fn jacobian_subsystem(
        &self,
        ctx: &StepResidualContext,
        sub: &SubsystemMap,
        external: &StatePoint,
        x_local: &[f64],
    ) -> Result<DMatrix<f64>, DaeError> {
        self.check_ctx(ctx)?;
        let point = self.subsystem_point(sub, external, x_local)?;
        Ok(self.jacobian_rows(ctx, &point, &sub.unknowns, |u| sub.local(u), sub.len()))
    }

    /// Generation `(Pe, Qe)` for every generator (slack included) from the
    /// bus values at one time point.
    pub fn recover_outputs(&self, point: &StatePoint, loads: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
        self.output_gen_bus
            .iter()
            .map(|&b| {
                let (p, q) = injection(&self.y, &point.v, &point.delta, b);
                (loads[b].0 + p, loads[b].1 + q)
            })
            .unzip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_model::{Branch, Bus, Generator};

    /// Generator bus 1 tied to slack bus 2 through a lossless line, plus a
    /// load bus 3.
    pub(crate) fn three_bus() -> GridModel {
        GridModel {
            name: "toy".into(),
            source: String::new(),
            base_mva: 100.0,
            frequency_hz: 60.0,
            buses: vec![
                Bus { id: 1, kind: BusKind::Generator, v0: 1.02, delta0: 0.0, p_load: 0.0, q_load: 0.0 },
                Bus { id: 2, kind: BusKind::Slack, v0: 1.0, delta0: 0.0, p_load: 0.0, q_load: 0.0 },
                Bus { id: 3, kind: BusKind::Load, v0: 1.0, delta0: 0.0, p_load: 0.4, q_load: 0.1 },
            ],
            branches: vec![
                Branch { from_bus: 1, to_bus: 2, r: 0.0, x: 0.2, b_charging: 0.0, tap: 1.0 },
                Branch { from_bus: 1, to_bus: 3, r: 0.0, x: 0.1, b_charging: 0.0, tap: 1.0 },
                Branch { from_bus: 2, to_bus: 3, r: 0.0, x: 0.1, b_charging: 0.0, tap: 1.0 },
            ],
            generators: vec![
                Generator { bus: 1, h_inertia: 4.0, p_sched: 0.3, p_mech: 0.3 },
                Generator { bus: 2, h_inertia: 50.0, p_sched: 0.0, p_mech: 0.0 },
            ],
        }
    }

    fn ctx_for(model: &DaeModel, point: &StatePoint, loads: Vec<(f64, f64)>) -> StepResidualContext {
        StepResidualContext::from_point(model, 0.05, point, loads)
    }

    #[test]
    fn index_map_layout() {
        let model = DaeModel::new(&three_bus()).unwrap();
        assert_eq!(model.n_unknowns(), 4);
        assert_eq!(
            model.index.slots(),
            &[Slot::GenAngle(0), Slot::GenSpeed(0), Slot::LoadMag(2), Slot::LoadAngle(2)]
        );
        assert_eq!(model.index.mag_slot(0), None);
        assert_eq!(model.index.angle_slot(1), None);
        assert_eq!(model.index.mag_slot(1), None);
    }

    #[test]
    fn ne39_index_map_is_bijective() {
        let grid = GridModel::ne39();
        let model = DaeModel::new(&grid).unwrap();
        // 9 dynamic generators, 29 load buses
        assert_eq!(model.n_unknowns(), 2 * 9 + 2 * 29);
        let mut seen = vec![false; model.n_unknowns()];
        for b in 0..39 {
            for s in [model.index.angle_slot(b), model.index.mag_slot(b)].into_iter().flatten() {
                assert!(!seen[s]);
                seen[s] = true;
            }
        }
        for k in 0..9 {
            seen[model.index.speed_slot(k)] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn zero_speed_deviation_angle_row() {
        let model = DaeModel::new(&three_bus()).unwrap();
        let mut p = model.base_point();
        let ctx = ctx_for(&model, &p, vec![(0.0, 0.0), (0.0, 0.0), (0.4, 0.1)]);
        p.delta[0] = 0.3;
        let r = model.residual_at(&ctx, &p).unwrap();
        assert_eq!(r[0], 0.3 - ctx.prev_delta[0]);
    }

    #[test]
    fn flat_lossless_point_gives_load() {
        let mut grid = three_bus();
        grid.buses[0].v0 = 1.0;
        let model = DaeModel::new(&grid).unwrap();
        let p = model.base_point();
        assert!(p.v.iter().all(|&v| v == 1.0));
        let ctx = ctx_for(&model, &p, vec![(0.0, 0.0), (0.0, 0.0), (0.4, 0.1)]);
        let r = model.residual_at(&ctx, &p).unwrap();
        assert!((r[2] - 0.4).abs() < 1e-15);
        let (pe, _) = model.recover_outputs(&p, &ctx.loads);
        assert!(pe[0].abs() < 1e-12);
    }

    #[test]
    fn generator_block_of_jacobian() {
        let model = DaeModel::new(&three_bus()).unwrap();
        let p = model.base_point();
        let ctx = ctx_for(&model, &p, vec![(0.0, 0.0), (0.0, 0.0), (0.4, 0.1)]);
        let j = model.jacobian_full(&ctx, &model.pack(&p)).unwrap();
        assert_eq!(j.nrows(), 4);
        assert_eq!(j.ncols(), 4);
        assert_eq!(j[(0, 0)], 1.0);
        assert_eq!(j[(0, 1)], -0.05);
        assert_eq!(j[(1, 1)], 1.0);
        assert_eq!(j[(0, 2)], 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let model = DaeModel::new(&three_bus()).unwrap();
        let p = model.base_point();
        let ctx = ctx_for(&model, &p, vec![(0.0, 0.0); 3]);
        assert_eq!(
            model.residual_full(&ctx, &[0.0; 3]),
            Err(DaeError::DimensionMismatch { expected: 4, got: 3 })
        );
        assert!(model.jacobian_full(&ctx, &[0.0; 5]).is_err());
    }

    #[test]
    fn missing_external_value() {
        let model = DaeModel::new(&three_bus()).unwrap();
        let sub = model.subsystem(&[3]);
        assert_eq!(sub.coupled_external, vec![0, 1]);
        let mut ext = model.base_point();
        let ctx = ctx_for(&model, &ext, vec![(0.0, 0.0); 3]);
        ext.delta[0] = f64::NAN;
        assert_eq!(
            model.residual_subsystem(&ctx, &sub, &ext, &[1.0, 0.0]),
            Err(DaeError::MissingExternalValue(1))
        );
    }

    #[test]
    fn single_subsystem_is_bit_identical() {
        let grid = GridModel::ne39();
        let model = DaeModel::new(&grid).unwrap();
        let mut p = model.base_point();
        for (i, d) in p.delta.iter_mut().enumerate() {
            if i != model.slack {
                *d = 0.01 * i as f64;
            }
        }
        let ctx = ctx_for(&model, &p, grid.base_loads());
        let x = model.pack(&p);
        let sub = model.subsystems(&Partition::single(&grid)).remove(0);
        let ext = model.base_point();
        assert_eq!(
            model.residual_full(&ctx, &x).unwrap(),
            model.residual_subsystem(&ctx, &sub, &ext, &x).unwrap()
        );
        assert_eq!(
            model.jacobian_full(&ctx, &x).unwrap(),
            model.jacobian_subsystem(&ctx, &sub, &ext, &x).unwrap()
        );
    }

    #[test]
    fn table2_3_second_subsystem_row_count() {
        let grid = GridModel::ne39();
        let model = DaeModel::new(&grid).unwrap();
        let part = Partition::preset("table2-3").unwrap();
        let subs = model.subsystems(&part);
        // SS2 = {22, 23, 35, 36}: generators at 35, 36; load buses 22, 23.
        let gens = [22usize, 23, 35, 36]
            .iter()
            .filter(|&&id| grid.buses[id - 1].kind == BusKind::Generator)
            .count();
        let loads = [22usize, 23, 35, 36]
            .iter()
            .filter(|&&id| grid.buses[id - 1].kind == BusKind::Load)
            .count();
        assert_eq!(subs[1].len(), 2 * gens + 2 * loads);
        assert_eq!(subs[1].len(), 8);
        let total: usize = subs.iter().map(|s| s.len()).sum();
        assert_eq!(total, model.n_unknowns());
    }

    #[test]
    fn isolated_island_ignores_externals() {
        let mut grid = three_bus();
        grid.buses.push(Bus { id: 4, kind: BusKind::Load, v0: 1.0, delta0: 0.0, p_load: 0.1, q_load: 0.0 });
        grid.buses.push(Bus { id: 5, kind: BusKind::Load, v0: 1.0, delta0: 0.0, p_load: 0.0, q_load: 0.0 });
        grid.branches.push(Branch { from_bus: 4, to_bus: 5, r: 0.01, x: 0.1, b_charging: 0.0, tap: 1.0 });
        let model = DaeModel::new(&grid).unwrap();
        let sub = model.subsystem(&[4, 5]);
        assert!(sub.coupled_external.is_empty());
        let a = model.base_point();
        let mut b = model.base_point();
        b.v[2] = 0.7;
        b.delta[0] = 1.3;
        let ctx = ctx_for(&model, &a, vec![(0.1, 0.0); 5]);
        let x = [1.0, 0.01, 0.98, -0.02];
        assert_eq!(
            model.residual_subsystem(&ctx, &sub, &a, &x).unwrap(),
            model.residual_subsystem(&ctx, &sub, &b, &x).unwrap()
        );
    }
}
