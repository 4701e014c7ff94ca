//! Time-indexed records of every state and algebraic variable.

use std::io::{self, Write};

use crate::dae_core::{DaeModel, StatePoint};
use crate::grid_model::BusKind;
use crate::scenario::PreparedCase;

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    /// Per generator, slack included.
    pub gen_delta: Vec<f64>,
    pub gen_omega: Vec<f64>,
    /// Per bus.
    pub v: Vec<f64>,
    pub delta: Vec<f64>,
    /// Per generator.
    pub pe: Vec<f64>,
    pub qe: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub bus_ids: Vec<usize>,
    /// Bus id of each generator.
    pub gen_buses: Vec<usize>,
    /// Dynamic-generator position of each generator; `None` at the slack.
    pub gen_dynamic: Vec<Option<usize>>,
    pub slack: usize,
    pub h: f64,
    pub records: Vec<Record>,
}

impl Trajectory {
    /// Build records for grid times `start..start + states.len()`.
    pub fn from_states(case: &PreparedCase, start: usize, states: &[StatePoint]) -> Self {
        let model = &case.model;
        let gen_dynamic: Vec<Option<usize>> = model
            .output_gen_bus
            .iter()
            .map(|&b| (0..model.index.n_dynamic_gens()).find(|&k| model.index.gen_bus(k) == b))
            .collect();
        let records = states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let k = start + i;
                let (pe, qe) = model.recover_outputs(s, &case.loads[k]);
                Record {
                    t: case.time(k),
                    gen_delta: model.output_gen_bus.iter().map(|&b| s.delta[b]).collect(),
                    gen_omega: gen_dynamic
                        .iter()
                        .map(|d| d.map_or(model.omega_s, |k| s.omega[k]))
                        .collect(),
                    v: s.v.clone(),
                    delta: s.delta.clone(),
                    pe,
                    qe,
                }
            })
            .collect();
        Self {
            bus_ids: model.bus_ids.clone(),
            gen_buses: model.output_gen_bus.iter().map(|&b| model.bus_ids[b]).collect(),
            gen_dynamic,
            slack: model.slack,
            h: case.h,
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.t)
    }

    /// The full point at record `k`.
    pub fn state(&self, k: usize, model: &DaeModel) -> StatePoint {
        let r = &self.records[k];
        let mut omega = vec![model.omega_s; model.index.n_dynamic_gens()];
        for (g, d) in self.gen_dynamic.iter().enumerate() {
            if let Some(d) = d {
                omega[*d] = r.gen_omega[g];
            }
        }
        StatePoint {
            v: r.v.clone(),
            delta: r.delta.clone(),
            omega,
        }
    }

    /// Largest absolute difference over every variable of every record.
    /// Panics if the trajectories have different shapes.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len(), "trajectory lengths differ");
        let d = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
        };
        self.records
            .iter()
            .zip(&other.records)
            .map(|(a, b)| {
                d(&a.gen_delta, &b.gen_delta)
                    .max(d(&a.gen_omega, &b.gen_omega))
                    .max(d(&a.v, &b.v))
                    .max(d(&a.delta, &b.delta))
                    .max(d(&a.pe, &b.pe))
                    .max(d(&a.qe, &b.qe))
            })
            .fold(0.0, f64::max)
    }

    /// Copy with rotor speeds divided by `omega_s`.
    pub fn with_speed_per_unit(&self, omega_s: f64) -> Self {
        let mut out = self.clone();
        for r in &mut out.records {
            for w in &mut r.gen_omega {
                *w /= omega_s;
            }
        }
        out
    }

    /// Largest deviation of any variable from its value in record 0.
    pub fn max_drift(&self) -> f64 {
        let first = Self {
            records: vec![self.records[0].clone(); self.len()],
            ..self.clone()
        };
        self.max_abs_diff(&first)
    }

    /// The generator/slack boundary values hold at every record.
    pub fn boundary_violation(&self, model: &DaeModel) -> f64 {
        let mut worst = 0.0_f64;
        for r in &self.records {
            for (b, kind) in model.kinds.iter().enumerate() {
                if *kind != BusKind::Load {
                    worst = worst.max((r.v[b] - model.v0[b]).abs());
                }
            }
            worst = worst.max((r.delta[self.slack] - model.delta0[self.slack]).abs());
        }
        worst
    }

    pub fn header(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        for id in &self.gen_buses {
            cols.push(format!("delta_gen{id}"));
            cols.push(format!("omega_gen{id}"));
        }
        for id in &self.bus_ids {
            cols.push(format!("V_{id}"));
            cols.push(format!("delta_{id}"));
        }
        for id in &self.gen_buses {
            cols.push(format!("Pe_gen{id}"));
            cols.push(format!("Qe_gen{id}"));
        }
        cols
    }

    /// CSV with one row per record, values at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.header().join(","))?;
        for r in &self.records {
            let mut row = Vec::with_capacity(1 + 4 * r.gen_delta.len() + 2 * r.v.len());
            row.push(r.t);
            for g in 0..r.gen_delta.len() {
                row.push(r.gen_delta[g]);
                row.push(r.gen_omega[g]);
            }
            for b in 0..r.v.len() {
                row.push(r.v[b]);
                row.push(r.delta[b]);
            }
            for g in 0..r.pe.len() {
                row.push(r.pe[g]);
                row.push(r.qe[g]);
            }
            let line: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}
