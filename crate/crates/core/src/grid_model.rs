//! Network description: buses, branches, generators, the bus admittance
//! matrix, bus partitions and time-dependent load disturbances.
//!
//! All electrical quantities are per-unit on the system MVA base and all
//! angles are radians.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bundled IEEE New England 39-bus dataset.
pub const NE39_JSON: &str = include_str!("../data/ne39.json");

#[derive(Debug, Error)]
pub enum GridError {
    #[error("branch {index} references unknown bus {bus}")]
    UnknownBusReference { index: usize, bus: usize },
    #[error("branch {index} ({from}-{to}) has zero series impedance")]
    ZeroImpedance { index: usize, from: usize, to: usize },
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("failed to parse network JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("failed to read network file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Generator,
    Load,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// 1-based bus number.
    pub id: usize,
    pub kind: BusKind,
    pub v0: f64,
    #[serde(default)]
    pub delta0: f64,
    #[serde(default)]
    pub p_load: f64,
    #[serde(default)]
    pub q_load: f64,
}

fn unit_tap() -> f64 {
    1.0
}

/// π-model branch with an optional off-nominal tap on the from side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from_bus: usize,
    pub to_bus: usize,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b_charging: f64,
    #[serde(default = "unit_tap")]
    pub tap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    /// Inertia constant H in seconds on the system base.
    pub h_inertia: f64,
    /// Scheduled active power used by the power flow.
    #[serde(default)]
    pub p_sched: f64,
    /// Mechanical input power, assigned from the initial operating point.
    #[serde(default)]
    pub p_mech: f64,
}

impl Generator {
    /// Swing-equation inertia coefficient M = 2H/ω_s.
    pub fn m_coeff(&self, omega_s: f64) -> f64 {
        2.0 * self.h_inertia / omega_s
    }
}

fn default_frequency() -> f64 {
    60.0
}

fn default_base() -> f64 {
    100.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridModel {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub source: String,
    #[serde(default = "default_base")]
    pub base_mva: f64,
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
}

impl GridModel {
    pub fn from_json(text: &str) -> Result<Self, GridError> {
        let mut grid: GridModel = serde_json::from_str(text)?;
        grid.buses.sort_by_key(|b| b.id);
        grid.generators.sort_by_key(|g| g.bus);
        grid.validate()?;
        Ok(grid)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, GridError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The bundled 39-bus New England system.
    pub fn ne39() -> Self {
        Self::from_json(NE39_JSON).expect("bundled dataset is valid")
    }

    /// Synchronous angular speed ω_s = 2π·f in rad/s.
    pub fn omega_s(&self) -> f64 {
        2.0 * PI * self.frequency_hz
    }

    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    /// Position of a bus id in `buses`. Ids cover 1..N, so this is `id - 1`.
    pub fn bus_index(&self, id: usize) -> Option<usize> {
        (id >= 1 && id <= self.buses.len()).then(|| id - 1)
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated grid has a slack bus")
    }

    /// Reassign the slack to another bus. The previous slack becomes a
    /// generator bus.
    pub fn set_slack(&mut self, id: usize) -> Result<(), GridError> {
        let idx = self
            .bus_index(id)
            .ok_or_else(|| GridError::Invalid(format!("slack override: unknown bus {id}")))?;
        if !self.generators.iter().any(|g| g.bus == id) {
            return Err(GridError::Invalid(format!(
                "slack override: bus {id} has no generator"
            )));
        }
        for bus in &mut self.buses {
            if bus.kind == BusKind::Slack {
                bus.kind = BusKind::Generator;
            }
        }
        self.buses[idx].kind = BusKind::Slack;
        self.validate()
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let n = self.buses.len();
        if n == 0 {
            return Err(GridError::Invalid("no buses".into()));
        }
        for (i, bus) in self.buses.iter().enumerate() {
            if bus.id != i + 1 {
                return Err(GridError::Invalid(format!(
                    "bus ids must be unique and cover 1..{n}; found {} at position {}",
                    bus.id,
                    i + 1
                )));
            }
            if !(bus.v0 > 0.0) {
                return Err(GridError::Invalid(format!("bus {} has v0 <= 0", bus.id)));
            }
        }
        let slacks = self.buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slacks != 1 {
            return Err(GridError::Invalid(format!(
                "expected exactly one slack bus, found {slacks}"
            )));
        }
        for (index, br) in self.branches.iter().enumerate() {
            for bus in [br.from_bus, br.to_bus] {
                if self.bus_index(bus).is_none() {
                    return Err(GridError::UnknownBusReference { index, bus });
                }
            }
            if br.from_bus == br.to_bus {
                return Err(GridError::Invalid(format!(
                    "branch {index} connects bus {} to itself",
                    br.from_bus
                )));
            }
            if br.r == 0.0 && br.x == 0.0 {
                return Err(GridError::ZeroImpedance {
                    index,
                    from: br.from_bus,
                    to: br.to_bus,
                });
            }
            if !(br.tap > 0.0) {
                return Err(GridError::Invalid(format!("branch {index} has tap <= 0")));
            }
        }
        let mut seen = BTreeSet::new();
        for g in &self.generators {
            let idx = self
                .bus_index(g.bus)
                .ok_or_else(|| GridError::Invalid(format!("generator at unknown bus {}", g.bus)))?;
            if self.buses[idx].kind == BusKind::Load {
                return Err(GridError::Invalid(format!(
                    "generator at bus {} which is a load bus",
                    g.bus
                )));
            }
            if !(g.h_inertia > 0.0) {
                return Err(GridError::Invalid(format!(
                    "generator at bus {} has H <= 0",
                    g.bus
                )));
            }
            if !seen.insert(g.bus) {
                return Err(GridError::Invalid(format!(
                    "more than one generator at bus {}",
                    g.bus
                )));
            }
        }
        for bus in &self.buses {
            if bus.kind != BusKind::Load && !seen.contains(&bus.id) {
                return Err(GridError::Invalid(format!(
                    "bus {} is {:?} but has no generator",
                    bus.id, bus.kind
                )));
            }
        }
        Ok(())
    }

    pub fn ybus(&self) -> Result<AdmittanceMatrix, GridError> {
        build_ybus(&self.buses, &self.branches)
    }

    /// Base (undisturbed) loads per bus.
    pub fn base_loads(&self) -> Vec<(f64, f64)> {
        self.buses.iter().map(|b| (b.p_load, b.q_load)).collect()
    }

    /// Position in `generators` of the 1-based generator number.
    pub fn generator_index(&self, number: usize) -> Option<usize> {
        (number >= 1 && number <= self.generators.len()).then(|| number - 1)
    }
}

/// Bus admittance matrix Y = G + jB.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    pub g: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl AdmittanceMatrix {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }
}

/// Assemble the bus admittance matrix from π-model branches.
pub fn build_ybus(buses: &[Bus], branches: &[Branch]) -> Result<AdmittanceMatrix, GridError> {
    let n = buses.len();
    let index_of = |id: usize| buses.iter().position(|b| b.id == id);
    let mut g = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for (index, br) in branches.iter().enumerate() {
        let f = index_of(br.from_bus).ok_or(GridError::UnknownBusReference {
            index,
            bus: br.from_bus,
        })?;
        let t = index_of(br.to_bus).ok_or(GridError::UnknownBusReference {
            index,
            bus: br.to_bus,
        })?;
        let den = br.r * br.r + br.x * br.x;
        if den == 0.0 {
            return Err(GridError::ZeroImpedance {
                index,
                from: br.from_bus,
                to: br.to_bus,
            });
        }
        let (gs, bs) = (br.r / den, -br.x / den);
        let tap = br.tap;
        let half = 0.5 * br.b_charging;

        g[(f, f)] += gs / (tap * tap);
        b[(f, f)] += bs / (tap * tap) + half;
        g[(t, t)] += gs;
        b[(t, t)] += bs + half;
        g[(f, t)] -= gs / tap;
        b[(f, t)] -= bs / tap;
        g[(t, f)] -= gs / tap;
        b[(t, f)] -= bs / tap;
    }
    Ok(AdmittanceMatrix { g, b })
}

/// Disjoint grouping of buses into subsystems.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Partition {
    pub subsystems: Vec<Vec<usize>>,
}

/// Names of the bundled partition presets.
pub const PRESET_NAMES: [&str; 6] = [
    "table2-2", "table2-3", "table2-4", "table2-5", "table2-6", "table2-7",
];

impl Partition {
    pub fn new(subsystems: Vec<Vec<usize>>) -> Self {
        Self { subsystems }
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    /// One subsystem holding every bus.
    pub fn single(grid: &GridModel) -> Self {
        Self::new(vec![grid.buses.iter().map(|b| b.id).collect()])
    }

    /// Every bus is its own subsystem.
    pub fn per_bus(grid: &GridModel) -> Self {
        Self::new(grid.buses.iter().map(|b| vec![b.id]).collect())
    }

    /// Explicit groups followed by a final group of all remaining buses in
    /// ascending order.
    pub fn with_rest(groups: &[&[usize]], n_bus: usize) -> Self {
        let used: BTreeSet<usize> = groups.iter().flat_map(|g| g.iter().copied()).collect();
        let mut subsystems: Vec<Vec<usize>> = groups.iter().map(|g| g.to_vec()).collect();
        subsystems.push((1..=n_bus).filter(|id| !used.contains(id)).collect());
        Self::new(subsystems)
    }

    /// The 39-bus partition presets `table2-2` .. `table2-7`.
    pub fn preset(name: &str) -> Option<Self> {
        let groups: &[&[usize]] = match name {
            "table2-2" => &[&[1, 2, 9, 25, 30, 37]],
            "table2-3" => &[&[1, 2, 25, 30, 37], &[22, 23, 35, 36]],
            "table2-4" => &[
                &[1, 2, 25, 30, 37, 39],
                &[19, 20, 33, 34],
                &[21, 22, 23, 24, 35, 36],
            ],
            "table2-5" => &[
                &[38, 29, 28, 26, 27, 17, 15, 14, 16, 24],
                &[39, 1, 2, 30, 25, 37],
                &[18, 3, 4, 5, 6, 7, 8, 9, 31, 11, 12, 13, 10, 32],
                &[19, 20, 33, 34],
            ],
            "table2-6" => &[
                &[38, 29, 28, 26, 27, 17],
                &[37, 25, 2, 30, 1, 39, 3, 18],
                &[4, 5, 6, 7, 8, 9, 31, 11, 12, 10, 32, 13],
                &[19, 20, 33, 34],
                &[23, 24, 36],
            ],
            "table2-7" => &[
                &[1, 2, 25, 30, 37, 39],
                &[38, 29, 28, 26, 27],
                &[36, 23, 24, 16, 21, 22, 35],
                &[19, 20, 33, 34],
                &[11, 12, 13, 10, 32],
                &[6, 31, 4, 5, 7, 8, 9],
            ],
            _ => return None,
        };
        Some(Self::with_rest(groups, 39))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionViolation {
    Empty,
    DuplicateBus(usize),
    MissingBus(usize),
    UnknownBus(usize),
}

impl fmt::Display for PartitionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "partition has no subsystems"),
            Self::DuplicateBus(b) => write!(f, "duplicate bus {b}"),
            Self::MissingBus(b) => write!(f, "missing bus {b}"),
            Self::UnknownBus(b) => write!(f, "unknown bus {b}"),
        }
    }
}

/// Check that `partition` is a disjoint cover of `buses`.
pub fn validate_partition(
    partition: &Partition,
    buses: &[Bus],
) -> Result<(), Vec<PartitionViolation>> {
    let known: BTreeSet<usize> = buses.iter().map(|b| b.id).collect();
    let mut violations = Vec::new();
    if partition.is_empty() {
        violations.push(PartitionViolation::Empty);
    }
    let mut seen = BTreeSet::new();
    let mut dup = BTreeSet::new();
    for &id in partition.subsystems.iter().flatten() {
        if !known.contains(&id) {
            violations.push(PartitionViolation::UnknownBus(id));
        } else if !seen.insert(id) && dup.insert(id) {
            violations.push(PartitionViolation::DuplicateBus(id));
        }
    }
    violations.extend(
        known
            .difference(&seen)
            .map(|&id| PartitionViolation::MissingBus(id)),
    );
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DisturbanceAction {
    DisconnectLoad,
    ScaleLoad(f64),
}

/// A load event active on the half-open interval `[t_start, t_end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DisturbanceRecord", into = "DisturbanceRecord")]
pub struct Disturbance {
    pub t_start: f64,
    pub t_end: f64,
    pub bus: usize,
    pub action: DisturbanceAction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DisturbanceRecord {
    t_start: f64,
    t_end: f64,
    bus: usize,
    action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    factor: Option<f64>,
}

impl TryFrom<DisturbanceRecord> for Disturbance {
    type Error = String;

    fn try_from(rec: DisturbanceRecord) -> Result<Self, String> {
        let action = match rec.action.as_str() {
            "disconnect" | "disconnect_load" => DisturbanceAction::DisconnectLoad,
            "scale" | "scale_load" => {
                let factor = rec
                    .factor
                    .ok_or_else(|| "scale action requires a factor".to_string())?;
                if !(factor > 0.0) {
                    return Err(format!("scale factor must be positive, got {factor}"));
                }
                DisturbanceAction::ScaleLoad(factor)
            }
            other => return Err(format!("unknown disturbance action '{other}'")),
        };
        if !(rec.t_start >= 0.0 && rec.t_start < rec.t_end) {
            return Err(format!(
                "disturbance interval [{}, {}) is empty or negative",
                rec.t_start, rec.t_end
            ));
        }
        Ok(Disturbance {
            t_start: rec.t_start,
            t_end: rec.t_end,
            bus: rec.bus,
            action,
        })
    }
}

impl From<Disturbance> for DisturbanceRecord {
    fn from(d: Disturbance) -> Self {
        let (action, factor) = match d.action {
            DisturbanceAction::DisconnectLoad => ("disconnect".to_string(), None),
            DisturbanceAction::ScaleLoad(f) => ("scale".to_string(), Some(f)),
        };
        DisturbanceRecord {
            t_start: d.t_start,
            t_end: d.t_end,
            bus: d.bus,
            action,
            factor,
        }
    }
}

/// Slack used when comparing event times against grid times.
const TIME_EPS: f64 = 1e-9;

impl Disturbance {
    pub fn is_active(&self, t: f64) -> bool {
        t >= self.t_start - TIME_EPS && t < self.t_end - TIME_EPS
    }

    /// Move both interval ends onto the nearest multiple of `h`. Returns the
    /// snapped event and whether anything moved.
    pub fn snapped(&self, h: f64) -> (Self, bool) {
        let snap = |t: f64| (t / h).round() * h;
        let (s, e) = (snap(self.t_start), snap(self.t_end));
        let moved = (s - self.t_start).abs() > TIME_EPS || (e - self.t_end).abs() > TIME_EPS;
        (
            Self {
                t_start: s,
                t_end: e,
                ..self.clone()
            },
            moved,
        )
    }
}

/// Per-bus `(p_load, q_load)` with every disturbance active at `t` applied.
pub fn effective_load(buses: &[Bus], disturbances: &[Disturbance], t: f64) -> Vec<(f64, f64)> {
    let mut loads: Vec<(f64, f64)> = buses.iter().map(|b| (b.p_load, b.q_load)).collect();
    for d in disturbances.iter().filter(|d| d.is_active(t)) {
        if let Some(i) = buses.iter().position(|b| b.id == d.bus) {
            let factor = match d.action {
                DisturbanceAction::DisconnectLoad => 0.0,
                DisturbanceAction::ScaleLoad(f) => f,
            };
            loads[i].0 *= factor;
            loads[i].1 *= factor;
        }
    }
    loads
}
