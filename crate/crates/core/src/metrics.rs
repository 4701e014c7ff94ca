//! Error statistics between trajectories.

use std::fmt;

use thiserror::Error;

use crate::trajectory::{Record, Trajectory};

/// Reference values with smaller magnitude are left out of percent errors.
pub const NEAR_ZERO_REF: f64 = 1e-9;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MetricsError {
    #[error("time grids differ: {0}")]
    GridMismatch(String),
    #[error("every sample of {0} has a near-zero reference value")]
    AllSamplesExcluded(String),
    #[error("unknown generator {0}")]
    UnknownGenerator(usize),
    #[error("unknown bus {0}")]
    UnknownBus(usize),
}

/// A scalar variable of a trajectory. Generators are numbered from 1 in
/// dataset order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    RotorAngle(usize),
    RotorSpeed(usize),
    ActivePower(usize),
    ReactivePower(usize),
    BusVoltage(usize),
    BusAngle(usize),
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RotorAngle(g) => write!(f, "delta_{g}"),
            Self::RotorSpeed(g) => write!(f, "omega_{g}"),
            Self::ActivePower(g) => write!(f, "Pe_{g}"),
            Self::ReactivePower(g) => write!(f, "Qe_{g}"),
            Self::BusVoltage(b) => write!(f, "V_{b}"),
            Self::BusAngle(b) => write!(f, "theta_{b}"),
        }
    }
}

impl Variable {
    /// δ, ω and Pe of each listed generator, grouped by quantity.
    pub fn generator_set(gens: &[usize]) -> Vec<Self> {
        let mut out: Vec<Self> = gens.iter().map(|&g| Self::RotorAngle(g)).collect();
        out.extend(gens.iter().map(|&g| Self::RotorSpeed(g)));
        out.extend(gens.iter().map(|&g| Self::ActivePower(g)));
        out
    }

    fn column(&self, traj: &Trajectory) -> Result<usize, MetricsError> {
        match *self {
            Self::RotorAngle(g) | Self::RotorSpeed(g) | Self::ActivePower(g) | Self::ReactivePower(g) => {
                (g >= 1 && g <= traj.gen_buses.len())
                    .then(|| g - 1)
                    .ok_or(MetricsError::UnknownGenerator(g))
            }
            Self::BusVoltage(b) | Self::BusAngle(b) => traj
                .bus_ids
                .iter()
                .position(|&id| id == b)
                .ok_or(MetricsError::UnknownBus(b)),
        }
    }

    fn read(&self, r: &Record, col: usize) -> f64 {
        match self {
            Self::RotorAngle(_) => r.gen_delta[col],
            Self::RotorSpeed(_) => r.gen_omega[col],
            Self::ActivePower(_) => r.pe[col],
            Self::ReactivePower(_) => r.qe[col],
            Self::BusVoltage(_) => r.v[col],
            Self::BusAngle(_) => r.delta[col],
        }
    }

    pub fn series(&self, traj: &Trajectory) -> Result<Vec<f64>, MetricsError> {
        let col = self.column(traj)?;
        Ok(traj.records.iter().map(|r| self.read(r, col)).collect())
    }
}

/// Rotor angle of generator `gen` relative to the constant slack angle.
pub fn relative_rotor_angle(traj: &Trajectory, gen: usize) -> Result<Vec<f64>, MetricsError> {
    let angles = Variable::RotorAngle(gen).series(traj)?;
    Ok(traj
        .records
        .iter()
        .zip(angles)
        .map(|(r, d)| d - r.delta[traj.slack])
        .collect())
}

fn check_grids(a: &Trajectory, b: &Trajectory) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::GridMismatch(format!("{} vs {} records", a.len(), b.len())));
    }
    if let Some((x, y)) = a.times().zip(b.times()).find(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(MetricsError::GridMismatch(format!("t = {x} vs t = {y}")));
    }
    Ok(())
}

/// |test(t) − ref(t)| at every time point.
pub fn absolute_error_series(
    reference: &Trajectory,
    test: &Trajectory,
    var: Variable,
) -> Result<Vec<f64>, MetricsError> {
    check_grids(reference, test)?;
    let a = var.series(reference)?;
    let b = var.series(test)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (y - x).abs()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableError {
    pub variable: Variable,
    pub min: f64,
    pub max: f64,
    pub average: f64,
    pub included: usize,
    pub excluded: usize,
    pub max_abs: f64,
    pub abs_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<VariableError>,
}

impl ErrorReport {
    pub fn get(&self, var: Variable) -> Option<&VariableError> {
        self.rows.iter().find(|r| r.variable == var)
    }
}

/// Signed percent error `100 (test − ref) / ref` per time point, summarised
/// as min, max and average over samples whose reference is not near zero.
pub fn percent_error_stats(
    reference: &Trajectory,
    test: &Trajectory,
    vars: &[Variable],
) -> Result<ErrorReport, MetricsError> {
    check_grids(reference, test)?;
    let rows = vars
        .iter()
        .map(|&var| {
            let a = var.series(reference)?;
            let b = var.series(test)?;
            let pct: Vec<f64> = a
                .iter()
                .zip(&b)
                .filter(|(r, _)| r.abs() >= NEAR_ZERO_REF)
                .map(|(r, t)| 100.0 * (t - r) / r)
                .collect();
            if pct.is_empty() {
                return Err(MetricsError::AllSamplesExcluded(var.to_string()));
            }
            let abs_error: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (y - x).abs()).collect();
            Ok(VariableError {
                variable: var,
                min: pct.iter().copied().fold(f64::INFINITY, f64::min),
                max: pct.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                average: pct.iter().sum::<f64>() / pct.len() as f64,
                included: pct.len(),
                excluded: a.len() - pct.len(),
                max_abs: abs_error.iter().copied().fold(0.0, f64::max),
                abs_error,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(ErrorReport { rows })
}

/// Percent-error table: one row per variable, min/max/average columns for
/// each named method. Every report must cover the same variables.
pub fn render_error_table(methods: &[(&str, &ErrorReport)]) -> String {
    let mut out = String::from("variable");
    for (name, _) in methods {
        out.push_str(&format!(",{name}_min,{name}_max,{name}_average"));
    }
    out.push('\n');
    let Some((_, first)) = methods.first() else {
        return out;
    };
    for (i, row) in first.rows.iter().enumerate() {
        out.push_str(&row.variable.to_string());
        for (_, rep) in methods {
            let r = &rep.rows[i];
            out.push_str(&format!(",{:.6e},{:.6e},{:.6e}", r.min, r.max, r.average));
        }
        out.push('\n');
    }
    out
}
