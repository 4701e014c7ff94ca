//! Waveform relaxation over a time interval.
//!
//! Every subsystem is integrated over the whole interval by Backward Euler
//! with the external bus values frozen to a previous waveform iterate:
//!
//! * Gauss-Jacobi: externals come from iterate `k−1` for every subsystem, so
//!   the subsystem sweeps of one iteration are independent and run
//!   concurrently.
//! * Gauss-Seidel: subsystems are swept in partition order and each one reads
//!   the newest values, iterate `k` for the ones already swept.
//!
//! Iteration stops once the ∞-norm of the change between consecutive
//! iterates, over every unknown at every time point, drops to `eps`.
//! The initial iterate is the constant extension of the initial values.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dae_core::{DaeModel, StatePoint, SubsystemMap};
use crate::error::{Result, SimError};
use crate::grid_model::{validate_partition, GridModel, Partition};
use crate::newton::newton_solve;
use crate::scenario::{PreparedCase, Scenario};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Jacobi,
    Seidel,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "jacobi" => Ok(Self::Jacobi),
            "seidel" => Ok(Self::Seidel),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WrConfig {
    /// Convergence threshold on the waveform change (∞-norm, absolute).
    pub eps: f64,
    pub k_max: usize,
    /// Jacobi worker threads; one per subsystem (up to the core count)
    /// when unset.
    pub workers: Option<usize>,
}

impl Default for WrConfig {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            k_max: 200,
            workers: None,
        }
    }
}

impl WrConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.eps > 0.0) {
            return Err(format!("eps must be positive, got {}", self.eps));
        }
        if self.k_max < 1 {
            return Err("k_max must be at least 1".into());
        }
        if self.workers == Some(0) {
            return Err("workers must be at least 1".into());
        }
        Ok(())
    }
}

/// Values of each subsystem's own unknowns at every time point of the
/// active interval, for iterate `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSet {
    pub k: usize,
    /// `waveforms[i][t]` is subsystem `i`'s unknown vector at time point `t`.
    pub waveforms: Vec<Vec<Vec<f64>>>,
}

impl WaveformSet {
    pub fn from_states(model: &DaeModel, subs: &[SubsystemMap], states: &[StatePoint], k: usize) -> Self {
        Self {
            k,
            waveforms: subs
                .iter()
                .map(|s| states.iter().map(|p| s.gather(model, p)).collect())
                .collect(),
        }
    }

    pub fn n_times(&self) -> usize {
        self.waveforms.first().map_or(0, Vec::len)
    }
}

/// ∞-norm of `next − prev` over all subsystems, variables and time points.
pub fn waveform_delta(prev: &WaveformSet, next: &WaveformSet) -> Result<f64> {
    if prev.waveforms.len() != next.waveforms.len() {
        return Err(SimError::GridMismatch(format!(
            "{} vs {} subsystems",
            prev.waveforms.len(),
            next.waveforms.len()
        )));
    }
    let mut worst = 0.0_f64;
    for (i, (a, b)) in prev.waveforms.iter().zip(&next.waveforms).enumerate() {
        if a.len() != b.len() {
            return Err(SimError::GridMismatch(format!(
                "subsystem {i}: {} vs {} time points",
                a.len(),
                b.len()
            )));
        }
        for (x, y) in a.iter().zip(b) {
            if x.len() != y.len() {
                return Err(SimError::GridMismatch(format!(
                    "subsystem {i}: {} vs {} unknowns",
                    x.len(),
                    y.len()
                )));
            }
            for (u, w) in x.iter().zip(y) {
                worst = worst.max((u - w).abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WrStats {
    pub iterations: usize,
    /// `subsystem_times[k][i]`: seconds subsystem `i` took in iteration `k`.
    pub subsystem_times: Vec<Vec<f64>>,
    /// Waveform change after each iteration.
    pub deltas: Vec<f64>,
    /// Σ_k max_i subsystem_times[k][i].
    pub parallel_time: f64,
    pub converged: bool,
    pub newton_iters: usize,
}

impl WrStats {
    pub fn row_max_sum(times: &[Vec<f64>]) -> f64 {
        times
            .iter()
            .map(|row| row.iter().copied().fold(0.0, f64::max))
            .sum()
    }

    pub fn total_time(&self) -> f64 {
        self.subsystem_times.iter().flatten().sum()
    }
}

pub fn simulate_wr(
    grid: &GridModel,
    scenario: &Scenario,
    partition: &Partition,
    mode: Mode,
    cfg: &WrConfig,
) -> Result<(Trajectory, WrStats)> {
    let case = PreparedCase::new(grid, scenario)?;
    simulate_wr_case(&case, partition, mode, cfg)
}

pub fn simulate_wr_case(
    case: &PreparedCase,
    partition: &Partition,
    mode: Mode,
    cfg: &WrConfig,
) -> Result<(Trajectory, WrStats)> {
    let relax = Relaxation::new(case, partition, mode, cfg)?;
    let (states, stats) = relax.run_window(0, case.steps, &case.init)?;
    Ok((Trajectory::from_states(case, 0, &states), stats))
}

/// Waveform relaxation set up for one case and partition, reusable across
/// windows.
pub(crate) struct Relaxation<'a> {
    case: &'a PreparedCase,
    subs: Vec<SubsystemMap>,
    mode: Mode,
    cfg: WrConfig,
    pool: Option<rayon::ThreadPool>,
}

struct Sweep {
    waveform: Vec<Vec<f64>>,
    seconds: f64,
    newton_iters: usize,
}

impl<'a> Relaxation<'a> {
    pub(crate) fn new(
        case: &'a PreparedCase,
        partition: &Partition,
        mode: Mode,
        cfg: &WrConfig,
    ) -> Result<Self> {
        cfg.validate().map_err(SimError::Config)?;
        validate_partition(partition, &case.grid.buses).map_err(SimError::Partition)?;
        let subs = case.model.subsystems(partition);
        let p = subs.len();
        let workers = cfg.workers.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map_or(1, |n| n.get())
                .min(p)
        });
        let pool = if mode == Mode::Jacobi && workers > 1 && p > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| SimError::Config(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            case,
            subs,
            mode,
            cfg: *cfg,
            pool,
        })
    }

    /// Relax the interval of `len` steps starting at grid time `start` from
    /// the initial values `init`. Returns the `len + 1` converged points.
    pub(crate) fn run_window(
        &self,
        start: usize,
        len: usize,
        init: &StatePoint,
    ) -> Result<(Vec<StatePoint>, WrStats)> {
        let model = &self.case.model;
        let mut prev = vec![init.clone(); len + 1];
        let mut prev_set = WaveformSet::from_states(model, &self.subs, &prev, 0);
        let mut stats = WrStats::default();
        let mut delta = f64::INFINITY;

        for k in 1..=self.cfg.k_max {
            let mut times = vec![0.0; self.subs.len()];
            let next = match self.mode {
                Mode::Jacobi => {
                    let sweeps: Vec<Result<Sweep>> = match &self.pool {
                        Some(pool) => pool.install(|| {
                            (0..self.subs.len())
                                .into_par_iter()
                                .map(|i| self.sweep(i, start, len, init, &prev))
                                .collect()
                        }),
                        None => (0..self.subs.len())
                            .map(|i| self.sweep(i, start, len, init, &prev))
                            .collect(),
                    };
                    let mut next = prev.clone();
                    for (i, sweep) in sweeps.into_iter().enumerate() {
                        let sweep = sweep?;
                        self.write_waveform(i, &sweep.waveform, &mut next);
                        times[i] = sweep.seconds;
                        stats.newton_iters += sweep.newton_iters;
                    }
                    next
                }
                Mode::Seidel => {
                    let mut latest = prev.clone();
                    for (i, time) in times.iter_mut().enumerate() {
                        let sweep = self.sweep(i, start, len, init, &latest)?;
                        self.write_waveform(i, &sweep.waveform, &mut latest);
                        *time = sweep.seconds;
                        stats.newton_iters += sweep.newton_iters;
                    }
                    latest
                }
            };
            let set = WaveformSet::from_states(model, &self.subs, &next, k);
            delta = waveform_delta(&prev_set, &set)?;
            stats.iterations = k;
            stats.deltas.push(delta);
            log::debug!("wr iteration {k}: delta {delta:e}");
            stats.subsystem_times.push(times);
            prev = next;
            prev_set = set;
            if delta <= self.cfg.eps {
                stats.converged = true;
                stats.parallel_time = WrStats::row_max_sum(&stats.subsystem_times);
                return Ok((prev, stats));
            }
        }
        Err(SimError::WrDivergence {
            iterations: self.cfg.k_max,
            delta,
        })
    }

    /// Scatter a subsystem waveform into the full points; time point 0 is the
    /// prescribed initial value and is never overwritten.
    fn write_waveform(&self, i: usize, waveform: &[Vec<f64>], states: &mut [StatePoint]) {
        let model = &self.case.model;
        for (t, x) in waveform.iter().enumerate().skip(1) {
            self.subs[i].scatter(model, x, &mut states[t]);
        }
    }

    /// Integrate subsystem `i` over the interval with externals from `source`.
    fn sweep(
        &self,
        i: usize,
        start: usize,
        len: usize,
        init: &StatePoint,
        source: &[StatePoint],
    ) -> Result<Sweep> {
        let case = self.case;
        let model = &case.model;
        let sub = &self.subs[i];
        let clock = Instant::now();
        let mut cur = sub.gather(model, init);
        let mut waveform = Vec::with_capacity(len + 1);
        waveform.push(cur.clone());
        let mut newton_iters = 0;
        if sub.is_empty() {
            waveform.resize(len + 1, Vec::new());
        } else {
            let mut prev_pt = init.clone();
            for t in 0..len {
                let k = start + t;
                let ctx = case.step_context(k, &prev_pt);
                let ext = &source[t + 1];
                if t == 0 {
                    model.residual_subsystem(&ctx, sub, ext, &cur)?;
                }
                let out = newton_solve(
                    |x| model.residual_subsystem(&ctx, sub, ext, x).expect("inputs checked"),
                    |x| model.jacobian_subsystem(&ctx, sub, ext, x).expect("inputs checked"),
                    &cur,
                    &case.newton,
                )
                .map_err(|source| SimError::StepFailure {
                    t: case.time(k + 1),
                    source,
                })?;
                newton_iters += out.iterations;
                cur = out.x;
                sub.scatter(model, &cur, &mut prev_pt);
                waveform.push(cur.clone());
            }
        }
        Ok(Sweep {
            waveform,
            seconds: clock.elapsed().as_secs_f64(),
            newton_iters,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(vals: Vec<Vec<Vec<f64>>>) -> WaveformSet {
        WaveformSet { k: 0, waveforms: vals }
    }

    #[test]
    fn delta_of_identical_sets_is_zero() {
        let a = set(vec![vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![vec![5.0], vec![6.0]]]);
        assert_eq!(waveform_delta(&a, &a.clone()).unwrap(), 0.0);
        let mut b = a.clone();
        b.waveforms[1][1][0] += 0.5;
        assert_eq!(waveform_delta(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn delta_grid_mismatch() {
        let a = set(vec![vec![vec![1.0], vec![2.0]]]);
        let b = set(vec![vec![vec![1.0]]]);
        assert!(matches!(waveform_delta(&a, &b), Err(SimError::GridMismatch(_))));
        let c = set(vec![]);
        assert!(waveform_delta(&a, &c).is_err());
    }

    #[test]
    fn row_max_sum() {
        let t = vec![vec![1.0, 3.0], vec![2.0, 0.5]];
        assert_eq!(WrStats::row_max_sum(&t), 5.0);
    }

    #[test]
    fn config_validation() {
        assert!(WrConfig::default().validate().is_ok());
        assert!(WrConfig { eps: 0.0, ..Default::default() }.validate().is_err());
        assert!(WrConfig { k_max: 0, ..Default::default() }.validate().is_err());
        assert!(WrConfig { workers: Some(0), ..Default::default() }.validate().is_err());
    }
}
