//! Direct Integration: Backward Euler with one full-system Newton solve per
//! step, warm-started from the previous step.

use std::time::Instant;

use crate::error::{Result, SimError};
use crate::grid_model::GridModel;
use crate::newton::newton_solve;
use crate::scenario::{PreparedCase, Scenario};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct DiStats {
    /// Wall-clock seconds spent in the stepping loop.
    pub total_solve_time: f64,
    pub newton_iters: Vec<usize>,
}

pub fn simulate_di(grid: &GridModel, scenario: &Scenario) -> Result<(Trajectory, DiStats)> {
    let case = PreparedCase::new(grid, scenario)?;
    simulate_di_case(&case)
}

pub fn simulate_di_case(case: &PreparedCase) -> Result<(Trajectory, DiStats)> {
    let model = &case.model;
    let mut states = Vec::with_capacity(case.steps + 1);
    states.push(case.init.clone());
    let mut newton_iters = Vec::with_capacity(case.steps);

    let clock = Instant::now();
    for k in 0..case.steps {
        let prev = &states[k];
        let ctx = case.step_context(k, prev);
        let x0 = model.pack(prev);
        model.residual_full(&ctx, &x0)?;
        let out = newton_solve(
            |x| model.residual_full(&ctx, x).expect("dimensions checked"),
            |x| model.jacobian_full(&ctx, x).expect("dimensions checked"),
            &x0,
            &case.newton,
        )
        .map_err(|source| SimError::StepFailure {
            t: case.time(k + 1),
            source,
        })?;
        newton_iters.push(out.iterations);
        states.push(model.unpack(&out.x)?);
    }
    let total_solve_time = clock.elapsed().as_secs_f64();

    Ok((
        Trajectory::from_states(case, 0, &states),
        DiStats {
            total_solve_time,
            newton_iters,
        },
    ))
}
