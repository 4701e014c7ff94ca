use proptest::prelude::*;
use wrpower::grid_model::{effective_load, validate_partition, PartitionViolation};
use wrpower::sim_wr::{waveform_delta, WaveformSet};
use wrpower::{
    DaeModel, Disturbance, DisturbanceAction, GridModel, PreparedCase, Scenario, StatePoint, WindowPlan,
};

fn case() -> PreparedCase {
    PreparedCase::new(&GridModel::ne39(), &Scenario::default().with_horizon(0.05)).unwrap()
}

/// Assign each of the 39 buses a group label and drop empty groups.
fn partition_from_labels(labels: &[usize]) -> Vec<Vec<usize>> {
    let p = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut groups = vec![Vec::new(); p];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i + 1);
    }
    groups.retain(|g| !g.is_empty());
    groups
}

fn perturbed(model: &DaeModel, base: &StatePoint, offsets: &[f64]) -> StatePoint {
    let mut p = base.clone();
    for (u, dx) in offsets.iter().enumerate().take(model.n_unknowns()) {
        let x = model.read_slot(&p, u);
        model.write_slot(&mut p, u, x + dx);
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn subsystem_rows_are_a_permutation_of_the_full_residual(
        labels in prop::collection::vec(0usize..6, 39),
        offsets in prop::collection::vec(-0.1f64..0.1, 76),
    ) {
        let case = case();
        let model = &case.model;
        let point = perturbed(model, &case.init, &offsets);
        let ctx = case.step_context(0, &case.init);
        let full = model.residual_at(&ctx, &point).unwrap();
        let part = wrpower::Partition::new(partition_from_labels(&labels));
        let mut seen = vec![false; full.len()];
        for sub in model.subsystems(&part) {
            let local = model.residual_subsystem(&ctx, &sub, &point, &sub.gather(model, &point)).unwrap();
            for (row, &u) in sub.unknowns.iter().enumerate() {
                prop_assert_eq!(local[row], full[u]);
                prop_assert!(!seen[u]);
                seen[u] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn any_labelled_cover_is_a_valid_partition(labels in prop::collection::vec(0usize..8, 39), drop in 0usize..39) {
        let grid = GridModel::ne39();
        let groups = partition_from_labels(&labels);
        prop_assert!(validate_partition(&wrpower::Partition::new(groups.clone()), &grid.buses).is_ok());
        let mut broken = groups;
        let removed = drop + 1;
        for g in &mut broken {
            g.retain(|&b| b != removed);
        }
        broken.retain(|g| !g.is_empty());
        let err = validate_partition(&wrpower::Partition::new(broken), &grid.buses).unwrap_err();
        prop_assert_eq!(err, vec![PartitionViolation::MissingBus(removed)]);
    }

    #[test]
    fn loads_are_nominal_outside_disturbances(
        t in 0.0f64..20.0,
        start in 0usize..380,
        len in 1usize..20,
        bus in 1usize..40,
        factor in 0.0f64..3.0,
    ) {
        let grid = GridModel::ne39();
        let d = Disturbance {
            t_start: start as f64 * 0.05,
            t_end: (start + len) as f64 * 0.05,
            bus,
            action: DisturbanceAction::ScaleLoad(factor),
        };
        let loads = effective_load(&grid.buses, std::slice::from_ref(&d), t);
        if !d.is_active(t) {
            prop_assert_eq!(loads, grid.base_loads());
        } else {
            let b = &grid.buses[bus - 1];
            prop_assert_eq!(loads[bus - 1], (factor * b.p_load, factor * b.q_load));
        }
    }

    #[test]
    fn waveform_delta_is_a_metric(
        a in prop::collection::vec(-5.0f64..5.0, 12),
        b in prop::collection::vec(-5.0f64..5.0, 12),
    ) {
        let set = |v: &[f64]| WaveformSet { k: 0, waveforms: vec![v[..6].chunks(2).map(<[f64]>::to_vec).collect(), v[6..].chunks(3).map(<[f64]>::to_vec).collect()] };
        let (x, y) = (set(&a), set(&b));
        let d = waveform_delta(&x, &y).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert_eq!(d, waveform_delta(&y, &x).unwrap());
        prop_assert_eq!(waveform_delta(&x, &x).unwrap(), 0.0);
        let expected = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert_eq!(d, expected);
    }

    #[test]
    fn window_plans_tile_the_horizon(steps_per_window in 1usize..20, windows in 1usize..50) {
        let h = 0.05;
        let t_win = steps_per_window as f64 * h;
        let horizon = windows as f64 * t_win;
        let plan = WindowPlan::new(horizon, h, t_win).unwrap();
        prop_assert_eq!(plan.w_max, windows);
        prop_assert_eq!(plan.steps_per_window, steps_per_window);
        prop_assert!((plan.w_max as f64 * plan.t_win - horizon).abs() <= 1e-12 * horizon.max(1.0));
        for pair in plan.bounds.windows(2) {
            prop_assert_eq!(pair[0].1, pair[1].0);
        }
    }
}
