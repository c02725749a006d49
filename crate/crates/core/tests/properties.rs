use infogame::{
    build_kernel, condition_kernel, convex_envelope, min_tangent_second_difference, solve_backward,
    ActionGrid, GameSpec, SimplexGrid, TimeGrid,
};
use proptest::prelude::*;

fn grid_and_values(dim: usize) -> impl Strategy<Value = (SimplexGrid<f64>, Vec<f64>)> {
    (2usize..14).prop_flat_map(move |m| {
        let grid = SimplexGrid::<f64>::new(dim, m).unwrap();
        let len = grid.len();
        (Just(grid), prop::collection::vec(-5.0f64..5.0, len))
    })
}

fn check_envelope(grid: &SimplexGrid<f64>, f: &[f64]) -> Result<(), TestCaseError> {
    let env = convex_envelope(grid, f).unwrap();
    let scale = f.iter().fold(1.0f64, |a, &x| a.max(x.abs()));
    for node in 0..grid.len() {
        prop_assert!(env.values()[node] <= f[node] + 1e-10 * scale);
        if let Some(d2) = min_tangent_second_difference(grid, env.values(), node) {
            prop_assert!(d2 >= -1e-8 * scale * (grid.resolution() * grid.resolution()) as f64);
        }
        let rule = env.splitting_at(grid.point(node)).unwrap();
        let bc = rule.barycenter();
        for (a, b) in bc.iter().zip(grid.point(node).coords()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        let w: f64 = rule.weights.iter().sum();
        prop_assert!((w - 1.0).abs() < 1e-10);
        for &t in &rule.target_ids {
            prop_assert!(env.is_active(t));
        }
        let exact = env.node_split(node);
        let val: f64 = exact.iter().map(|(id, w)| w * env.values()[id]).sum();
        prop_assert!((val - env.values()[node]).abs() < 1e-9 * scale);
    }
    // idempotence
    let again = convex_envelope(grid, env.values()).unwrap();
    for (a, b) in again.values().iter().zip(env.values()) {
        prop_assert!((a - b).abs() < 1e-9 * scale);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn envelope_invariants_two_states((grid, f) in grid_and_values(2)) {
        check_envelope(&grid, &f)?;
    }

    #[test]
    fn envelope_invariants_three_states((grid, f) in grid_and_values(3)) {
        check_envelope(&grid, &f)?;
    }

    #[test]
    fn envelope_dominates_affine_minorants((grid, f) in grid_and_values(3), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        // the affine function p ↦ a p₁ + b p₂ + c with c chosen to touch f from below
        let aff: Vec<f64> = grid.points().iter().map(|p| a * p.coords()[0] + b * p.coords()[1]).collect();
        let c = f.iter().zip(&aff).map(|(x, y)| x - y).fold(f64::INFINITY, f64::min);
        let env = convex_envelope(&grid, &f).unwrap();
        for node in 0..grid.len() {
            prop_assert!(env.values()[node] >= aff[node] + c - 1e-9);
        }
    }

    #[test]
    fn kernel_rows_are_martingale_steps(table in prop::collection::vec(-2.0f64..2.0, 12), m in 3usize..12, n in 1usize..6) {
        // random 2×2 payoff game on three states
        let mut t3 = vec![vec![vec![0.0; 3]; 2]; 2];
        for (j, x) in table.iter().enumerate() {
            t3[j / 6][(j / 3) % 2][j % 3] = *x;
        }
        let actions = ActionGrid::scalar(&[0.0, 1.0], &[0.0, 1.0]).unwrap();
        let spec = GameSpec::from_payoff_table("random", 3, 1.0, actions, t3).unwrap();
        let grid = SimplexGrid::new(3, m).unwrap();
        let vt = solve_backward(&spec, TimeGrid::new(0.0, 1.0, n).unwrap(), &grid).unwrap();
        let kernel = build_kernel(&vt).unwrap();
        let (mass, drift) = kernel.max_row_defects();
        prop_assert!(mass < 1e-12);
        prop_assert!(drift < 1e-12);
        let conds: Vec<_> = (0..3).map(|i| condition_kernel(&kernel, i).unwrap()).collect();
        for k in 0..n {
            for node in 0..grid.len() {
                let p = grid.point(node).coords();
                for (id, w) in kernel.row_pairs(k, node) {
                    let mix: f64 = (0..3)
                        .map(|i| p[i] * conds[i].row_pairs(k, node).iter().find(|r| r.0 == id).map_or(0.0, |r| r.1))
                        .sum();
                    prop_assert!((mix - w).abs() < 1e-12);
                }
                for c in &conds {
                    let s: f64 = c.row_pairs(k, node).iter().map(|r| r.1).sum();
                    prop_assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
