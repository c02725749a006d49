//! Backward convexification `V(t_k) = Vex(V(t_{k+1}) + τ H(t_k, ·))` and
//! diagnostics on the resulting table.

mod closed_form;
mod diagnostics;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::scalar::Real;
use crate::simplex::{
    convex_envelope, NodeId, NodeSplit, SimplexGrid, SimplexPoint, SplittingRule,
};

pub use closed_form::closed_form_value;
pub use diagnostics::{
    conjugate_pde_residual, default_threshold_constant, non_revealing_set, obstacle_residual,
    ConjugateResidual, NonRevealingSet, ObstacleResidual,
};

/// Uniform knots `t_k = t0 + kτ`, `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    t0: T,
    horizon: T,
    steps: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t0: T, horizon: T, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidTimeGrid("need at least one step".into()));
        }
        if !t0.is_finite() || !horizon.is_finite() || !(horizon > t0) {
            return Err(Error::InvalidTimeGrid(format!(
                "need t0 < T, got t0={t0}, T={horizon}"
            )));
        }
        Ok(Self { t0, horizon, steps })
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> T {
        (self.horizon - self.t0) / T::from_usize_lossy(self.steps)
    }

    pub fn knot(&self, k: usize) -> T {
        if k == self.steps {
            return self.horizon;
        }
        self.t0 + self.tau() * T::from_usize_lossy(k)
    }

    pub fn knots(&self) -> Vec<T> {
        (0..=self.steps).map(|k| self.knot(k)).collect()
    }

    /// Knot index closest to `t` (clamped to the grid).
    pub fn nearest(&self, t: T) -> usize {
        let x = ((t - self.t0) / self.tau()).round();
        x.to_f64().unwrap_or(0.0).clamp(0.0, self.steps as f64) as usize
    }
}

/// `V^τ` on a time grid × simplex grid, with the one-step splittings.
#[derive(Debug, Clone)]
pub struct ValueTable<T> {
    time: TimeGrid<T>,
    grid: SimplexGrid<T>,
    values: Vec<Vec<T>>,
    hamiltonian: Vec<Vec<T>>,
    splits: Vec<Vec<NodeSplit<T>>>,
    active: Vec<Vec<bool>>,
}

impl<T: Real> ValueTable<T> {
    pub fn time_grid(&self) -> &TimeGrid<T> {
        &self.time
    }

    pub fn grid(&self) -> &SimplexGrid<T> {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.time.steps
    }

    /// Values at knot `k`, `0 ≤ k ≤ n`.
    pub fn values(&self, k: usize) -> &[T] {
        &self.values[k]
    }

    /// `H(t_k, ·)` at the nodes, `0 ≤ k < n`.
    pub fn hamiltonian(&self, k: usize) -> &[T] {
        &self.hamiltonian[k]
    }

    /// Splitting of `node` produced by the envelope at step `k < n`.
    pub fn split(&self, k: usize, node: NodeId) -> &NodeSplit<T> {
        &self.splits[k][node]
    }

    pub fn splitting_rule(&self, k: usize, node: NodeId) -> SplittingRule<T> {
        SplittingRule::from_split(
            &self.grid,
            self.grid.point(node).clone(),
            &self.splits[k][node],
        )
    }

    /// Whether `node` lies on the envelope graph at step `k < n`.
    pub fn is_active(&self, k: usize, node: NodeId) -> bool {
        self.active[k][node]
    }

    /// Piecewise-linear interpolation in `p`, linear in `t` between knots.
    pub fn value_at(&self, t: T, p: &SimplexPoint<T>) -> Result<T> {
        let tg = &self.time;
        if !(t >= tg.t0 && t <= tg.horizon) {
            return Err(Error::InvalidTimeGrid(format!(
                "t={t} outside [{}, {}]",
                tg.t0, tg.horizon
            )));
        }
        let x = (t - tg.t0) / tg.tau();
        let k = x.floor().to_usize().unwrap_or(0).min(tg.steps - 1);
        let w = x - T::from_usize_lossy(k);
        let a = self.grid.interpolate(&self.values[k], p)?;
        if w == T::zero() {
            return Ok(a);
        }
        let b = self.grid.interpolate(&self.values[k + 1], p)?;
        Ok(a + (b - a) * w)
    }
}

/// Runs the backward recursion from `V(T) = 0`, evaluating H at the left
/// knot of each step.
pub fn solve_backward<T: Real>(
    spec: &GameSpec<T>,
    time: TimeGrid<T>,
    grid: &SimplexGrid<T>,
) -> Result<ValueTable<T>> {
    if spec.dim != grid.dim() {
        return Err(Error::InvalidParameters(format!(
            "game has {} states, grid has dimension {}",
            spec.dim,
            grid.dim()
        )));
    }
    let tol = T::c(1e-12) * spec.horizon.abs().max(T::one());
    if (spec.horizon - time.horizon).abs() > tol {
        return Err(Error::HorizonMismatch {
            game: spec.horizon.f64(),
            grid: time.horizon.f64(),
        });
    }
    let n = time.steps;
    let tau = time.tau();
    let mut values = vec![Vec::new(); n + 1];
    let mut hamiltonian = vec![Vec::new(); n];
    let mut splits = vec![Vec::new(); n];
    let mut active = vec![Vec::new(); n];
    values[n] = vec![T::zero(); grid.len()];
    for k in (0..n).rev() {
        let t = time.knot(k);
        let h: Vec<T> = grid
            .points()
            .par_iter()
            .map(|p| spec.h(t, p.coords()))
            .collect();
        let f: Vec<T> = values[k + 1]
            .iter()
            .zip(&h)
            .map(|(&v, &hk)| v + tau * hk)
            .collect();
        let env = convex_envelope(grid, &f)?;
        splits[k] = (0..grid.len())
            .into_par_iter()
            .map(|node| env.node_split(node))
            .collect();
        active[k] = env.active().to_vec();
        values[k] = env.into_values();
        hamiltonian[k] = h;
    }
    Ok(ValueTable {
        time,
        grid: grid.clone(),
        values,
        hamiltonian,
        splits,
        active,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{load_builtin, FixtureParams};
    use crate::simplex::min_tangent_second_difference;

    fn solve(name: &str, n: usize, m: usize) -> ValueTable<f64> {
        let spec = load_builtin::<f64>(name, &FixtureParams::default()).unwrap();
        let grid = SimplexGrid::new(spec.dim, m).unwrap();
        solve_backward(&spec, TimeGrid::new(0.0, spec.horizon, n).unwrap(), &grid).unwrap()
    }

    /// Independent oracle for I = 2: explicit lower hull by checking every
    /// chord, O(m³).
    fn brute_vex(f: &[f64]) -> Vec<f64> {
        let m = f.len() - 1;
        (0..=m)
            .map(|x| {
                let mut best = f[x];
                for a in 0..=x {
                    for b in x..=m {
                        if a < b {
                            let w = (x - a) as f64 / (b - a) as f64;
                            best = best.min((1.0 - w) * f[a] + w * f[b]);
                        }
                    }
                }
                best
            })
            .collect()
    }

    #[test]
    fn time_grid_basics() {
        let tg = TimeGrid::new(0.0, 1.0, 4).unwrap();
        assert_eq!(tg.tau(), 0.25);
        assert_eq!(tg.knots(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(tg.nearest(0.6), 2);
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::new(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn horizon_mismatch() {
        let spec = load_builtin::<f64>("reveal", &FixtureParams::default()).unwrap();
        let grid = SimplexGrid::new(2, 10).unwrap();
        let err = solve_backward(&spec, TimeGrid::new(0.0, 2.0, 4).unwrap(), &grid).unwrap_err();
        assert!(matches!(err, Error::HorizonMismatch { .. }));
    }

    #[test]
    fn recursion_matches_brute_hull_oracle() {
        let spec = load_builtin::<f64>("ex1", &FixtureParams::default()).unwrap();
        let (n, m) = (20, 40);
        let grid = SimplexGrid::new(2, m).unwrap();
        let tg = TimeGrid::new(0.0, 1.0, n).unwrap();
        let table = solve_backward(&spec, tg, &grid).unwrap();
        // grid nodes are ordered by p₁ ascending for I = 2
        let mut v = vec![0.0; m + 1];
        for k in (0..n).rev() {
            let t = tg.knot(k);
            let f: Vec<f64> = (0..=m)
                .map(|x| {
                    let p1 = x as f64 / m as f64;
                    v[x] + tg.tau() * spec.h(t, &[p1, 1.0 - p1])
                })
                .collect();
            v = brute_vex(&f);
            for x in 0..=m {
                let id = grid.id_of(&[x as i64, (m - x) as i64]).unwrap();
                assert!((table.values(k)[id] - v[x]).abs() < 1e-12, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn reveal_center_value() {
        let table = solve("reveal", 200, 400);
        let p = SimplexPoint::binary(0.5).unwrap();
        assert!((table.value_at(0.0, &p).unwrap() - 0.5).abs() < 0.01);
        assert!(table.values(200).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn table_invariants_ex1() {
        let table = solve("ex1", 50, 100);
        let g = table.grid().clone();
        let tau = table.time_grid().tau();
        for k in 0..50 {
            let v = table.values(k);
            let scale = v.iter().fold(1.0f64, |a, &x| a.max(x.abs()));
            for node in 0..g.len() {
                if let Some(d2) = min_tangent_second_difference(&g, v, node) {
                    assert!(d2 >= -1e-8 * scale);
                }
                assert!(
                    v[node] <= table.values(k + 1)[node] + tau * table.hamiltonian(k)[node] + 1e-10
                );
                // splitting identity
                let rule = table.splitting_rule(k, node);
                let bc = rule.barycenter();
                for (a, b) in bc.iter().zip(g.point(node).coords()) {
                    assert!((a - b).abs() < 1e-10);
                }
                for &id in &rule.target_ids {
                    assert!(table.is_active(k, id));
                }
            }
        }
    }

    #[test]
    fn ex1_symmetry_and_vertex_values() {
        let spec = load_builtin::<f64>("ex1", &FixtureParams::default()).unwrap();
        let table = solve("ex1", 40, 80);
        let g = table.grid();
        let tg = table.time_grid();
        for k in 0..=40 {
            for x in 0..=80i64 {
                let a = g.id_of(&[x, 80 - x]).unwrap();
                let b = g.id_of(&[80 - x, x]).unwrap();
                assert!((table.values(k)[a] - table.values(k)[b]).abs() < 1e-10);
            }
            for i in 0..2 {
                let e = SimplexPoint::vertex(i, 2).unwrap();
                let expect: f64 = (k..40)
                    .map(|r| tg.tau() * spec.h(tg.knot(r), e.coords()))
                    .sum();
                assert!((table.values(k)[g.vertex_id(i)] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn autonomous3_matches_aumann_maschler() {
        let table = solve("autonomous3", 10, 20);
        let g = table.grid();
        for node in 0..g.len() {
            let p = g.point(node).coords();
            assert!((table.values(0)[node] - p[2]).abs() < 1e-10, "node {node}");
        }
    }

    #[test]
    fn f32_solver_runs() {
        let spec = load_builtin::<f32>("reveal", &FixtureParams::default()).unwrap();
        let grid = SimplexGrid::<f32>::new(2, 20).unwrap();
        let t = solve_backward(&spec, TimeGrid::new(0.0, 1.0, 10).unwrap(), &grid).unwrap();
        let p = SimplexPoint::binary(0.25f32).unwrap();
        assert!((t.value_at(0.0, &p).unwrap() - 0.75).abs() < 1e-4);
    }
}
