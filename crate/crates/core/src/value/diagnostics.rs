//! Residuals of the obstacle problem and of the conjugate equation, and the
//! non-revealing set.

use rayon::prelude::*;

use super::ValueTable;
use crate::error::{Error, Result};
use crate::game::{lipschitz_estimate, Band, GameSpec};
use crate::scalar::Real;
use crate::simplex::{fenchel_conjugate, min_tangent_second_difference, DualLattice, NodeId};

/// Residuals of `min{w_t + H, λ_min(∂²w)} = 0` at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleResidual<T> {
    /// `(V(t_{k+1}) − V(t_k))/τ + H(t_k, p)`.
    pub time_residual: T,
    /// Smallest tangent second difference; `None` at vertices.
    pub convexity_residual: Option<T>,
}

/// Both obstacle residuals at `(t_k, node)`.
pub fn obstacle_residual<T: Real>(
    table: &ValueTable<T>,
    k: usize,
    node: NodeId,
) -> Result<ObstacleResidual<T>> {
    let n = table.steps();
    if k >= n {
        return Err(Error::TimeIndexOutOfRange { k, n });
    }
    if node >= table.grid.len() {
        return Err(Error::InvalidParameters(format!(
            "node {node} out of range"
        )));
    }
    let tau = table.time.tau();
    let time_residual =
        (table.values[k + 1][node] - table.values[k][node]) / tau + table.hamiltonian[k][node];
    let convexity_residual = min_tangent_second_difference(&table.grid, &table.values[k], node);
    if convexity_residual.is_none() && table.grid.point(node).is_vertex().is_none() {
        return Err(Error::BoundaryNode(node));
    }
    Ok(ObstacleResidual {
        time_residual,
        convexity_residual,
    })
}

/// Classification of the lattice into `ℋ(t_k)` for `k = 0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonRevealingSet<T> {
    pub constant: T,
    /// `constant · (τ + 1/m)`.
    pub threshold: T,
    /// `members[k][node]`.
    pub members: Vec<Vec<bool>>,
}

impl<T: Real> NonRevealingSet<T> {
    pub fn contains(&self, k: usize, node: NodeId) -> bool {
        self.members[k][node]
    }

    /// Largest Hausdorff distance, in the `p₁` coordinate, between `ℋ(t_k)`
    /// and the band complement `{p₁ ≤ h₁(t_k)} ∪ {p₁ ≥ h₂(t_k)}` on the
    /// lattice, over all `k`. Two-state tables only.
    pub fn hausdorff_to_band(&self, table: &ValueTable<T>, band: &Band<T>) -> Result<T> {
        let grid = table.grid();
        if grid.dim() != 2 {
            return Err(Error::UnsupportedDimension(grid.dim()));
        }
        let p1: Vec<T> = grid.points().iter().map(|p| p.coords()[0]).collect();
        let mut worst = T::zero();
        for (k, row) in self.members.iter().enumerate() {
            let t = table.time_grid().knot(k);
            let (lo, hi) = (band.lower(t), band.upper(t));
            let a: Vec<T> = (0..grid.len()).filter(|&j| row[j]).map(|j| p1[j]).collect();
            let b: Vec<T> = (0..grid.len())
                .filter(|&j| p1[j] <= lo || p1[j] >= hi)
                .map(|j| p1[j])
                .collect();
            worst = worst
                .max(directed_hausdorff(&a, &b))
                .max(directed_hausdorff(&b, &a));
        }
        Ok(worst)
    }
}

fn directed_hausdorff<T: Real>(from: &[T], to: &[T]) -> T {
    from.iter()
        .map(|&x| {
            to.iter()
                .map(|&y| (x - y).abs())
                .fold(T::infinity(), T::min)
        })
        .fold(T::zero(), T::max)
}

/// Default classification constant: `0.01 ×` the sampled Lipschitz constant
/// of H (see the README for why it is much smaller than a unit constant).
pub fn default_threshold_constant<T: Real>(spec: &GameSpec<T>, table: &ValueTable<T>) -> T {
    let tg = table.time_grid();
    let times: Vec<T> = (0..tg.steps())
        .step_by((tg.steps() / 8).max(1))
        .map(|k| tg.knot(k))
        .collect();
    T::c(0.01) * lipschitz_estimate(spec, table.grid(), &times)
}

/// `node ∈ ℋ(t_k)` iff its time residual is at most `c·(τ + 1/m)`; vertices
/// always belong. Rows exist for `k = 0..n−1`.
pub fn non_revealing_set<T: Real>(table: &ValueTable<T>, c: T) -> NonRevealingSet<T> {
    let tau = table.time.tau();
    let m = T::from_usize_lossy(table.grid.resolution());
    let threshold = c * (tau + T::one() / m);
    let grid = &table.grid;
    let members = (0..table.steps())
        .into_par_iter()
        .map(|k| {
            (0..grid.len())
                .map(|node| {
                    let r = (table.values[k + 1][node] - table.values[k][node]) / tau
                        + table.hamiltonian[k][node];
                    r <= threshold || grid.point(node).is_vertex().is_some()
                })
                .collect()
        })
        .collect();
    NonRevealingSet {
        constant: c,
        threshold,
        members,
    }
}

/// Residual of `∂_t V* − H(t, ∂_p̂ V*) = 0` at selected knots.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateResidual<T> {
    pub lattice: DualLattice<T>,
    pub knots: Vec<usize>,
    /// `residuals[j][flat]`: `None` on the box boundary or where the
    /// gradient is masked as nondifferentiable.
    pub residuals: Vec<Vec<Option<T>>>,
    /// Number of interior dual nodes per knot.
    pub interior: usize,
}

impl<T: Real> ConjugateResidual<T> {
    /// Fraction of interior dual nodes masked, over all knots.
    pub fn masked_fraction(&self) -> f64 {
        let total = self.interior * self.knots.len();
        let kept: usize = self
            .residuals
            .iter()
            .map(|r| r.iter().filter(|x| x.is_some()).count())
            .sum();
        if total == 0 {
            return 0.0;
        }
        1.0 - kept as f64 / total as f64
    }

    /// Largest `|residual|` over unmasked nodes.
    pub fn max_abs(&self) -> T {
        self.residuals
            .iter()
            .flatten()
            .flatten()
            .fold(T::zero(), |a, &x| a.max(x.abs()))
    }
}

/// Computes `V*(t_k, ·)` and `V*(t_{k+1}, ·)` on the dual lattice and the
/// residual `(V*(t_{k+1}) − V*(t_k))/τ − H(t_k, ∇V*(t_k))` with a central
/// difference gradient, clipped to the simplex. Nodes where a one-sided
/// difference departs from the central one by more than `10/m` in any
/// component are masked.
pub fn conjugate_pde_residual<T: Real>(
    spec: &GameSpec<T>,
    table: &ValueTable<T>,
    lattice: DualLattice<T>,
    knots: &[usize],
) -> Result<ConjugateResidual<T>> {
    let n = table.steps();
    if let Some(&k) = knots.iter().find(|&&k| k >= n) {
        return Err(Error::TimeIndexOutOfRange { k, n });
    }
    let dim = table.grid.dim();
    let ppa = lattice.points_per_axis();
    let interior = (ppa - 2).pow(dim as u32);
    let tau = table.time.tau();
    let h = lattice.spacing();
    let two_h = h + h;
    let mask_tol = T::c(10.0) / T::from_usize_lossy(table.grid.resolution());
    let mut residuals = Vec::with_capacity(knots.len());
    for &k in knots {
        let now = fenchel_conjugate(&table.grid, &table.values[k], lattice)?.values;
        let next = fenchel_conjugate(&table.grid, &table.values[k + 1], lattice)?.values;
        let t = table.time.knot(k);
        let row = (0..lattice.len())
            .into_par_iter()
            .map(|flat| {
                let idx = lattice.multi_index(flat);
                if idx.iter().any(|&j| j == 0 || j + 1 == ppa) {
                    return None;
                }
                let mut grad = vec![T::zero(); dim];
                for axis in 0..dim {
                    let mut up = idx.clone();
                    up[axis] += 1;
                    let mut down = idx.clone();
                    down[axis] -= 1;
                    let (fu, fd, f0) = (
                        now[lattice.flat_index(&up)],
                        now[lattice.flat_index(&down)],
                        now[flat],
                    );
                    let central = (fu - fd) / two_h;
                    let forward = (fu - f0) / h;
                    let backward = (f0 - fd) / h;
                    if (forward - central).abs() > mask_tol || (backward - central).abs() > mask_tol
                    {
                        return None;
                    }
                    grad[axis] = central.max(T::zero());
                }
                let s: T = grad.iter().copied().sum();
                if s <= T::zero() {
                    return None;
                }
                grad.iter_mut().for_each(|g| *g /= s);
                Some((next[flat] - now[flat]) / tau - spec.h(t, &grad))
            })
            .collect();
        residuals.push(row);
    }
    Ok(ConjugateResidual {
        lattice,
        knots: knots.to_vec(),
        residuals,
        interior,
    })
}
