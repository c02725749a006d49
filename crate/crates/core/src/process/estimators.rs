//! Monte Carlo estimators and structural checks on sampled paths.

use rayon::prelude::*;

use super::{MartingaleKernel, MartingalePath, PathSampler, SampleMode};
use crate::error::{Error, Result};
use crate::scalar::{MeanSe, Real};
use crate::simplex::NodeId;
use crate::value::{NonRevealingSet, ValueTable};

/// `τ Σ_{r<n} H(t_r, p_{r+1})` along one path.
pub fn path_cost<T: Real>(table: &ValueTable<T>, path: &MartingalePath) -> T {
    let tau = table.time_grid().tau();
    let mut total = T::zero();
    for r in 0..table.steps() {
        total += table.hamiltonian(r)[path.nodes[r + 1]];
    }
    tau * total
}

/// Mean and standard error of [`path_cost`] over `count` paths.
pub fn estimate_value_mc<T: Real>(
    sampler: &PathSampler<'_, T>,
    table: &ValueTable<T>,
    count: usize,
) -> Result<MeanSe<T>> {
    if count == 0 {
        return Err(Error::EmptySample);
    }
    check_compatible(sampler.kernel(), table)?;
    let costs = sampler.map(count, |p| path_cost(table, p));
    Ok(MeanSe::from_samples(&costs))
}

fn check_compatible<T: Real>(kernel: &MartingaleKernel<T>, table: &ValueTable<T>) -> Result<()> {
    if kernel.steps() != table.steps() || kernel.grid().len() != table.grid().len() {
        return Err(Error::InvalidParameters(
            "kernel and value table use different grids".into(),
        ));
    }
    Ok(())
}

/// For each `k`, the estimate of `E[τ Σ_{r<k} H(t_r, p_{r+1}) + V(t_k, p_k)]`.
pub fn dynamic_programming_check<T: Real>(
    sampler: &PathSampler<'_, T>,
    table: &ValueTable<T>,
    count: usize,
    knots: &[usize],
) -> Result<Vec<(usize, MeanSe<T>)>> {
    if count == 0 {
        return Err(Error::EmptySample);
    }
    check_compatible(sampler.kernel(), table)?;
    let n = table.steps();
    if let Some(&k) = knots.iter().find(|&&k| k > n) {
        return Err(Error::TimeIndexOutOfRange { k, n });
    }
    let tau = table.time_grid().tau();
    let per_path = sampler.map(count, |p| {
        let mut running = T::zero();
        let mut out = Vec::with_capacity(knots.len());
        let mut r = 0;
        for &k in knots {
            // knots may come in any order
            if k < r {
                running = T::zero();
                r = 0;
            }
            while r < k {
                running += table.hamiltonian(r)[p.nodes[r + 1]];
                r += 1;
            }
            out.push(tau * running + table.values(k)[p.nodes[k]]);
        }
        out
    });
    Ok(knots
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let xs: Vec<T> = per_path.iter().map(|v| v[j]).collect();
            (k, MeanSe::from_samples(&xs))
        })
        .collect())
}

/// Per knot `k = 0..=n` and coordinate, the mean of `p_k` with its SE.
pub fn knot_means<T: Real>(
    sampler: &PathSampler<'_, T>,
    count: usize,
) -> Result<Vec<Vec<MeanSe<T>>>> {
    if count == 0 {
        return Err(Error::EmptySample);
    }
    let grid = sampler.kernel().grid();
    let dim = grid.dim();
    let n = sampler.kernel().steps();
    let base: Vec<f64> = grid
        .point(sampler.start())
        .coords()
        .iter()
        .map(|c| c.f64())
        .collect();
    let len = (n + 1) * dim;
    let (sum, sq) = sampler.fold_chunks(
        count,
        || (vec![0.0f64; len], vec![0.0f64; len]),
        |acc, p| {
            for (k, &node) in p.nodes.iter().enumerate() {
                for (i, &c) in grid.point(node).coords().iter().enumerate() {
                    let d = c.f64() - base[i];
                    acc.0[k * dim + i] += d;
                    acc.1[k * dim + i] += d * d;
                }
            }
        },
        |mut a, b| {
            a.0.iter_mut().zip(&b.0).for_each(|(x, y)| *x += y);
            a.1.iter_mut().zip(&b.1).for_each(|(x, y)| *x += y);
            a
        },
    );
    let nf = count as f64;
    Ok((0..=n)
        .map(|k| {
            (0..dim)
                .map(|i| {
                    let mean = sum[k * dim + i] / nf;
                    let var = if count > 1 {
                        ((sq[k * dim + i] - nf * mean * mean) / (nf - 1.0)).max(0.0)
                    } else {
                        0.0
                    };
                    MeanSe {
                        mean: T::c(base[i] + mean),
                        se: T::c((var / nf).sqrt()),
                        count,
                    }
                })
                .collect()
        })
        .collect())
}

/// One `(k, node)` cell of the posterior-consistency table; `k = n + 1`
/// denotes the terminal vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorCell {
    pub k: usize,
    pub node: NodeId,
    pub visits: u64,
    /// Empirical `P̂[i | p_k = node]` per state.
    pub empirical: Vec<f64>,
    /// `max_i |P̂[i | p_k] − (p_k)_i|`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorReport {
    pub min_visits: u64,
    pub cells: Vec<PosteriorCell>,
    pub max_deviation: f64,
}

/// Compares the realized-state frequencies at each visited `(k, node)` with
/// the node's coordinates. Needs jointly sampled paths; cells with fewer
/// than `min_visits` visits are skipped.
pub fn posterior_consistency<T: Real>(
    sampler: &PathSampler<'_, T>,
    count: usize,
    min_visits: u64,
) -> Result<PosteriorReport> {
    if sampler.mode() != SampleMode::Joint {
        return Err(Error::InvalidParameters(
            "posterior consistency needs jointly sampled paths".into(),
        ));
    }
    if count == 0 {
        return Err(Error::EmptySample);
    }
    let grid = sampler.kernel().grid();
    let (dim, nodes, n) = (grid.dim(), grid.len(), sampler.kernel().steps());
    let cells = (n + 2) * nodes;
    // counts[cell * (dim + 1)] = visits, then one slot per state
    let stride = dim + 1;
    let counts = (0..count)
        .into_par_iter()
        .fold(
            || vec![0u64; cells * stride],
            |mut acc, j| {
                let p = sampler.path(j);
                let i = p.state.expect("joint sampling records the state");
                let terminal = grid.vertex_id(p.terminal);
                for (k, &node) in p.nodes.iter().chain(std::iter::once(&terminal)).enumerate() {
                    let c = (k * nodes + node) * stride;
                    acc[c] += 1;
                    acc[c + 1 + i] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; cells * stride],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let mut out = Vec::new();
    let mut max_deviation: f64 = 0.0;
    for cell in 0..cells {
        let c = cell * stride;
        let visits = counts[c];
        if visits < min_visits || visits == 0 {
            continue;
        }
        let (k, node) = (cell / nodes, cell % nodes);
        let coords = grid.point(node).coords();
        let empirical: Vec<f64> = (0..dim)
            .map(|i| counts[c + 1 + i] as f64 / visits as f64)
            .collect();
        let deviation = empirical
            .iter()
            .zip(coords)
            .fold(0.0f64, |a, (&e, &q)| a.max((e - q.f64()).abs()));
        max_deviation = max_deviation.max(deviation);
        out.push(PosteriorCell {
            k,
            node,
            visits,
            empirical,
            deviation,
        });
    }
    Ok(PosteriorReport {
        min_visits,
        cells: out,
        max_deviation,
    })
}

/// Summary of [`path_diagnostics`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathDiagnostics<T> {
    /// Fraction of `(path, k)` with `p_{k+1} ∈ ℋ(t_k)`, `k = 0..n−1`.
    pub in_h_fraction: f64,
    pub jumps: u64,
    /// Largest `|V(t_k, p_{k+1}) − V(t_k, p_k) − ⟨ξ, p_{k+1} − p_k⟩|` over jumps.
    pub max_jump_residual: T,
    pub mean_abs_jump_residual: T,
}

/// Finite-difference subgradient of `values` at `node`, as slopes along
/// `e_a − e_r` for `a ≠ r`, where `r` is the largest coordinate; each slope
/// averages the one-sided quotients that fit in the simplex.
fn subgradient<T: Real>(table: &ValueTable<T>, values: &[T], node: NodeId) -> (usize, Vec<T>) {
    let grid = table.grid();
    let dim = grid.dim();
    let m = T::from_usize_lossy(grid.resolution());
    let coords = grid.point(node).coords();
    let r = (0..dim).fold(0, |best, i| if coords[i] > coords[best] { i } else { best });
    let slopes = (0..dim)
        .map(|a| {
            if a == r {
                return T::zero();
            }
            let mut dir = [0i32; 3];
            dir[a] = 1;
            dir[r] = -1;
            let fwd = grid
                .step(node, &dir[..dim], 1)
                .map(|f| (values[f] - values[node]) * m);
            let bwd = grid
                .step(node, &dir[..dim], -1)
                .map(|b| (values[node] - values[b]) * m);
            match (fwd, bwd) {
                (Some(f), Some(b)) => (f + b) / T::c(2.0),
                (Some(s), None) | (None, Some(s)) => s,
                (None, None) => T::zero(),
            }
        })
        .collect();
    (r, slopes)
}

/// Membership of the optimal posteriors in ℋ and flatness of V across
/// their jumps (terminal revelation excluded).
pub fn path_diagnostics<T: Real>(
    table: &ValueTable<T>,
    nrs: &NonRevealingSet<T>,
    sampler: &PathSampler<'_, T>,
    count: usize,
) -> Result<PathDiagnostics<T>> {
    if count == 0 {
        return Err(Error::EmptySample);
    }
    check_compatible(sampler.kernel(), table)?;
    let grid = table.grid();
    let n = table.steps();
    let (inside, jumps, max_r, sum_r) = sampler.fold_chunks(
        count,
        || (0u64, 0u64, T::zero(), T::zero()),
        |acc, p| {
            for k in 0..n {
                let (from, to) = (p.nodes[k], p.nodes[k + 1]);
                if nrs.contains(k, to) {
                    acc.0 += 1;
                }
                if from == to {
                    continue;
                }
                let v = table.values(k);
                let (r, slopes) = subgradient(table, v, from);
                let (a, b) = (grid.point(from).coords(), grid.point(to).coords());
                let mut lin = T::zero();
                for i in 0..a.len() {
                    if i != r {
                        lin += slopes[i] * (b[i] - a[i]);
                    }
                }
                let res = (v[to] - v[from] - lin).abs();
                acc.1 += 1;
                acc.2 = acc.2.max(res);
                acc.3 += res;
            }
        },
        |a, b| (a.0 + b.0, a.1 + b.1, a.2.max(b.2), a.3 + b.3),
    );
    let pairs = (count * n) as f64;
    Ok(PathDiagnostics {
        in_h_fraction: inside as f64 / pairs,
        jumps,
        max_jump_residual: max_r,
        mean_abs_jump_residual: if jumps > 0 {
            sum_r / T::c(jumps as f64)
        } else {
            T::zero()
        },
    })
}

/// Suboptimal but valid revelation plans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    /// Identity rows for `k < n/2`.
    Delay,
    /// Every row jumps straight to the vertices, `{e_i: p_i}`.
    Eager,
    /// `θ · row + (1 − θ) · identity`.
    Mix(f64),
}

pub fn perturb_kernel<T: Real>(
    kernel: &MartingaleKernel<T>,
    mode: Perturbation,
) -> Result<MartingaleKernel<T>> {
    if let Perturbation::Mix(theta) = mode {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidTheta(theta));
        }
    }
    let grid = kernel.grid().clone();
    let n = kernel.steps();
    let g = grid.clone();
    Ok(MartingaleKernel::from_rows(
        *kernel.time_grid(),
        grid,
        move |k, node| match mode {
            Perturbation::Delay if k < n / 2 => vec![(node, T::one())],
            Perturbation::Delay => kernel.row_pairs(k, node),
            Perturbation::Eager => g
                .point(node)
                .coords()
                .iter()
                .enumerate()
                .map(|(i, &c)| (g.vertex_id(i), c))
                .collect(),
            Perturbation::Mix(theta) => {
                let th = T::c(theta);
                let mut row: Vec<(NodeId, T)> = kernel
                    .row_pairs(k, node)
                    .into_iter()
                    .map(|(id, w)| (id, w * th))
                    .collect();
                match row.iter_mut().find(|r| r.0 == node) {
                    Some(r) => r.1 += T::one() - th,
                    None => row.push((node, T::one() - th)),
                }
                row
            }
        },
    ))
}
