//! Revelation martingales as transition kernels on the lattice, and path
//! sampling with one counter-based random stream per path.

mod estimators;
mod exact;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::simplex::{NodeId, SimplexGrid, SimplexPoint};
use crate::value::{TimeGrid, ValueTable};

pub use estimators::{
    dynamic_programming_check, estimate_value_mc, knot_means, path_cost, path_diagnostics,
    perturb_kernel, posterior_consistency, PathDiagnostics, Perturbation, PosteriorCell,
    PosteriorReport,
};
pub use exact::{
    azema_structure_residual, stay_probability_estimate, AzemaResidual, Edge, ExactPath,
    ExactSampler,
};

/// Step kernels `P[p_{k+1} = π | p_k = node]` for `k < n`, stored row by
/// row; the terminal step sends `p` to `e_i` with probability `p_i`.
#[derive(Debug, Clone)]
pub struct MartingaleKernel<T> {
    time: TimeGrid<T>,
    grid: SimplexGrid<T>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<T>,
}

impl<T: Real> MartingaleKernel<T> {
    /// Builds a kernel from a row function; zero weights are dropped.
    pub fn from_rows<F>(time: TimeGrid<T>, grid: SimplexGrid<T>, row: F) -> Self
    where
        F: Fn(usize, NodeId) -> Vec<(NodeId, T)> + Sync,
    {
        let nodes = grid.len();
        let rows: Vec<Vec<(NodeId, T)>> = (0..time.steps() * nodes)
            .into_par_iter()
            .map(|r| row(r / nodes, r % nodes))
            .collect();
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for r in rows {
            for (id, w) in r {
                if w > T::zero() {
                    targets.push(id as u32);
                    weights.push(w);
                }
            }
            offsets.push(targets.len());
        }
        Self {
            time,
            grid,
            offsets,
            targets,
            weights,
        }
    }

    pub fn time_grid(&self) -> &TimeGrid<T> {
        &self.time
    }

    pub fn grid(&self) -> &SimplexGrid<T> {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.time.steps()
    }

    /// Targets and weights of row `(k, node)`.
    pub fn row(&self, k: usize, node: NodeId) -> (&[u32], &[T]) {
        let r = k * self.grid.len() + node;
        let (a, b) = (self.offsets[r], self.offsets[r + 1]);
        (&self.targets[a..b], &self.weights[a..b])
    }

    pub fn row_pairs(&self, k: usize, node: NodeId) -> Vec<(NodeId, T)> {
        let (t, w) = self.row(k, node);
        t.iter()
            .map(|&id| id as NodeId)
            .zip(w.iter().copied())
            .collect()
    }

    pub fn is_identity_row(&self, k: usize, node: NodeId) -> bool {
        let (t, _) = self.row(k, node);
        t.len() == 1 && t[0] as NodeId == node
    }

    /// Largest `|Σ_l λ_l − 1|` and `|Σ_l λ_l π^l − p|` over all rows.
    pub fn max_row_defects(&self) -> (T, T) {
        let nodes = self.grid.len();
        (0..self.steps() * nodes)
            .into_par_iter()
            .map(|r| {
                let (k, node) = (r / nodes, r % nodes);
                let (t, w) = self.row(k, node);
                let mass: T = w.iter().copied().sum();
                let mut mean = vec![T::zero(); self.grid.dim()];
                for (&id, &x) in t.iter().zip(w) {
                    for (m, &c) in mean.iter_mut().zip(self.grid.point(id as NodeId).coords()) {
                        *m += x * c;
                    }
                }
                let drift = mean
                    .iter()
                    .zip(self.grid.point(node).coords())
                    .fold(T::zero(), |a, (&x, &y)| a.max((x - y).abs()));
                ((mass - T::one()).abs(), drift)
            })
            .reduce(
                || (T::zero(), T::zero()),
                |a, b| (a.0.max(b.0), a.1.max(b.1)),
            )
    }
}

/// Kernel of the optimal revelation process: each row is the cached
/// splitting of the value table.
pub fn build_kernel<T: Real>(table: &ValueTable<T>) -> Result<MartingaleKernel<T>> {
    if table.steps() == 0 {
        return Err(Error::MissingSplits);
    }
    Ok(MartingaleKernel::from_rows(
        *table.time_grid(),
        table.grid().clone(),
        |k, node| table.split(k, node).iter().collect(),
    ))
}

/// The kernel seen by a player who knows the state is `i`.
#[derive(Debug, Clone, Copy)]
pub struct ConditionalKernel<'a, T> {
    pub base: &'a MartingaleKernel<T>,
    pub state: usize,
}

/// Conditions a kernel on the realized state `i` (0-based).
pub fn condition_kernel<T: Real>(
    kernel: &MartingaleKernel<T>,
    i: usize,
) -> Result<ConditionalKernel<'_, T>> {
    let dim = kernel.grid.dim();
    if i >= dim {
        return Err(Error::InvalidState { index: i, dim });
    }
    Ok(ConditionalKernel {
        base: kernel,
        state: i,
    })
}

impl<T: Real> ConditionalKernel<'_, T> {
    /// `λ_l π^l_i / p_i`; identity when `p_i = 0`.
    pub fn row_pairs(&self, k: usize, node: NodeId) -> Vec<(NodeId, T)> {
        let grid = &self.base.grid;
        let pi = grid.point(node).coords()[self.state];
        if pi == T::zero() {
            return vec![(node, T::one())];
        }
        let (t, w) = self.base.row(k, node);
        t.iter()
            .zip(w)
            .filter_map(|(&id, &x)| {
                let q = x * grid.point(id as NodeId).coords()[self.state] / pi;
                (q > T::zero()).then_some((id as NodeId, q))
            })
            .collect()
    }
}

/// How the state of nature enters the sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Posterior path only; terminal vertex drawn from the last posterior.
    Unconditional,
    /// Draw `i ~ p₀` first, then follow the kernel conditioned on `i`.
    Joint,
    /// Follow the kernel conditioned on a fixed state.
    Conditional(usize),
}

/// A sampled posterior path `p₀, …, p_n` with its terminal vertex.
///
/// `nodes[k + 1]` is the posterior after the splitting at knot `t_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MartingalePath {
    pub nodes: Vec<NodeId>,
    /// Index of the vertex `p_{n+1} = e_terminal`.
    pub terminal: usize,
    pub state: Option<usize>,
}

/// Deterministic per-path sampler: path `j` uses stream `j` of a ChaCha8
/// generator keyed by the master seed.
#[derive(Debug, Clone)]
pub struct PathSampler<'a, T> {
    kernel: &'a MartingaleKernel<T>,
    mode: SampleMode,
    start: NodeId,
    snap_distance: T,
    seed: u64,
}

fn draw<T: Real>(
    rng: &mut ChaCha8Rng,
    targets: impl Iterator<Item = (NodeId, T)> + Clone,
) -> NodeId {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = None;
    for (id, w) in targets {
        acc += w.f64();
        last = Some(id);
        if u < acc {
            return id;
        }
    }
    last.expect("empty kernel row")
}

impl<'a, T: Real> PathSampler<'a, T> {
    /// Snaps `p0` to the nearest lattice node.
    pub fn new(
        kernel: &'a MartingaleKernel<T>,
        p0: &SimplexPoint<T>,
        mode: SampleMode,
        seed: u64,
    ) -> Result<Self> {
        if kernel.offsets.len() < 2 {
            return Err(Error::EmptyKernel);
        }
        if let SampleMode::Conditional(i) = mode {
            if i >= kernel.grid.dim() {
                return Err(Error::InvalidState {
                    index: i,
                    dim: kernel.grid.dim(),
                });
            }
        }
        let (start, snap_distance) = kernel.grid.snap(p0)?;
        Ok(Self {
            kernel,
            mode,
            start,
            snap_distance,
            seed,
        })
    }

    pub fn kernel(&self) -> &MartingaleKernel<T> {
        self.kernel
    }

    pub fn mode(&self) -> SampleMode {
        self.mode
    }

    pub fn start(&self) -> NodeId {
        self.start
    }

    pub fn snap_distance(&self) -> T {
        self.snap_distance
    }

    pub fn rng(&self, j: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(j as u64);
        rng
    }

    /// Path number `j`.
    pub fn path(&self, j: usize) -> MartingalePath {
        let mut rng = self.rng(j);
        let grid = &self.kernel.grid;
        let start_coords = grid.point(self.start).coords();
        let state = match self.mode {
            SampleMode::Unconditional => None,
            SampleMode::Conditional(i) => Some(i),
            SampleMode::Joint => Some(draw(&mut rng, start_coords.iter().copied().enumerate())),
        };
        let n = self.kernel.steps();
        let mut nodes = Vec::with_capacity(n + 1);
        let mut cur = self.start;
        nodes.push(cur);
        for k in 0..n {
            let (t, w) = self.kernel.row(k, cur);
            cur = match state {
                None => draw(
                    &mut rng,
                    t.iter().map(|&id| id as NodeId).zip(w.iter().copied()),
                ),
                Some(i) => {
                    let pi = grid.point(cur).coords()[i];
                    if pi == T::zero() {
                        cur
                    } else {
                        let pairs = t.iter().zip(w).map(move |(&id, &x)| {
                            (id as NodeId, x * grid.point(id as NodeId).coords()[i] / pi)
                        });
                        draw(&mut rng, pairs)
                    }
                }
            };
            nodes.push(cur);
        }
        let terminal = match state {
            Some(i) => i,
            None => draw(
                &mut rng,
                grid.point(cur).coords().iter().copied().enumerate(),
            ),
        };
        MartingalePath {
            nodes,
            terminal,
            state,
        }
    }

    /// Applies `f` to paths `0..count` in parallel; results in path order.
    pub fn map<R, F>(&self, count: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(&MartingalePath) -> R + Sync + Send,
    {
        (0..count)
            .into_par_iter()
            .map(|j| f(&self.path(j)))
            .collect()
    }

    /// Folds fixed chunks of paths in parallel and combines the chunk
    /// results in chunk order, so the result does not depend on scheduling.
    pub fn fold_chunks<A, F, G>(
        &self,
        count: usize,
        init: impl Fn() -> A + Sync + Send,
        fold: F,
        combine: G,
    ) -> A
    where
        A: Send,
        F: Fn(&mut A, &MartingalePath) + Sync + Send,
        G: Fn(A, A) -> A,
    {
        const CHUNK: usize = 1024;
        let chunks = count.div_ceil(CHUNK);
        let parts: Vec<A> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                for j in c * CHUNK..((c + 1) * CHUNK).min(count) {
                    fold(&mut acc, &self.path(j));
                }
                acc
            })
            .collect();
        parts.into_iter().fold(init(), combine)
    }

    pub fn sample(&self, count: usize) -> Vec<MartingalePath> {
        self.map(count, |p| p.clone())
    }
}

/// `count` independent paths from `p0`.
pub fn sample_paths<T: Real>(
    kernel: &MartingaleKernel<T>,
    p0: &SimplexPoint<T>,
    mode: SampleMode,
    count: usize,
    seed: u64,
) -> Result<Vec<MartingalePath>> {
    if count == 0 {
        return Err(Error::EmptySample);
    }
    Ok(PathSampler::new(kernel, p0, mode, seed)?.sample(count))
}
