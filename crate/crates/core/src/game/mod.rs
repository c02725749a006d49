//! Game descriptions: finite action samples with vector payoffs, or a
//! Hamiltonian given directly, together with the saddle evaluation
//! `H(t,p) = min_u max_v Σ p_i ℓ_i(t,u,v)`.

pub(crate) mod fixtures;

use std::fmt;
use std::sync::Arc;

pub use fixtures::{
    ex1_payoff_instance, load_builtin, Band, Builtin, FixtureParams, BUILTIN_NAMES,
};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::simplex::{SimplexGrid, SimplexPoint};

/// `ℓ_i(t, u, v)` addressed by action indices: `(t, u_index, v_index, i)`.
pub type PayoffFn<T> = Arc<dyn Fn(T, usize, usize, usize) -> T + Send + Sync>;
/// `H(t, p)` for direct specifications.
pub type HamiltonianFn<T> = Arc<dyn Fn(T, &[T]) -> T + Send + Sync>;
/// Saddle control `u*(t, p)` for direct specifications.
pub type ControlFn<T> = Arc<dyn Fn(T, &[T]) -> Vec<T> + Send + Sync>;

/// Finite samples of the action sets U and V.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionGrid<T> {
    u_values: Vec<Vec<T>>,
    v_values: Vec<Vec<T>>,
}

impl<T: Real> ActionGrid<T> {
    pub fn new(u_values: Vec<Vec<T>>, v_values: Vec<Vec<T>>) -> Result<Self> {
        for (name, set) in [("U", &u_values), ("V", &v_values)] {
            if set.is_empty() {
                return Err(Error::InvalidParameters(format!(
                    "action set {name} is empty"
                )));
            }
            for (a, x) in set.iter().enumerate() {
                if set[..a].contains(x) {
                    return Err(Error::InvalidParameters(format!(
                        "duplicate action {x:?} in {name}"
                    )));
                }
            }
        }
        Ok(Self { u_values, v_values })
    }

    /// Scalar actions.
    pub fn scalar(u: &[T], v: &[T]) -> Result<Self> {
        Self::new(
            u.iter().map(|&x| vec![x]).collect(),
            v.iter().map(|&x| vec![x]).collect(),
        )
    }

    pub fn u(&self, idx: usize) -> &[T] {
        &self.u_values[idx]
    }

    pub fn v(&self, idx: usize) -> &[T] {
        &self.v_values[idx]
    }

    pub fn n_u(&self) -> usize {
        self.u_values.len()
    }

    pub fn n_v(&self) -> usize {
        self.v_values.len()
    }
}

#[derive(Clone)]
pub struct PayoffGame<T> {
    pub actions: ActionGrid<T>,
    pub payoff: PayoffFn<T>,
}

#[derive(Clone)]
pub struct DirectHamiltonian<T> {
    pub hamiltonian: HamiltonianFn<T>,
    pub u_star: Option<ControlFn<T>>,
}

#[derive(Clone)]
pub enum GameKind<T> {
    Payoff(PayoffGame<T>),
    Direct(DirectHamiltonian<T>),
}

/// A game with I states, horizon T, and either payoffs or a direct H.
#[derive(Clone)]
pub struct GameSpec<T> {
    pub name: String,
    pub dim: usize,
    pub horizon: T,
    pub kind: GameKind<T>,
    /// Set for the builtin catalog; drives closed forms.
    pub builtin: Option<Builtin>,
    /// Non-revealing band for two-state examples whose H has one.
    pub band: Option<Band<T>>,
}

impl<T> fmt::Debug for GameSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            GameKind::Payoff(_) => "payoff",
            GameKind::Direct(_) => "direct",
        };
        f.debug_struct("GameSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("kind", &kind)
            .finish()
    }
}

/// Saddle point of the non-revealing one-shot game at `(t, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleResult<T> {
    pub value: T,
    pub u_index: Option<usize>,
    pub v_index: Option<usize>,
    pub u_star: Option<Vec<T>>,
    pub v_star: Option<Vec<T>>,
    /// `minmax − maxmin`; zero by convention for direct specs.
    pub isaacs_gap: T,
}

impl<T: Real> GameSpec<T> {
    pub fn new(name: impl Into<String>, dim: usize, horizon: T, kind: GameKind<T>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidParameters(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        Ok(Self {
            name: name.into(),
            dim,
            horizon,
            kind,
            builtin: None,
            band: None,
        })
    }

    /// Payoff game from a constant table `table[u][v][i]`.
    pub fn from_payoff_table(
        name: impl Into<String>,
        dim: usize,
        horizon: T,
        actions: ActionGrid<T>,
        table: Vec<Vec<Vec<T>>>,
    ) -> Result<Self> {
        if table.len() != actions.n_u()
            || table
                .iter()
                .any(|row| row.len() != actions.n_v() || row.iter().any(|c| c.len() != dim))
        {
            return Err(Error::InvalidParameters(
                "payoff table shape must be |U| x |V| x I".into(),
            ));
        }
        if table.iter().flatten().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameters(
                "payoff table contains non-finite entries".into(),
            ));
        }
        let table = Arc::new(table);
        let payoff: PayoffFn<T> = Arc::new(move |_t, u, v, i| table[u][v][i]);
        Self::new(
            name,
            dim,
            horizon,
            GameKind::Payoff(PayoffGame { actions, payoff }),
        )
    }

    pub fn is_payoff_based(&self) -> bool {
        matches!(self.kind, GameKind::Payoff(_))
    }

    pub fn payoff_game(&self) -> Result<&PayoffGame<T>> {
        match &self.kind {
            GameKind::Payoff(g) => Ok(g),
            GameKind::Direct(_) => Err(Error::NotPayoffBased),
        }
    }

    /// `Σ_i p_i ℓ_i(t, u, v)`.
    #[inline]
    pub fn weighted_payoff(game: &PayoffGame<T>, t: T, u: usize, v: usize, p: &[T]) -> T {
        p.iter()
            .enumerate()
            .map(|(i, &pi)| {
                if pi == T::zero() {
                    T::zero()
                } else {
                    pi * (game.payoff)(t, u, v, i)
                }
            })
            .sum()
    }

    /// Value of H only.
    pub fn h(&self, t: T, p: &[T]) -> T {
        match &self.kind {
            GameKind::Direct(d) => (d.hamiltonian)(t, p),
            GameKind::Payoff(g) => {
                let mut best = T::infinity();
                for u in 0..g.actions.n_u() {
                    let mut worst = T::neg_infinity();
                    for v in 0..g.actions.n_v() {
                        worst = worst.max(Self::weighted_payoff(g, t, u, v, p));
                    }
                    best = best.min(worst);
                }
                best
            }
        }
    }

    /// Index of `argmin_u max_v Σ p_i ℓ_i` (lowest index on ties).
    pub fn u_star_index(&self, t: T, p: &[T]) -> Result<usize> {
        let g = self.payoff_game()?;
        let mut best = (T::infinity(), 0);
        for u in 0..g.actions.n_u() {
            let worst = (0..g.actions.n_v())
                .map(|v| Self::weighted_payoff(g, t, u, v, p))
                .fold(T::neg_infinity(), T::max);
            if worst < best.0 {
                best = (worst, u);
            }
        }
        Ok(best.1)
    }

    /// Largest sampled `sup |ℓ_i|` (payoff specs) used by the Lipschitz bound.
    pub fn payoff_sup(&self, times: &[T]) -> Result<T> {
        let g = self.payoff_game()?;
        let mut sup = T::zero();
        for &t in times {
            for u in 0..g.actions.n_u() {
                for v in 0..g.actions.n_v() {
                    for i in 0..self.dim {
                        sup = sup.max((g.payoff)(t, u, v, i).abs());
                    }
                }
            }
        }
        Ok(sup)
    }
}

/// Evaluates H and its saddle controls at `(t, p)`.
///
/// Payoff specs are scanned exhaustively in both orders; argmin/argmax ties
/// go to the lowest action index.
pub fn eval_hamiltonian<T: Real>(spec: &GameSpec<T>, t: T, p: &SimplexPoint<T>) -> SaddleResult<T> {
    let pc = p.coords();
    match &spec.kind {
        GameKind::Direct(d) => SaddleResult {
            value: (d.hamiltonian)(t, pc),
            u_index: None,
            v_index: None,
            u_star: d.u_star.as_ref().map(|f| f(t, pc)),
            v_star: None,
            isaacs_gap: T::zero(),
        },
        GameKind::Payoff(g) => {
            let (nu, nv) = (g.actions.n_u(), g.actions.n_v());
            let mut m = vec![T::zero(); nu * nv];
            for u in 0..nu {
                for v in 0..nv {
                    m[u * nv + v] = GameSpec::weighted_payoff(g, t, u, v, pc);
                }
            }
            let mut minmax = (T::infinity(), 0usize);
            for u in 0..nu {
                let row_max = (0..nv)
                    .map(|v| m[u * nv + v])
                    .fold(T::neg_infinity(), T::max);
                if row_max < minmax.0 {
                    minmax = (row_max, u);
                }
            }
            let mut maxmin = T::neg_infinity();
            for v in 0..nv {
                let col_min = (0..nu).map(|u| m[u * nv + v]).fold(T::infinity(), T::min);
                maxmin = maxmin.max(col_min);
            }
            let u = minmax.1;
            let mut v_best = (T::neg_infinity(), 0usize);
            for v in 0..nv {
                if m[u * nv + v] > v_best.0 {
                    v_best = (m[u * nv + v], v);
                }
            }
            SaddleResult {
                value: minmax.0,
                u_index: Some(u),
                v_index: Some(v_best.1),
                u_star: Some(g.actions.u(u).to_vec()),
                v_star: Some(g.actions.v(v_best.1).to_vec()),
                isaacs_gap: minmax.0 - maxmin,
            }
        }
    }
}

/// Outcome of [`isaacs_gap_scan`].
#[derive(Debug, Clone, PartialEq)]
pub struct IsaacsScan<T> {
    pub max_gap: T,
    pub worst_time: T,
    pub worst_point: Vec<T>,
    /// Largest sampled payoff magnitude; the flag threshold is `1e-6 · scale`.
    pub scale: T,
    pub flagged: bool,
}

/// Largest `minmax − maxmin` over the sample set.
pub fn isaacs_gap_scan<T: Real>(
    spec: &GameSpec<T>,
    times: &[T],
    points: &[SimplexPoint<T>],
) -> Result<IsaacsScan<T>> {
    if !spec.is_payoff_based() {
        return Err(Error::NotApplicable);
    }
    let mut out = IsaacsScan {
        max_gap: T::neg_infinity(),
        worst_time: T::zero(),
        worst_point: Vec::new(),
        scale: T::zero(),
        flagged: false,
    };
    for &t in times {
        for p in points {
            let s = eval_hamiltonian(spec, t, p);
            if s.isaacs_gap > out.max_gap {
                out.max_gap = s.isaacs_gap;
                out.worst_time = t;
                out.worst_point = p.coords().to_vec();
            }
        }
    }
    out.scale = spec.payoff_sup(times)?.max(T::one());
    out.flagged = out.max_gap > T::c(1e-6) * out.scale;
    Ok(out)
}

/// Largest `|H(t,p) − H(t,q)| / |p − q|` over neighbouring lattice nodes at
/// the sampled times.
pub fn lipschitz_estimate<T: Real>(spec: &GameSpec<T>, grid: &SimplexGrid<T>, times: &[T]) -> T {
    let mut best = T::zero();
    for &t in times {
        let h: Vec<T> = grid
            .points()
            .iter()
            .map(|p| spec.h(t, p.coords()))
            .collect();
        for node in 0..grid.len() {
            for d in grid.edge_directions() {
                if let Some(nb) = grid.step(node, &d[..], 1) {
                    let dist = grid.point(node).distance(grid.point(nb));
                    let slope = (h[nb] - h[node]).abs() / dist;
                    if slope.is_finite() {
                        best = best.max(slope);
                    }
                }
            }
        }
    }
    best
}
