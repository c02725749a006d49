//! The probability simplex Δ(I), its barycentric lattice, lower convex
//! envelopes over the lattice and discrete conjugates.

mod conjugate;
mod envelope;
mod hull;

use std::sync::Arc;

pub use conjugate::{fenchel_conjugate, DualField, DualLattice};
pub use envelope::{convex_envelope, Facet, LowerEnvelope, NodeSplit, SplittingRule};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A point of Δ(I): nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint<T> {
    coords: Vec<T>,
}

impl<T: Real> SimplexPoint<T> {
    /// Validates and wraps `coords`. Tiny negative entries produced by
    /// rounding (above `-1e-12`) are clamped to zero.
    pub fn new(coords: Vec<T>) -> Result<Self> {
        let raw = || coords.iter().map(|c| c.f64()).collect::<Vec<_>>();
        if coords.len() < 2 {
            return Err(Error::InvalidPoint {
                coords: raw(),
                reason: "dimension must be at least 2",
            });
        }
        let tol = T::c(1e-12).max(T::epsilon() * T::c(16.0));
        if coords.iter().any(|c| !c.is_finite() || *c < -tol) {
            return Err(Error::InvalidPoint {
                coords: raw(),
                reason: "coordinates must be finite and nonnegative",
            });
        }
        let sum: T = coords.iter().copied().sum();
        if (sum - T::one()).abs() > tol {
            return Err(Error::InvalidPoint {
                coords: raw(),
                reason: "coordinates must sum to 1",
            });
        }
        let coords = coords.into_iter().map(|c| c.max(T::zero())).collect();
        Ok(Self { coords })
    }

    /// The vertex `e_i` (zero-based `i`).
    pub fn vertex(i: usize, dim: usize) -> Result<Self> {
        if dim < 2 || i >= dim {
            return Err(Error::InvalidState { index: i, dim });
        }
        let mut coords = vec![T::zero(); dim];
        coords[i] = T::one();
        Ok(Self { coords })
    }

    /// Two-state point `(p, 1 - p)`.
    pub fn binary(p: T) -> Result<Self> {
        Self::new(vec![p, T::one() - p])
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_vertex(&self) -> Option<usize> {
        self.coords.iter().position(|&c| c == T::one())
    }

    pub fn distance(&self, other: &Self) -> T {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    }

    pub(crate) fn from_raw(coords: Vec<T>) -> Self {
        Self { coords }
    }
}

/// Node identifier inside a [`SimplexGrid`].
pub type NodeId = usize;

/// Uniform barycentric lattice `{k / m : k ∈ ℕ^I, Σk = m}` on Δ(I), I ∈ {2, 3}.
///
/// Nodes are ordered lexicographically in their integer coordinates.
#[derive(Debug, Clone)]
pub struct SimplexGrid<T> {
    dim: usize,
    resolution: usize,
    ints: Arc<Vec<[u32; 3]>>,
    points: Arc<Vec<SimplexPoint<T>>>,
}

impl<T: Real> SimplexGrid<T> {
    pub fn new(dim: usize, resolution: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if resolution < 1 {
            return Err(Error::ResolutionTooSmall(resolution));
        }
        let m = resolution as u32;
        let mut ints = Vec::new();
        if dim == 2 {
            for k1 in 0..=m {
                ints.push([k1, m - k1, 0]);
            }
        } else {
            for k1 in 0..=m {
                for k2 in 0..=(m - k1) {
                    ints.push([k1, k2, m - k1 - k2]);
                }
            }
        }
        let mt = T::from_usize_lossy(resolution);
        let points = ints
            .iter()
            .map(|k| {
                let mut coords: Vec<T> = k[..dim]
                    .iter()
                    .map(|&x| T::from_u32(x).unwrap() / mt)
                    .collect();
                // keep the sum exactly one where rounding allows
                let head: T = coords[..dim - 1].iter().copied().sum();
                if k[dim - 1] != 0 {
                    coords[dim - 1] = T::one() - head;
                }
                SimplexPoint::from_raw(coords)
            })
            .collect();
        Ok(Self {
            dim,
            resolution,
            ints: Arc::new(ints),
            points: Arc::new(points),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, id: NodeId) -> &SimplexPoint<T> {
        &self.points[id]
    }

    pub fn points(&self) -> &[SimplexPoint<T>] {
        &self.points
    }

    /// Integer lattice coordinates of a node (third entry unused when I = 2).
    pub fn ints(&self, id: NodeId) -> [u32; 3] {
        self.ints[id]
    }

    /// Node id for integer coordinates `k` (length I, summing to m).
    pub fn id_of(&self, k: &[i64]) -> Option<NodeId> {
        let m = self.resolution as i64;
        if k.len() != self.dim || k.iter().any(|&x| x < 0 || x > m) || k.iter().sum::<i64>() != m {
            return None;
        }
        Some(self.id_of_head(k[0], if self.dim == 3 { k[1] } else { 0 }))
    }

    /// Id from the leading one (I = 2) or two (I = 3) integer coordinates;
    /// caller guarantees validity.
    pub(crate) fn id_of_head(&self, k1: i64, k2: i64) -> NodeId {
        if self.dim == 2 {
            k1 as usize
        } else {
            let m = self.resolution as i64;
            (k1 * (m + 1) - k1 * (k1 - 1) / 2 + k2) as usize
        }
    }

    /// Node id of the vertex `e_i` (zero-based).
    pub fn vertex_id(&self, i: usize) -> NodeId {
        let m = self.resolution as i64;
        let mut k = vec![0i64; self.dim];
        k[i] = m;
        self.id_of(&k).expect("vertex is a node")
    }

    /// Nearest node to `p` and the Euclidean snap distance.
    pub fn snap(&self, p: &SimplexPoint<T>) -> Result<(NodeId, T)> {
        self.check_dim(p)?;
        let m = self.resolution as i64;
        let scaled: Vec<f64> = p.coords().iter().map(|c| c.f64() * m as f64).collect();
        let mut k: Vec<i64> = scaled.iter().map(|x| x.floor() as i64).collect();
        let mut deficit = m - k.iter().sum::<i64>();
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.sort_by(|&a, &b| {
            let fa = scaled[a] - k[a] as f64;
            let fb = scaled[b] - k[b] as f64;
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if deficit <= 0 {
                break;
            }
            k[i] += 1;
            deficit -= 1;
        }
        let id = self.id_of(&k).ok_or_else(|| {
            Error::PointOutsideSimplex(p.coords().iter().map(|c| c.f64()).collect())
        })?;
        let d = self.point(id).distance(p);
        Ok((id, d))
    }

    pub(crate) fn check_dim(&self, p: &SimplexPoint<T>) -> Result<()> {
        if p.dim() != self.dim {
            return Err(Error::InvalidPoint {
                coords: p.coords().iter().map(|c| c.f64()).collect(),
                reason: "dimension does not match the grid",
            });
        }
        Ok(())
    }

    /// Piecewise-linear interpolation of nodal values at an arbitrary point,
    /// using the standard triangulation of the lattice.
    pub fn interpolate(&self, values: &[T], p: &SimplexPoint<T>) -> Result<T> {
        self.check_dim(p)?;
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        let m = self.resolution as i64;
        let mt = T::from_usize_lossy(self.resolution);
        let c = p.coords();
        if self.dim == 2 {
            let x = c[0] * mt;
            let a = (x.floor().to_i64().unwrap_or(0)).clamp(0, m - 1);
            let u = x - T::from_i64(a).unwrap();
            let fa = values[self.id_of_head(a, 0)];
            let fb = values[self.id_of_head(a + 1, 0)];
            return Ok(fa + (fb - fa) * u);
        }
        let x = c[0] * mt;
        let y = c[1] * mt;
        let a = x.floor().to_i64().unwrap_or(0).clamp(0, m);
        let b = y.floor().to_i64().unwrap_or(0).clamp(0, m - a);
        let u = (x - T::from_i64(a).unwrap()).max(T::zero());
        let v = (y - T::from_i64(b).unwrap()).max(T::zero());
        if a + b == m {
            return Ok(values[self.id_of_head(a, b)]);
        }
        let f00 = values[self.id_of_head(a, b)];
        let f10 = values[self.id_of_head(a + 1, b)];
        let f01 = values[self.id_of_head(a, b + 1)];
        if u + v <= T::one() || a + b + 2 > m {
            Ok((T::one() - u - v) * f00 + u * f10 + v * f01)
        } else {
            let f11 = values[self.id_of_head(a + 1, b + 1)];
            Ok((u + v - T::one()) * f11 + (T::one() - v) * f10 + (T::one() - u) * f01)
        }
    }

    /// Lattice edge directions spanning the tangent space `{z : Σz = 0}`.
    pub fn edge_directions(&self) -> &'static [[i32; 3]] {
        if self.dim == 2 {
            &[[1, -1, 0]]
        } else {
            &[[1, -1, 0], [1, 0, -1], [0, 1, -1]]
        }
    }

    /// Node reached from `node` by the integer step `dir * sign`, if inside.
    pub fn step(&self, node: NodeId, dir: &[i32], sign: i32) -> Option<NodeId> {
        let k = self.ints[node];
        let shifted: Vec<i64> = (0..self.dim)
            .map(|i| k[i] as i64 + (sign * dir[i]) as i64)
            .collect();
        self.id_of(&shifted)
    }
}

/// `m² (f(node + z/m) − 2 f(node) + f(node − z/m))` for a lattice direction
/// `z` with zero coordinate sum.
pub fn tangent_second_difference<T: Real>(
    grid: &SimplexGrid<T>,
    f: &[T],
    node: NodeId,
    direction: &[i32],
) -> Result<T> {
    if f.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: f.len(),
        });
    }
    if direction.len() < grid.dim() || direction[..grid.dim()].iter().sum::<i32>() != 0 {
        return Err(Error::InvalidParameters(
            "direction must have zero coordinate sum".into(),
        ));
    }
    let fwd = grid
        .step(node, direction, 1)
        .ok_or(Error::StencilOutOfSimplex { node })?;
    let bwd = grid
        .step(node, direction, -1)
        .ok_or(Error::StencilOutOfSimplex { node })?;
    let m = T::from_usize_lossy(grid.resolution());
    Ok(m * m * (f[fwd] - f[node] - f[node] + f[bwd]))
}

/// Smallest tangent second difference over the admissible lattice
/// directions at `node`; `None` when no direction fits (vertices).
pub fn min_tangent_second_difference<T: Real>(
    grid: &SimplexGrid<T>,
    f: &[T],
    node: NodeId,
) -> Option<T> {
    grid.edge_directions()
        .iter()
        .filter_map(|d| tangent_second_difference(grid, f, node, &d[..]).ok())
        .fold(None, |acc: Option<T>, x| Some(acc.map_or(x, |a| a.min(x))))
}
