//! Lower convex envelope of lattice data, with the facet triangulation that
//! carries the one-step splitting rules.

use super::hull::{det, LiftedTriangulation};
use super::{NodeId, SimplexGrid, SimplexPoint};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative tolerance for "node lies on the envelope".
const ACTIVE_TOL: f64 = 1e-10;
/// Relative tolerance for "lifted point lies strictly below the surface".
const BELOW_TOL: f64 = 1e-12;

/// A simplicial cell of the envelope triangulation; vertex ids ascending.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Facet {
    pub vertices: Vec<NodeId>,
}

/// Compact splitting of a grid node: at most three target nodes with
/// positive weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSplit<T> {
    ids: [u32; 3],
    weights: [T; 3],
    len: u8,
}

impl<T: Real> NodeSplit<T> {
    pub fn identity(node: NodeId) -> Self {
        Self {
            ids: [node as u32, 0, 0],
            weights: [T::one(), T::zero(), T::zero()],
            len: 1,
        }
    }

    /// Builds a split from `(target, weight)` pairs, dropping zero weights
    /// and merging repeated targets.
    pub fn from_pairs(pairs: &[(NodeId, T)]) -> Self {
        let mut out = Self {
            ids: [0; 3],
            weights: [T::zero(); 3],
            len: 0,
        };
        for &(id, w) in pairs {
            if w <= T::zero() {
                continue;
            }
            if let Some(j) = (0..out.len as usize).find(|&j| out.ids[j] as usize == id) {
                out.weights[j] += w;
                continue;
            }
            assert!((out.len as usize) < 3, "split with more than three targets");
            out.ids[out.len as usize] = id as u32;
            out.weights[out.len as usize] = w;
            out.len += 1;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_identity_at(&self, node: NodeId) -> bool {
        self.len == 1 && self.ids[0] as usize == node
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, T)> + '_ {
        (0..self.len as usize).map(move |j| (self.ids[j] as usize, self.weights[j]))
    }
}

/// One step of revelation: `p = Σ λ_l π^l` with targets on the envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct SplittingRule<T> {
    pub base: SimplexPoint<T>,
    pub weights: Vec<T>,
    pub targets: Vec<SimplexPoint<T>>,
    pub target_ids: Vec<NodeId>,
}

impl<T: Real> SplittingRule<T> {
    pub(crate) fn from_split(
        grid: &SimplexGrid<T>,
        base: SimplexPoint<T>,
        split: &NodeSplit<T>,
    ) -> Self {
        let (target_ids, weights): (Vec<_>, Vec<_>) = split.iter().unzip();
        let targets = target_ids
            .iter()
            .map(|&id| grid.point(id).clone())
            .collect();
        Self {
            base,
            weights,
            targets,
            target_ids,
        }
    }

    /// `Σ λ_l π^l`.
    pub fn barycenter(&self) -> Vec<T> {
        let dim = self.base.dim();
        let mut out = vec![T::zero(); dim];
        for (w, t) in self.weights.iter().zip(&self.targets) {
            for (o, &c) in out.iter_mut().zip(t.coords()) {
                *o += *w * c;
            }
        }
        out
    }
}

/// Lower convex envelope of nodal data on a [`SimplexGrid`].
#[derive(Debug, Clone)]
pub struct LowerEnvelope<T> {
    grid: SimplexGrid<T>,
    input: Vec<T>,
    values: Vec<T>,
    facets: Vec<Facet>,
    active: Vec<bool>,
    node_facet: Vec<usize>,
    scale: T,
}

impl<T: Real> LowerEnvelope<T> {
    pub fn grid(&self) -> &SimplexGrid<T> {
        &self.grid
    }

    pub fn input(&self) -> &[T] {
        &self.input
    }

    /// Envelope value per node.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn is_active(&self, node: NodeId) -> bool {
        self.active[node]
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    /// Largest input magnitude; tolerances are relative to it.
    pub fn scale(&self) -> T {
        self.scale
    }

    /// Facet containing `node` (lowest facet id on shared boundaries).
    pub fn facet_of(&self, node: NodeId) -> usize {
        self.node_facet[node]
    }

    /// Splitting of a grid node with exact (rational) barycentric weights.
    pub fn node_split(&self, node: NodeId) -> NodeSplit<T> {
        if self.active[node] {
            return NodeSplit::identity(node);
        }
        let facet = &self.facets[self.node_facet[node]];
        let p = self.grid.ints(node);
        let pairs = self.weights_exact(facet, p);
        NodeSplit::from_pairs(&pairs)
    }

    fn weights_exact(&self, facet: &Facet, p: [u32; 3]) -> Vec<(NodeId, T)> {
        let v = &facet.vertices;
        if self.grid.dim() == 2 {
            let (a, b) = (
                self.grid.ints(v[0])[0] as i64,
                self.grid.ints(v[1])[0] as i64,
            );
            let x = p[0] as i64;
            let span = T::from_i64(b - a).unwrap();
            return vec![
                (v[0], T::from_i64(b - x).unwrap() / span),
                (v[1], T::from_i64(x - a).unwrap() / span),
            ];
        }
        let xy = |id: NodeId| {
            let k = self.grid.ints(id);
            (k[0] as i64, k[1] as i64)
        };
        let q = (p[0] as i64, p[1] as i64);
        let (a, b, c) = (xy(v[0]), xy(v[1]), xy(v[2]));
        let d = T::from_i64(det(a, b, c)).unwrap();
        vec![
            (v[0], T::from_i64(det(q, b, c)).unwrap() / d),
            (v[1], T::from_i64(det(a, q, c)).unwrap() / d),
            (v[2], T::from_i64(det(a, b, q)).unwrap() / d),
        ]
    }

    /// Barycentric weights of an arbitrary point with respect to a facet.
    fn weights_float(&self, facet: &Facet, p: &SimplexPoint<T>) -> Vec<T> {
        let m = T::from_usize_lossy(self.grid.resolution());
        let v = &facet.vertices;
        let c = p.coords();
        if self.grid.dim() == 2 {
            let a = T::from_u32(self.grid.ints(v[0])[0]).unwrap();
            let b = T::from_u32(self.grid.ints(v[1])[0]).unwrap();
            let x = c[0] * m;
            return vec![(b - x) / (b - a), (x - a) / (b - a)];
        }
        let xy = |id: NodeId| {
            let k = self.grid.ints(id);
            (T::from_u32(k[0]).unwrap(), T::from_u32(k[1]).unwrap())
        };
        let q = (c[0] * m, c[1] * m);
        let (a, b, cc) = (xy(v[0]), xy(v[1]), xy(v[2]));
        let det_t =
            |a: (T, T), b: (T, T), c: (T, T)| (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
        let d = det_t(a, b, cc);
        vec![det_t(q, b, cc) / d, det_t(a, q, cc) / d, det_t(a, b, q) / d]
    }

    /// Splitting rule at an arbitrary point of the simplex: the containing
    /// facet's vertices as targets and the barycentric coordinates of `p` as
    /// weights, zero weights dropped. Ties go to the lowest facet id.
    pub fn splitting_at(&self, p: &SimplexPoint<T>) -> Result<SplittingRule<T>> {
        self.grid.check_dim(p)?;
        let (facet, weights) = self.locate(p)?;
        let pairs: Vec<(NodeId, T)> = facet.vertices.iter().copied().zip(weights).collect();
        let split = NodeSplit::from_pairs(&pairs);
        Ok(SplittingRule::from_split(&self.grid, p.clone(), &split))
    }

    fn locate(&self, p: &SimplexPoint<T>) -> Result<(&Facet, Vec<T>)> {
        let tol = T::c(1e-12);
        for facet in &self.facets {
            let w = self.weights_float(facet, p);
            if w.iter().all(|&x| x >= -tol) {
                let w: Vec<T> = w
                    .into_iter()
                    .map(|x| if x <= T::c(1e-14) { T::zero() } else { x })
                    .collect();
                let s: T = w.iter().copied().sum();
                return Ok((facet, w.into_iter().map(|x| x / s).collect()));
            }
        }
        Err(Error::PointOutsideSimplex(
            p.coords().iter().map(|c| c.f64()).collect(),
        ))
    }

    /// Envelope value at an arbitrary point (affine on the containing facet).
    pub fn value_at(&self, p: &SimplexPoint<T>) -> Result<T> {
        self.grid.check_dim(p)?;
        let (facet, w) = self.locate(p)?;
        Ok(facet
            .vertices
            .iter()
            .zip(w)
            .map(|(&v, x)| x * self.values[v])
            .sum())
    }
}

/// Lower convex envelope of the piecewise-linear interpolant of `f`.
///
/// I = 2 uses a monotone-chain lower hull of the lifted points `(p₁, f)`;
/// I = 3 an incremental lower hull of `(p₁, p₂, f)`. Every node lying on the
/// envelope (within `1e-10` of the value scale) becomes a facet vertex, so the
/// splitting rule at an envelope node is trivial.
pub fn convex_envelope<T: Real>(grid: &SimplexGrid<T>, f: &[T]) -> Result<LowerEnvelope<T>> {
    if f.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: f.len(),
        });
    }
    if let Some(i) = f.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput(i));
    }
    let scale = f.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
    let (values, facets) = if grid.dim() == 2 {
        envelope_1d(grid, f, scale)
    } else {
        envelope_2d(grid, f, scale)?
    };
    let tol = T::c(ACTIVE_TOL) * scale;
    let mut active: Vec<bool> = f.iter().zip(&values).map(|(&x, &e)| x - e <= tol).collect();
    // facet vertices are envelope nodes by construction
    for fc in &facets {
        for &v in &fc.vertices {
            active[v] = true;
        }
    }
    let node_facet = assign_nodes(grid, &facets);
    Ok(LowerEnvelope {
        grid: grid.clone(),
        input: f.to_vec(),
        values,
        facets,
        active,
        node_facet,
        scale,
    })
}

fn envelope_1d<T: Real>(grid: &SimplexGrid<T>, f: &[T], scale: T) -> (Vec<T>, Vec<Facet>) {
    // node id == k1 for I = 2
    let x = |i: usize| T::from_usize_lossy(i);
    let mut hull: Vec<usize> = Vec::with_capacity(f.len());
    for i in 0..f.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (x(b) - x(a)) * (f[i] - f[a]) - (f[b] - f[a]) * (x(i) - x(a));
            if cross <= T::zero() {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut values = f.to_vec();
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        let span = x(b) - x(a);
        for (i, v) in values.iter_mut().enumerate().take(b).skip(a + 1) {
            let u = (x(i) - x(a)) / span;
            *v = f[a] + (f[b] - f[a]) * u;
        }
    }
    let tol = T::c(ACTIVE_TOL) * scale;
    let verts: Vec<usize> = (0..f.len()).filter(|&i| f[i] - values[i] <= tol).collect();
    let facets = verts
        .windows(2)
        .map(|w| Facet {
            vertices: vec![w[0], w[1]],
        })
        .collect();
    let _ = grid;
    (values, facets)
}

fn envelope_2d<T: Real>(grid: &SimplexGrid<T>, f: &[T], scale: T) -> Result<(Vec<T>, Vec<Facet>)> {
    let xy: Vec<(i64, i64)> = (0..grid.len())
        .map(|i| {
            let k = grid.ints(i);
            (k[0] as i64, k[1] as i64)
        })
        .collect();
    let (e1, e2, e3) = (
        grid.vertex_id(0) as u32,
        grid.vertex_id(1) as u32,
        grid.vertex_id(2) as u32,
    );
    let mut tri = LiftedTriangulation::new(&xy, f.to_vec(), e3, e1, e2);
    let below = T::c(BELOW_TOL) * scale;
    for v in 0..grid.len() as u32 {
        if v != e1 && v != e2 && v != e3 {
            tri.insert_below(v, below)?;
        }
    }
    // hull heights at every node
    let hull_facets = sorted_facets(&tri.triangles());
    let owner = assign_nodes(grid, &hull_facets);
    let heights = tri.heights().to_vec();
    let hull_vals: Vec<T> = (0..grid.len())
        .map(|i| interpolate_on(grid, &hull_facets[owner[i]], &heights, i))
        .collect();
    let tol = T::c(ACTIVE_TOL) * scale;
    let is_vertex = tri.is_vertex();
    for v in 0..grid.len() {
        if !is_vertex[v] && f[v] - hull_vals[v] <= tol {
            tri.split_at(v as u32)?;
        }
    }
    let facets = sorted_facets(&tri.triangles());
    let owner = assign_nodes(grid, &facets);
    let heights = tri.heights();
    let values = (0..grid.len())
        .map(|i| interpolate_on(grid, &facets[owner[i]], heights, i))
        .collect();
    Ok((values, facets))
}

fn sorted_facets(tris: &[[u32; 3]]) -> Vec<Facet> {
    let mut facets: Vec<Facet> = tris
        .iter()
        .map(|t| {
            let mut v: Vec<NodeId> = t.iter().map(|&x| x as usize).collect();
            v.sort_unstable();
            Facet { vertices: v }
        })
        .collect();
    facets.sort();
    facets
}

fn interpolate_on<T: Real>(grid: &SimplexGrid<T>, facet: &Facet, z: &[T], node: NodeId) -> T {
    let v = &facet.vertices;
    if let Some(j) = v.iter().position(|&x| x == node) {
        return z[v[j]];
    }
    let xy = |id: NodeId| {
        let k = grid.ints(id);
        (k[0] as i64, k[1] as i64)
    };
    let q = xy(node);
    let (a, b, c) = (xy(v[0]), xy(v[1]), xy(v[2]));
    let d = det(a, b, c) as f64;
    T::c(det(q, b, c) as f64 / d) * z[v[0]]
        + T::c(det(a, q, c) as f64 / d) * z[v[1]]
        + T::c(det(a, b, q) as f64 / d) * z[v[2]]
}

/// Owner facet per node: the lowest-id facet whose closure contains it.
fn assign_nodes<T: Real>(grid: &SimplexGrid<T>, facets: &[Facet]) -> Vec<usize> {
    let mut owner = vec![usize::MAX; grid.len()];
    if grid.dim() == 2 {
        for (fid, fc) in facets.iter().enumerate() {
            for slot in owner
                .iter_mut()
                .take(fc.vertices[1] + 1)
                .skip(fc.vertices[0])
            {
                if *slot == usize::MAX {
                    *slot = fid;
                }
            }
        }
    } else {
        let m = grid.resolution() as i64;
        for (fid, fc) in facets.iter().enumerate() {
            let pts: Vec<(i64, i64)> = fc
                .vertices
                .iter()
                .map(|&id| {
                    let k = grid.ints(id);
                    (k[0] as i64, k[1] as i64)
                })
                .collect();
            let (a, b, c) = (pts[0], pts[1], pts[2]);
            let s = det(a, b, c).signum();
            let (x0, x1) = (a.0.min(b.0).min(c.0), a.0.max(b.0).max(c.0));
            let (y0, y1) = (a.1.min(b.1).min(c.1), a.1.max(b.1).max(c.1));
            for x in x0..=x1 {
                for y in y0..=y1.min(m - x) {
                    let q = (x, y);
                    if s * det(a, b, q) >= 0 && s * det(b, c, q) >= 0 && s * det(c, a, q) >= 0 {
                        let id = grid.id_of_head(x, y);
                        if owner[id] == usize::MAX {
                            owner[id] = fid;
                        }
                    }
                }
            }
        }
    }
    debug_assert!(
        owner.iter().all(|&o| o != usize::MAX),
        "facets must cover the lattice"
    );
    owner
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::min_tangent_second_difference;

    fn eval<F: Fn(&[f64]) -> f64>(g: &SimplexGrid<f64>, f: F) -> Vec<f64> {
        g.points().iter().map(|p| f(p.coords())).collect()
    }

    #[test]
    fn affine_function_is_its_own_envelope() {
        let g = SimplexGrid::<f64>::new(2, 100).unwrap();
        let f = eval(&g, |p| 2.0 * p[0] - 1.0);
        let env = convex_envelope(&g, &f).unwrap();
        for i in 0..g.len() {
            assert!((env.values()[i] - f[i]).abs() < 1e-12);
            assert!(env.is_active(i));
        }
        // every node is a facet vertex: a chain of unit segments
        assert_eq!(env.facets().len(), 100);
    }

    #[test]
    fn bump_vanishing_at_vertices_has_zero_envelope() {
        let g = SimplexGrid::<f64>::new(2, 200).unwrap();
        let f = eval(&g, |p| p[0] * (1.0 - p[0]));
        let env = convex_envelope(&g, &f).unwrap();
        assert!(env.values().iter().all(|v| v.abs() < 1e-15));
        assert_eq!(env.facets().len(), 1);
    }

    #[test]
    fn concave_tent_on_triangle_envelope_is_third_coordinate() {
        let g = SimplexGrid::<f64>::new(3, 30).unwrap();
        let f = eval(&g, |p| -(p[0] - p[1]).abs() + 1.0);
        let env = convex_envelope(&g, &f).unwrap();
        for (i, p) in g.points().iter().enumerate() {
            assert!((env.values()[i] - p.coords()[2]).abs() < 1e-9, "node {i}");
            let on_face = p.coords()[0] == 0.0 || p.coords()[1] == 0.0;
            assert_eq!(env.is_active(i), on_face, "node {i}");
        }
    }

    #[test]
    fn active_node_splits_trivially() {
        let g = SimplexGrid::<f64>::new(2, 20).unwrap();
        let f = eval(&g, |p| (p[0] - 0.3).powi(2));
        let env = convex_envelope(&g, &f).unwrap();
        let rule = env.splitting_at(g.point(7)).unwrap();
        assert_eq!(rule.target_ids, vec![7]);
        assert_eq!(rule.weights, vec![1.0]);
        assert!(env.node_split(7).is_identity_at(7));
    }

    #[test]
    fn flat_envelope_splits_to_vertices() {
        // 1 - p1 minorised by a function that is strictly above inside
        let g = SimplexGrid::<f64>::new(2, 50).unwrap();
        let f = eval(&g, |p| 1.0 - p[0] + 2.0 * p[0].min(p[1]));
        let env = convex_envelope(&g, &f).unwrap();
        let p = SimplexPoint::new(vec![0.3, 0.7]).unwrap();
        let rule = env.splitting_at(&p).unwrap();
        // oracle: solve λ e1 + μ e2 = p
        assert_eq!(rule.target_ids, vec![g.vertex_id(1), g.vertex_id(0)]);
        assert!((rule.weights[0] - 0.7).abs() < 1e-12);
        assert!((rule.weights[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn three_state_envelope_is_convex_and_below() {
        let g = SimplexGrid::<f64>::new(3, 16).unwrap();
        let f = eval(&g, |p| {
            (7.0 * p[0]).sin() + (5.0 * p[1] * p[2]).cos() - p[2] * p[2]
        });
        let env = convex_envelope(&g, &f).unwrap();
        let scale = env.scale();
        for i in 0..g.len() {
            assert!(env.values()[i] <= f[i] + 1e-10 * scale);
            if let Some(d2) = min_tangent_second_difference(&g, env.values(), i) {
                assert!(d2 >= -1e-9 * scale, "node {i} d2 {d2}");
            }
            let s = env.node_split(i);
            let mut bary = [0.0; 3];
            let mut val = 0.0;
            for (t, w) in s.iter() {
                assert!(env.is_active(t));
                for (b, c) in bary.iter_mut().zip(g.point(t).coords()) {
                    *b += w * c;
                }
                val += w * env.values()[t];
            }
            for (b, c) in bary.iter().zip(g.point(i).coords()) {
                assert!((b - c).abs() < 1e-12);
            }
            assert!((val - env.values()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let g = SimplexGrid::<f64>::new(2, 4).unwrap();
        let mut f = vec![0.0; 5];
        f[3] = f64::NAN;
        assert_eq!(
            convex_envelope(&g, &f).unwrap_err(),
            Error::NonFiniteInput(3)
        );
    }

    #[test]
    fn point_outside_is_rejected() {
        let g = SimplexGrid::<f64>::new(3, 4).unwrap();
        let env = convex_envelope(&g, &vec![0.0; g.len()]).unwrap();
        let bad = SimplexPoint::from_raw(vec![1.2, -0.1, -0.1]);
        assert!(matches!(
            env.splitting_at(&bad),
            Err(Error::PointOutsideSimplex(_))
        ));
    }

    #[test]
    fn single_precision_envelope() {
        let g = SimplexGrid::<f32>::new(2, 40).unwrap();
        let f: Vec<f32> = g
            .points()
            .iter()
            .map(|p| (p.coords()[0] - 0.5).abs())
            .collect();
        let env = convex_envelope(&g, &f).unwrap();
        for i in 0..g.len() {
            assert!((env.values()[i] - f[i]).abs() < 1e-6);
        }
    }
}
