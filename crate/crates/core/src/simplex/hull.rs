//! Lower hull of lifted lattice points over the triangle Δ(3).
//!
//! Points live on the integer lattice `(k1, k2)` with `k1 + k2 <= m`, so all
//! planar orientation tests are exact integer determinants; only the lifted
//! heights are floating point.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::Real;

type Xy = (i64, i64);

#[inline]
pub(crate) fn det(a: Xy, b: Xy, c: Xy) -> i64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Triangulation of the lattice triangle whose lifted faces form a lower
/// convex surface.
pub(crate) struct LiftedTriangulation<'a, T> {
    xy: &'a [Xy],
    z: Vec<T>,
    tris: Vec<[u32; 3]>,
    alive: Vec<bool>,
    edges: HashMap<(u32, u32), usize>,
    n_alive: usize,
}

impl<'a, T: Real> LiftedTriangulation<'a, T> {
    /// Starts from the outer triangle `(a, b, c)` (any orientation).
    pub(crate) fn new(xy: &'a [Xy], z: Vec<T>, a: u32, b: u32, c: u32) -> Self {
        let mut t = Self {
            xy,
            z,
            tris: Vec::new(),
            alive: Vec::new(),
            edges: HashMap::new(),
            n_alive: 0,
        };
        if det(xy[a as usize], xy[b as usize], xy[c as usize]) > 0 {
            t.push([a, b, c]);
        } else {
            t.push([a, c, b]);
        }
        t
    }

    fn push(&mut self, tri: [u32; 3]) {
        let id = self.tris.len();
        for e in 0..3 {
            self.edges.insert((tri[e], tri[(e + 1) % 3]), id);
        }
        self.tris.push(tri);
        self.alive.push(true);
        self.n_alive += 1;
    }

    fn kill(&mut self, id: usize) {
        let tri = self.tris[id];
        for e in 0..3 {
            let key = (tri[e], tri[(e + 1) % 3]);
            if self.edges.get(&key) == Some(&id) {
                self.edges.remove(&key);
            }
        }
        self.alive[id] = false;
        self.n_alive -= 1;
    }

    fn compact(&mut self) {
        if self.tris.len() < 64 || self.n_alive * 2 > self.tris.len() {
            return;
        }
        let live: Vec<[u32; 3]> = self
            .tris
            .iter()
            .zip(&self.alive)
            .filter(|(_, &a)| a)
            .map(|(t, _)| *t)
            .collect();
        self.tris.clear();
        self.alive.clear();
        self.edges.clear();
        self.n_alive = 0;
        for t in live {
            self.push(t);
        }
    }

    fn xy_of(&self, v: u32) -> Xy {
        self.xy[v as usize]
    }

    /// Height of the plane through triangle `id` at `p`, minus `zp`.
    fn plane_gap(&self, id: usize, p: Xy, zp: T) -> T {
        let [a, b, c] = self.tris[id];
        let (pa, pb, pc) = (self.xy_of(a), self.xy_of(b), self.xy_of(c));
        let d = det(pa, pb, pc) as f64;
        let wa = det(p, pb, pc) as f64 / d;
        let wb = det(pa, p, pc) as f64 / d;
        let wc = det(pa, pb, p) as f64 / d;
        T::c(wa) * self.z[a as usize]
            + T::c(wb) * self.z[b as usize]
            + T::c(wc) * self.z[c as usize]
            - zp
    }

    fn contains(&self, id: usize, p: Xy) -> bool {
        let [a, b, c] = self.tris[id];
        let (pa, pb, pc) = (self.xy_of(a), self.xy_of(b), self.xy_of(c));
        det(pa, pb, p) >= 0 && det(pb, pc, p) >= 0 && det(pc, pa, p) >= 0
    }

    /// Inserts lattice point `v` if its lifted height lies more than `eps`
    /// below the current surface. Returns whether it was inserted.
    pub(crate) fn insert_below(&mut self, v: u32, eps: T) -> Result<bool> {
        let p = self.xy_of(v);
        let zp = self.z[v as usize];
        let mut visible: Vec<bool> = vec![false; self.tris.len()];
        let mut any = false;
        for (id, vis) in visible.iter_mut().enumerate() {
            if self.alive[id] && self.plane_gap(id, p, zp) > eps {
                *vis = true;
                any = true;
            }
        }
        if !any {
            return Ok(false);
        }
        // Grow the visible region until the fan from p over its boundary is
        // a proper triangulation.
        let horizon = loop {
            let mut horizon = Vec::new();
            let mut grow = Vec::new();
            for id in 0..self.tris.len() {
                if !visible[id] {
                    continue;
                }
                let tri = self.tris[id];
                for e in 0..3 {
                    let (a, b) = (tri[e], tri[(e + 1) % 3]);
                    let nb = self.edges.get(&(b, a)).copied();
                    if nb.is_some_and(|n| visible[n]) {
                        continue;
                    }
                    let d = det(self.xy_of(a), self.xy_of(b), p);
                    match (d.cmp(&0), nb) {
                        (std::cmp::Ordering::Greater, _) => horizon.push((a, b)),
                        (std::cmp::Ordering::Equal, None) => {}
                        (_, Some(n)) => grow.push(n),
                        (std::cmp::Ordering::Less, None) => {
                            return Err(Error::Geometry(format!(
                                "point {v} outside the lattice triangle"
                            )));
                        }
                    }
                }
            }
            if grow.is_empty() {
                break horizon;
            }
            for n in grow {
                visible[n] = true;
            }
        };
        for (id, vis) in visible.iter().enumerate() {
            if *vis {
                self.kill(id);
            }
        }
        for (a, b) in horizon {
            self.push([a, b, v]);
        }
        self.compact();
        Ok(true)
    }

    /// Splits the triangle(s) containing `v` so that `v` becomes a vertex,
    /// assigning it the interpolated height of the surface.
    pub(crate) fn split_at(&mut self, v: u32) -> Result<T> {
        let p = self.xy_of(v);
        let host = (0..self.tris.len())
            .find(|&id| self.alive[id] && self.contains(id, p))
            .ok_or_else(|| Error::Geometry(format!("no triangle contains node {v}")))?;
        let zp = self.plane_gap(host, p, T::zero());
        self.z[v as usize] = zp;
        let [a, b, c] = self.tris[host];
        let on_edge = [(a, b, c), (b, c, a), (c, a, b)]
            .into_iter()
            .find(|&(x, y, _)| det(self.xy_of(x), self.xy_of(y), p) == 0);
        match on_edge {
            None => {
                self.kill(host);
                self.push([a, b, v]);
                self.push([b, c, v]);
                self.push([c, a, v]);
            }
            Some((x, y, w)) => {
                let nb = self.edges.get(&(y, x)).copied();
                self.kill(host);
                self.push([x, v, w]);
                self.push([v, y, w]);
                if let Some(n) = nb {
                    let tri = self.tris[n];
                    let opp = *tri.iter().find(|&&q| q != x && q != y).unwrap();
                    self.kill(n);
                    self.push([y, v, opp]);
                    self.push([v, x, opp]);
                }
            }
        }
        Ok(zp)
    }

    pub(crate) fn is_vertex(&self) -> Vec<bool> {
        let mut out = vec![false; self.xy.len()];
        for (t, &a) in self.tris.iter().zip(&self.alive) {
            if a {
                for &v in t {
                    out[v as usize] = true;
                }
            }
        }
        out
    }

    pub(crate) fn triangles(&self) -> Vec<[u32; 3]> {
        self.tris
            .iter()
            .zip(&self.alive)
            .filter(|(_, &a)| a)
            .map(|(t, _)| *t)
            .collect()
    }

    pub(crate) fn heights(&self) -> &[T] {
        &self.z
    }
}
