//! Discrete Fenchel conjugate `f*(p̂) = max_p ⟨p, p̂⟩ − f(p)` on a box lattice.

use rayon::prelude::*;

use super::SimplexGrid;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform lattice on `[-L, L]^I` with `resolution` intervals per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualLattice<T> {
    pub dim: usize,
    pub half_width: T,
    pub resolution: usize,
}

impl<T: Real> DualLattice<T> {
    pub fn new(dim: usize, half_width: T, resolution: usize) -> Result<Self> {
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(Error::InvalidDualBox(half_width.f64()));
        }
        if resolution < 2 {
            return Err(Error::ResolutionTooSmall(resolution));
        }
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        Ok(Self {
            dim,
            half_width,
            resolution,
        })
    }

    pub fn points_per_axis(&self) -> usize {
        self.resolution + 1
    }

    pub fn len(&self) -> usize {
        self.points_per_axis().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> T {
        (self.half_width + self.half_width) / T::from_usize_lossy(self.resolution)
    }

    pub fn coord(&self, j: usize) -> T {
        -self.half_width + self.spacing() * T::from_usize_lossy(j)
    }

    /// Axis indices of a flat index (first axis slowest).
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let n = self.points_per_axis();
        let mut idx = vec![0; self.dim];
        for slot in idx.iter_mut().rev() {
            *slot = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let n = self.points_per_axis();
        idx.iter().fold(0, |acc, &j| acc * n + j)
    }

    pub fn point(&self, flat: usize) -> Vec<T> {
        self.multi_index(flat)
            .into_iter()
            .map(|j| self.coord(j))
            .collect()
    }
}

/// Conjugate values on a [`DualLattice`], flat-indexed.
#[derive(Debug, Clone)]
pub struct DualField<T> {
    pub lattice: DualLattice<T>,
    pub values: Vec<T>,
}

/// At each dual node `p̂`, the maximum over grid nodes `p` of `⟨p, p̂⟩ − f(p)`.
pub fn fenchel_conjugate<T: Real>(
    grid: &SimplexGrid<T>,
    f: &[T],
    lattice: DualLattice<T>,
) -> Result<DualField<T>> {
    if f.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: f.len(),
        });
    }
    if let Some(i) = f.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput(i));
    }
    if lattice.dim != grid.dim() {
        return Err(Error::InvalidParameters(
            "dual lattice dimension differs from the grid".into(),
        ));
    }
    let pts = grid.points();
    let values = (0..lattice.len())
        .into_par_iter()
        .map(|flat| {
            let q = lattice.point(flat);
            pts.iter()
                .zip(f)
                .map(|(p, &fv)| p.coords().iter().zip(&q).map(|(&a, &b)| a * b).sum::<T>() - fv)
                .fold(T::neg_infinity(), T::max)
        })
        .collect();
    Ok(DualField { lattice, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugate_of_zero_is_max_coordinate() {
        let g = SimplexGrid::<f64>::new(2, 10).unwrap();
        let lat = DualLattice::new(2, 3.0, 12).unwrap();
        let field = fenchel_conjugate(&g, &vec![0.0; g.len()], lat).unwrap();
        for (flat, v) in field.values.iter().enumerate() {
            let q = lat.point(flat);
            assert!((*v - q[0].max(q[1])).abs() <= 1e-12);
        }
    }

    #[test]
    fn conjugate_of_affine_shifts() {
        let g = SimplexGrid::<f64>::new(3, 6).unwrap();
        let c = [0.3, -1.0, 2.0];
        let f: Vec<f64> = g
            .points()
            .iter()
            .map(|p| p.coords().iter().zip(c).map(|(a, b)| a * b).sum())
            .collect();
        let lat = DualLattice::new(3, 2.0, 8).unwrap();
        let field = fenchel_conjugate(&g, &f, lat).unwrap();
        for (flat, v) in field.values.iter().enumerate() {
            let q = lat.point(flat);
            let want = (0..3)
                .map(|i| q[i] - c[i])
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugate_matches_brute_scan_for_bump() {
        let g = SimplexGrid::<f64>::new(2, 400).unwrap();
        let f: Vec<f64> = g
            .points()
            .iter()
            .map(|p| p.coords()[0] * (1.0 - p.coords()[0]))
            .collect();
        let lat = DualLattice::new(2, 1.0, 2).unwrap();
        let field = fenchel_conjugate(&g, &f, lat).unwrap();
        let at = lat.flat_index(&[2, 1]);
        assert_eq!(lat.point(at), vec![1.0, 0.0]);
        // independent scan over k/400: p1 - p1(1-p1) = p1^2, maximised at p1 = 1
        let brute = (0..=400)
            .map(|k| k as f64 / 400.0)
            .map(|x| x * x)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(brute, 1.0);
        assert!((field.values[at] - brute).abs() < 1e-15);
    }

    #[test]
    fn invalid_box_rejected() {
        assert_eq!(
            DualLattice::<f64>::new(2, 0.0, 10).unwrap_err(),
            Error::InvalidDualBox(0.0)
        );
    }
}
