//! Exact optimal process for two-state games whose value is flat on a band
//! `[h₁(t), h₂(t)]`: constant until the band reaches `p₀`, then carried by the
//! two band edges.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{Band, Builtin, GameSpec};
use crate::scalar::{MeanSe, Real};
use crate::value::TimeGrid;

/// Position of the exact process relative to the band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    /// Still at `p₀`, before the band reaches it.
    Hold,
    Lower,
    Upper,
}

/// `p₁(t_k)` for `k = 0..=n` with the edge occupied at each knot.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPath<T> {
    pub values: Vec<T>,
    pub edges: Vec<Edge>,
    /// Index of the terminal vertex (0 for `e₁`).
    pub terminal: usize,
}

#[derive(Debug, Clone)]
pub struct ExactSampler<T> {
    band: Band<T>,
    time: TimeGrid<T>,
    p0: T,
    seed: u64,
}

impl<T: Real> ExactSampler<T> {
    /// Fails with `InvalidBand` if `h₁ > h₂` at some knot.
    pub fn new(band: Band<T>, time: TimeGrid<T>, p0: T, seed: u64) -> Result<Self> {
        if !(p0 >= T::zero() && p0 <= T::one()) {
            return Err(Error::InvalidPoint {
                coords: vec![p0.f64()],
                reason: "p0 must lie in [0, 1]",
            });
        }
        band.validate(&time.knots())?;
        Ok(Self {
            band,
            time,
            p0,
            seed,
        })
    }

    pub fn time_grid(&self) -> &TimeGrid<T> {
        &self.time
    }

    pub fn p0(&self) -> T {
        self.p0
    }

    pub fn path(&self, j: usize) -> ExactPath<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(j as u64);
        let n = self.time.steps();
        let mut values = Vec::with_capacity(n + 1);
        let mut edges = Vec::with_capacity(n + 1);
        let mut edge = Edge::Hold;
        let mut x = self.p0;
        let mut prev_t = self.time.t0();
        for k in 0..=n {
            let t = self.time.knot(k);
            let (lo, hi) = (self.band.lower(t), self.band.upper(t));
            match edge {
                Edge::Hold => {
                    if lo <= x && x <= hi {
                        // split barycentrically onto the edges
                        let down = if hi > lo {
                            ((hi - x) / (hi - lo)).f64()
                        } else {
                            1.0
                        };
                        edge = if rng.gen::<f64>() < down {
                            Edge::Lower
                        } else {
                            Edge::Upper
                        };
                    }
                }
                Edge::Lower | Edge::Upper if hi > lo => {
                    let (from_lo, from_hi) = (self.band.lower(prev_t), self.band.upper(prev_t));
                    let stay = match edge {
                        Edge::Lower => (hi - from_lo) / (hi - lo),
                        _ => (from_hi - lo) / (hi - lo),
                    };
                    if rng.gen::<f64>() >= stay.f64().clamp(0.0, 1.0) {
                        edge = if edge == Edge::Lower {
                            Edge::Upper
                        } else {
                            Edge::Lower
                        };
                    }
                }
                _ => {}
            }
            x = match edge {
                Edge::Hold => x,
                Edge::Lower => lo,
                Edge::Upper => hi,
            };
            values.push(x);
            edges.push(edge);
            prev_t = t;
        }
        let terminal = if rng.gen::<f64>() < x.f64() { 0 } else { 1 };
        ExactPath {
            values,
            edges,
            terminal,
        }
    }

    /// Applies `f` to paths `0..count` in parallel; results in path order.
    pub fn map<R, F>(&self, count: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(&ExactPath<T>) -> R + Sync + Send,
    {
        (0..count)
            .into_par_iter()
            .map(|j| f(&self.path(j)))
            .collect()
    }

    pub fn sample(&self, count: usize) -> Vec<ExactPath<T>> {
        self.map(count, |p| p.clone())
    }
}

/// Fraction of single transitions `s → t` started on `h₁(s)` that stay on
/// the lower edge.
pub fn stay_probability_estimate<T: Real>(
    band: &Band<T>,
    s: T,
    t: T,
    count: usize,
    seed: u64,
) -> Result<MeanSe<T>> {
    if count == 0 {
        return Err(Error::EmptySample);
    }
    let sampler = ExactSampler::new(band.clone(), TimeGrid::new(s, t, 1)?, band.lower(s), seed)?;
    let hits = sampler.map(count, |p| {
        if p.edges[1] == Edge::Lower {
            T::one()
        } else {
            T::zero()
        }
    });
    Ok(MeanSe::from_samples(&hits))
}

/// Mean structure-equation residual and mean quadratic variation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AzemaResidual<T> {
    /// `Σ(ΔX)² − (T − t₀) + 2 Σ X_{k−1} ΔX_k` with `X = p − ½`.
    pub residual: MeanSe<T>,
    /// `Σ(ΔX)²`.
    pub quadratic_variation: MeanSe<T>,
}

/// Discrete residual of `d[X] = dt − 2X(t⁻)dX` on paths of the sampler.
pub fn azema_structure_residual<T: Real>(
    spec: &GameSpec<T>,
    sampler: &ExactSampler<T>,
    count: usize,
) -> Result<AzemaResidual<T>> {
    if spec.builtin != Some(Builtin::Azema) {
        return Err(Error::WrongFixture(format!("got `{}`", spec.name)));
    }
    let tg = sampler.time_grid();
    let half = T::c(0.5);
    if tg.t0() != T::zero() || tg.horizon() != spec.horizon || sampler.p0() != half {
        return Err(Error::WrongFixture(
            "needs t0 = 0, T = 1/4 and p0 = 1/2".into(),
        ));
    }
    if count == 0 {
        return Err(Error::EmptySample);
    }
    let span = tg.horizon() - tg.t0();
    let per_path = sampler.map(count, |p| {
        let mut qv = T::zero();
        let mut integral = T::zero();
        for w in p.values.windows(2) {
            let (a, b) = (w[0] - half, w[1] - half);
            qv += (b - a) * (b - a);
            integral += a * (b - a);
        }
        (qv - span + integral + integral, qv)
    });
    let (res, qv): (Vec<T>, Vec<T>) = per_path.into_iter().unzip();
    Ok(AzemaResidual {
        residual: MeanSe::from_samples(&res),
        quadratic_variation: MeanSe::from_samples(&qv),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{load_builtin, FixtureParams};

    fn azema() -> (GameSpec<f64>, Band<f64>) {
        let spec = load_builtin::<f64>("azema_h", &FixtureParams::default()).unwrap();
        let band = spec.band.clone().unwrap();
        (spec, band)
    }

    #[test]
    fn stay_probability_azema() {
        let (_, band) = azema();
        let est = stay_probability_estimate(&band, 0.01, 0.04, 100_000, 4).unwrap();
        assert!(est.within(0.75, 3.0), "{est:?}");
    }

    #[test]
    fn vertex_start_is_constant() {
        let spec = load_builtin::<f64>("ex1", &FixtureParams::default()).unwrap();
        let s = ExactSampler::new(
            spec.band.unwrap(),
            TimeGrid::new(0.0, 1.0, 50).unwrap(),
            0.0,
            1,
        )
        .unwrap();
        for p in s.sample(100) {
            assert!(p.values.iter().all(|&x| x == 0.0));
            assert_eq!(p.terminal, 1);
        }
    }

    #[test]
    fn exact_sampler_is_a_martingale() {
        let spec = load_builtin::<f64>("ex1", &FixtureParams::default()).unwrap();
        let s = ExactSampler::new(
            spec.band.unwrap(),
            TimeGrid::new(0.0, 1.0, 40).unwrap(),
            0.3,
            9,
        )
        .unwrap();
        let paths = s.sample(100_000);
        // 4·SE: forty correlated knots are tested at once
        for k in 0..=40 {
            let xs: Vec<f64> = paths.iter().map(|p| p.values[k]).collect();
            let ms = MeanSe::from_samples(&xs);
            assert!((ms.mean - 0.3).abs() <= 4.0 * ms.se + 1e-12, "k={k} {ms:?}");
        }
        // held until the band reaches 0.3, then on an edge
        let first = paths[0]
            .edges
            .iter()
            .position(|&e| e != Edge::Hold)
            .unwrap();
        let t = s.time_grid().knot(first);
        assert!(t > 0.15 && t < 0.25, "entry time {t}");
    }

    #[test]
    fn azema_residual_vanishes() {
        let (spec, band) = azema();
        let s = ExactSampler::new(band, TimeGrid::new(0.0, 0.25, 200).unwrap(), 0.5, 3).unwrap();
        let r = azema_structure_residual(&spec, &s, 2000).unwrap();
        assert!(r.residual.mean.abs() < 1e-12);
        assert!(r.quadratic_variation.within(0.25, 3.0), "{r:?}");
        let ex1 = load_builtin::<f64>("ex1", &FixtureParams::default()).unwrap();
        assert!(matches!(
            azema_structure_residual(&ex1, &s, 10),
            Err(Error::WrongFixture(_))
        ));
    }

    #[test]
    fn increments_of_a_jump() {
        // a jump from −√s to +√t contributes (√t + √s)²
        let (s, t) = (0.01f64, 0.04f64);
        let (a, b) = (-s.sqrt(), t.sqrt());
        assert!(((b - a) * (b - a) - (t.sqrt() + s.sqrt()).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn inverted_band_rejected() {
        let band = Band::new(|_t: f64| 0.6, |_t: f64| 0.4);
        let err = ExactSampler::new(band, TimeGrid::new(0.0, 1.0, 4).unwrap(), 0.5, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidBand(_)));
    }
}
