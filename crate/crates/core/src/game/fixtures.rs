//! Builtin catalog of example games.

use std::fmt;
use std::sync::Arc;

use super::{
    ActionGrid, ControlFn, DirectHamiltonian, GameKind, GameSpec, HamiltonianFn, PayoffFn,
    PayoffGame,
};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const BUILTIN_NAMES: [&str; 5] = ["reveal", "ex1", "azema_h", "counterexample", "autonomous3"];

/// Which catalog entry a spec came from, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    /// `ℓ₁ = u + v`, `ℓ₂ = −u + 2v` on `{−1, 1}²`; `Vex H = 1 − p₁`.
    Reveal,
    /// `H = −|2p₁ − 1| + α(t) |p|₂` with `α` linear from `alpha_start` to `alpha_end`.
    Ex1 { alpha_start: f64, alpha_end: f64 },
    /// Band `½ ∓ √t` on `[0, ¼]`.
    Azema,
    /// `H = (0.7 − t) p₁ p₂`.
    Counterexample,
    /// `H = 1 − |p₁ − p₂|` on three states; `Vex H = p₃`.
    Autonomous3,
}

/// Parameters for the catalog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureParams {
    pub alpha_start: f64,
    pub alpha_end: f64,
}

impl Default for FixtureParams {
    fn default() -> Self {
        Self {
            alpha_start: 4.0,
            alpha_end: 3.0,
        }
    }
}

/// Two time-dependent curves `h₁ ≤ h₂` bounding the region where the
/// envelope of H is flat (two-state games).
#[derive(Clone)]
pub struct Band<T> {
    lower: Arc<dyn Fn(T) -> T + Send + Sync>,
    upper: Arc<dyn Fn(T) -> T + Send + Sync>,
}

impl<T> fmt::Debug for Band<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Band")
    }
}

impl<T: Real> Band<T> {
    pub fn new(
        lower: impl Fn(T) -> T + Send + Sync + 'static,
        upper: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            lower: Arc::new(lower),
            upper: Arc::new(upper),
        }
    }

    pub fn lower(&self, t: T) -> T {
        (self.lower)(t)
    }

    pub fn upper(&self, t: T) -> T {
        (self.upper)(t)
    }

    pub fn contains(&self, t: T, p: T) -> bool {
        self.lower(t) <= p && p <= self.upper(t)
    }

    /// Checks `h₁ ≤ h₂` at the given times.
    pub fn validate(&self, times: &[T]) -> Result<()> {
        for &t in times {
            if self.lower(t) > self.upper(t) {
                return Err(Error::InvalidBand(t.f64()));
            }
        }
        Ok(())
    }
}

fn ex1_alpha<T: Real>(
    alpha_start: f64,
    alpha_end: f64,
    horizon: f64,
) -> impl Fn(T) -> T + Clone + Send + Sync {
    move |t: T| T::c(alpha_start) + T::c(alpha_end - alpha_start) * t / T::c(horizon)
}

/// `−|2p − 1| + α √(p² + (1−p)²)`.
pub(crate) fn ex1_h<T: Real>(alpha: T, p1: T) -> T {
    let two = T::c(2.0);
    -(two * p1 - T::one()).abs() + alpha * (p1 * p1 + (T::one() - p1) * (T::one() - p1)).sqrt()
}

/// Half-width `1 / √(2α² − 4)` of the flat band of [`ex1_h`].
pub(crate) fn ex1_half_width<T: Real>(alpha: T) -> T {
    T::one() / (T::c(2.0) * alpha * alpha - T::c(4.0)).sqrt()
}

/// `Vex H` for the `ex1` family: H outside the band, its minimum inside.
pub(crate) fn ex1_vex_h<T: Real>(alpha: T, p1: T) -> T {
    let w = ex1_half_width(alpha);
    let half = T::c(0.5);
    if (p1 - half).abs() < w {
        ex1_h(alpha, half - w)
    } else {
        ex1_h(alpha, p1)
    }
}

fn ex1_direct<T: Real>(
    alpha: impl Fn(T) -> T + Clone + Send + Sync + 'static,
) -> DirectHamiltonian<T> {
    let a = alpha.clone();
    let hamiltonian: HamiltonianFn<T> = Arc::new(move |t, p| ex1_h(a(t), p[0]));
    // minimise u (2p − 1) over [−1, 1]; the tie at p = ½ goes to the lowest action
    let u_star: ControlFn<T> = Arc::new(|_t, p| {
        if p[0] < T::c(0.5) {
            vec![T::one()]
        } else {
            vec![-T::one()]
        }
    });
    DirectHamiltonian {
        hamiltonian,
        u_star: Some(u_star),
    }
}

fn ex1_band<T: Real>(alpha: impl Fn(T) -> T + Clone + Send + Sync + 'static) -> Band<T> {
    let a = alpha.clone();
    Band::new(
        move |t| T::c(0.5) - ex1_half_width(alpha(t)),
        move |t| T::c(0.5) + ex1_half_width(a(t)),
    )
}

/// Loads a catalog game by name.
pub fn load_builtin<T: Real>(name: &str, params: &FixtureParams) -> Result<GameSpec<T>> {
    match name {
        "reveal" => {
            let actions = ActionGrid::scalar(&[-T::one(), T::one()], &[-T::one(), T::one()])?;
            let a = actions.clone();
            let payoff: PayoffFn<T> = Arc::new(move |_t, u, v, i| {
                let (u, v) = (a.u(u)[0], a.v(v)[0]);
                if i == 0 {
                    u + v
                } else {
                    -u + T::c(2.0) * v
                }
            });
            let mut spec = GameSpec::new(
                "reveal",
                2,
                T::one(),
                GameKind::Payoff(PayoffGame { actions, payoff }),
            )?;
            spec.builtin = Some(Builtin::Reveal);
            Ok(spec)
        }
        "ex1" => {
            let FixtureParams {
                alpha_start,
                alpha_end,
            } = *params;
            if !(alpha_start > 2.0 && alpha_end > 2.0) {
                return Err(Error::InvalidParameters(format!(
                    "ex1 requires alpha(t) > 2 on [0, T]; got alpha_start={alpha_start}, alpha_end={alpha_end}"
                )));
            }
            if alpha_end > alpha_start {
                return Err(Error::InvalidParameters(
                    "ex1 requires a nonincreasing alpha".into(),
                ));
            }
            let alpha = ex1_alpha::<T>(alpha_start, alpha_end, 1.0);
            let mut spec = GameSpec::new(
                "ex1",
                2,
                T::one(),
                GameKind::Direct(ex1_direct(alpha.clone())),
            )?;
            spec.builtin = Some(Builtin::Ex1 {
                alpha_start,
                alpha_end,
            });
            spec.band = Some(ex1_band(alpha));
            Ok(spec)
        }
        "azema_h" => {
            // The ex1 family with α(t) = √(2 + 1/(2t)) has half-width √t.
            let alpha = |t: T| (T::c(2.0) + T::one() / (T::c(2.0) * t)).sqrt();
            let mut spec = GameSpec::new(
                "azema_h",
                2,
                T::c(0.25),
                GameKind::Direct(ex1_direct(alpha)),
            )?;
            spec.builtin = Some(Builtin::Azema);
            spec.band = Some(Band::new(
                |t: T| T::c(0.5) - t.sqrt(),
                |t: T| T::c(0.5) + t.sqrt(),
            ));
            Ok(spec)
        }
        "counterexample" => {
            let hamiltonian: HamiltonianFn<T> = Arc::new(|t, p| (T::c(0.7) - t) * p[0] * p[1]);
            let mut spec = GameSpec::new(
                "counterexample",
                2,
                T::one(),
                GameKind::Direct(DirectHamiltonian {
                    hamiltonian,
                    u_star: None,
                }),
            )?;
            spec.builtin = Some(Builtin::Counterexample);
            Ok(spec)
        }
        "autonomous3" => {
            let hamiltonian: HamiltonianFn<T> = Arc::new(|_t, p| T::one() - (p[0] - p[1]).abs());
            let mut spec = GameSpec::new(
                "autonomous3",
                3,
                T::one(),
                GameKind::Direct(DirectHamiltonian {
                    hamiltonian,
                    u_star: None,
                }),
            )?;
            spec.builtin = Some(Builtin::Autonomous3);
            Ok(spec)
        }
        other => Err(Error::UnknownGame(other.to_string())),
    }
}

/// `Λ(t) = ∫_t^1 (0.7 − s) ds` for the counterexample.
pub(crate) fn counterexample_lambda_integral<T: Real>(t: T) -> T {
    T::c(0.2) - T::c(0.7) * t + T::c(0.5) * t * t
}

/// Payoff realisation of the `ex1` Hamiltonian, `ℓ₁ = u + α cos v`,
/// `ℓ₂ = −u + α sin v`, on `nu` samples of `[−1, 1]` and `nv` samples of
/// `[0, 2π)`.
pub fn ex1_payoff_instance<T: Real>(
    params: &FixtureParams,
    nu: usize,
    nv: usize,
) -> Result<GameSpec<T>> {
    if nu < 2 || nv < 1 {
        return Err(Error::InvalidParameters(
            "need at least two u samples and one v sample".into(),
        ));
    }
    let u: Vec<T> = (0..nu)
        .map(|j| T::c(-1.0 + 2.0 * j as f64 / (nu - 1) as f64))
        .collect();
    let v: Vec<T> = (0..nv)
        .map(|j| T::c(std::f64::consts::TAU * j as f64 / nv as f64))
        .collect();
    let actions = ActionGrid::scalar(&u, &v)?;
    let a = actions.clone();
    let alpha = ex1_alpha::<T>(params.alpha_start, params.alpha_end, 1.0);
    let payoff: PayoffFn<T> = Arc::new(move |t, ui, vi, i| {
        let (u, v) = (a.u(ui)[0], a.v(vi)[0]);
        if i == 0 {
            u + alpha(t) * v.cos()
        } else {
            -u + alpha(t) * v.sin()
        }
    });
    GameSpec::new(
        "ex1_payoff",
        2,
        T::one(),
        GameKind::Payoff(PayoffGame { actions, payoff }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::eval_hamiltonian;
    use crate::simplex::SimplexPoint;

    #[test]
    fn ex1_value_at_center_time_zero() {
        let g = load_builtin::<f64>("ex1", &FixtureParams::default()).unwrap();
        let p = SimplexPoint::new(vec![0.5, 0.5]).unwrap();
        let s = eval_hamiltonian(&g, 0.0, &p);
        assert!((s.value - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ex1_band_at_horizon() {
        let g = load_builtin::<f64>("ex1", &FixtureParams::default()).unwrap();
        let band = g.band.as_ref().unwrap();
        assert!((band.lower(1.0) - (0.5 - 1.0 / 14f64.sqrt())).abs() < 1e-15);
        assert!((band.lower(1.0) - 0.232739).abs() < 1e-6);
        assert!((band.upper(1.0) + band.lower(1.0) - 1.0).abs() < 1e-15);
        // h1 decreasing, h2 increasing
        assert!(band.lower(0.0) > band.lower(0.5) && band.lower(0.5) > band.lower(1.0));
    }

    #[test]
    fn ex1_band_edges_are_tangency_points() {
        // H'(h1) = 0 by finite differences; H convex left of h1
        for alpha in [2.5f64, 3.0, 4.0] {
            let h1 = 0.5 - ex1_half_width(alpha);
            let d = 1e-6;
            let slope = (ex1_h(alpha, h1 + d) - ex1_h(alpha, h1 - d)) / (2.0 * d);
            assert!(slope.abs() < 1e-6, "alpha {alpha} slope {slope}");
            assert!(
                (ex1_vex_h(alpha, 0.5) - ((alpha * alpha - 2.0) / 2.0f64).sqrt()).abs() < 1e-12
            );
        }
    }

    #[test]
    fn ex1_rejects_small_alpha() {
        let bad = FixtureParams {
            alpha_start: 4.0,
            alpha_end: 2.0,
        };
        assert!(matches!(
            load_builtin::<f64>("ex1", &bad),
            Err(Error::InvalidParameters(_))
        ));
    }

    #[test]
    fn unknown_name() {
        assert_eq!(
            load_builtin::<f64>("nope", &FixtureParams::default()).unwrap_err(),
            Error::UnknownGame("nope".into())
        );
    }

    #[test]
    fn azema_band_quarter() {
        let g = load_builtin::<f64>("azema_h", &FixtureParams::default()).unwrap();
        let band = g.band.as_ref().unwrap();
        assert_eq!(band.lower(1.0 / 16.0), 0.25);
        // the ex1 half-width formula reproduces √t
        let alpha = |t: f64| (2.0 + 1.0 / (2.0 * t)).sqrt();
        for t in [0.01, 0.04, 0.2] {
            assert!((ex1_half_width(alpha(t)) - t.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn counterexample_root_by_quadrature() {
        // midpoint rule on λ(s) = 0.7 − s is exact for linear integrands
        let lam_int = |t: f64| {
            let n = 1000;
            let h = (1.0 - t) / n as f64;
            (0..n)
                .map(|j| 0.7 - (t + (j as f64 + 0.5) * h))
                .sum::<f64>()
                * h
        };
        assert!(lam_int(0.4).abs() < 1e-12);
        assert!(counterexample_lambda_integral(0.4f64).abs() < 1e-15);
        for t in [0.0, 0.3, 0.55, 0.8] {
            assert!((lam_int(t) - counterexample_lambda_integral(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn ex1_payoff_instance_approximates_direct_h() {
        let direct = load_builtin::<f64>("ex1", &FixtureParams::default()).unwrap();
        let payoff = ex1_payoff_instance::<f64>(&FixtureParams::default(), 3, 720).unwrap();
        for p1 in [0.1, 0.3, 0.5, 0.8] {
            let p = SimplexPoint::new(vec![p1, 1.0 - p1]).unwrap();
            for t in [0.0, 0.5, 1.0] {
                let a = eval_hamiltonian(&direct, t, &p).value;
                let b = eval_hamiltonian(&payoff, t, &p);
                // V sampled every 0.5 degrees: max over the circle is approached from below
                assert!(
                    a - b.value >= -1e-12 && a - b.value < 1e-3,
                    "p1={p1} t={t} {a} {}",
                    b.value
                );
                assert!(b.isaacs_gap < 1e-3);
            }
        }
    }
}
