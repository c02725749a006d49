//! Closed-form values of the catalog games.

use crate::error::{Error, Result};
use crate::game::fixtures::{counterexample_lambda_integral, ex1_half_width, ex1_vex_h};
use crate::game::{Builtin, GameSpec};
use crate::scalar::Real;
use crate::simplex::SimplexPoint;

/// Five-point Gauss–Legendre nodes and weights on `[-1, 1]`.
const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];
const PANELS: usize = 32;

fn gauss<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / PANELS as f64;
    let mut total = 0.0;
    for j in 0..PANELS {
        let mid = a + (j as f64 + 0.5) * h;
        total += GL5
            .iter()
            .map(|&(x, w)| w * f(mid + 0.5 * h * x))
            .sum::<f64>()
            * 0.5
            * h;
    }
    total
}

/// Counterexample band `(a, b)` where no closed form is offered.
const CEX_A: f64 = 0.4;
const CEX_B: f64 = 0.7;

/// Value of a catalog game at `(t, p)`.
///
/// `reveal`: `(T−t)(1−p₁)`; `autonomous3`: `(T−t)p₃`; `ex1`: `∫_t^T Vex H(s,p) ds`
/// by Gauss–Legendre quadrature split at the time `p` enters the flat band;
/// `counterexample`: `0` on `[0, 0.4]`, `Λ(t) p₁p₂` on `[0.7, T]`.
pub fn closed_form_value<T: Real>(spec: &GameSpec<T>, t: T, p: &SimplexPoint<T>) -> Result<T> {
    let builtin = spec
        .builtin
        .ok_or_else(|| Error::NoClosedForm(spec.name.clone()))?;
    if p.dim() != spec.dim {
        return Err(Error::InvalidPoint {
            coords: p.coords().iter().map(|c| c.f64()).collect(),
            reason: "wrong dimension",
        });
    }
    let horizon = spec.horizon.f64();
    let tf = t.f64();
    if !(0.0..=horizon).contains(&tf) {
        return Err(Error::InvalidTimeGrid(format!(
            "t={tf} outside [0, {horizon}]"
        )));
    }
    let c = p.coords();
    let value = match builtin {
        Builtin::Reveal => (horizon - tf) * (1.0 - c[0].f64()),
        Builtin::Autonomous3 => (horizon - tf) * c[2].f64(),
        Builtin::Counterexample => {
            if tf <= CEX_A {
                0.0
            } else if tf >= CEX_B {
                counterexample_lambda_integral(tf) * c[0].f64() * c[1].f64()
            } else {
                return Err(Error::OutsideClosedFormDomain {
                    fixture: spec.name.clone(),
                    t: tf,
                });
            }
        }
        Builtin::Ex1 {
            alpha_start,
            alpha_end,
        } => {
            let p1 = c[0].f64();
            let alpha = |s: f64| alpha_start + (alpha_end - alpha_start) * s / horizon;
            let integrand = |s: f64| ex1_vex_h(alpha(s), p1);
            let d = (p1 - 0.5).abs();
            // the half-width grows as α decreases; find when it reaches d
            let entry = if d == 0.0 {
                tf
            } else if alpha_start == alpha_end {
                if ex1_half_width(alpha_start) > d {
                    tf
                } else {
                    horizon
                }
            } else {
                let a_star = ((1.0 / (d * d) + 4.0) / 2.0).sqrt();
                ((alpha_start - a_star) / (alpha_start - alpha_end) * horizon).clamp(tf, horizon)
            };
            gauss(integrand, tf, entry) + gauss(integrand, entry, horizon)
        }
        Builtin::Azema => return Err(Error::NoClosedForm(spec.name.clone())),
    };
    Ok(T::c(value))
}
