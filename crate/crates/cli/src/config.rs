//! Run configuration: a flat TOML file, strictly checked.

use std::fmt;
use std::path::{Path, PathBuf};

use infogame::{load_builtin, ActionGrid, Builtin, FixtureParams, GameSpec, SimplexPoint};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Simulate,
    Match,
    Diagnose,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Solve => "solve",
            Command::Simulate => "simulate",
            Command::Match => "match",
            Command::Diagnose => "diagnose",
        })
    }
}

/// Everything a run needs. Keys absent from the file take the defaults
/// below; keys not listed here are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    /// Builtin game name; mutually exclusive with the payoff table keys.
    pub fixture: Option<String>,
    /// Number of states `I`.
    pub states: Option<usize>,
    pub horizon: Option<f64>,
    #[serde(default)]
    pub t0: f64,
    /// Defaults to the uniform prior.
    pub p0: Option<Vec<f64>>,
    #[serde(default = "defaults::steps")]
    pub n: usize,
    #[serde(default = "defaults::resolution")]
    pub m: usize,
    /// Paths or episodes.
    #[serde(default = "defaults::paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// Time knots written to the value CSV.
    #[serde(default = "defaults::knots")]
    pub knots: Vec<usize>,

    // ex1 fixture
    pub alpha_start: Option<f64>,
    pub alpha_end: Option<f64>,

    // custom payoff game: payoff[u][v][i]
    pub u_actions: Option<Vec<f64>>,
    pub v_actions: Option<Vec<f64>>,
    pub payoff: Option<Vec<Vec<Vec<f64>>>>,

    /// Classification constant for the non-revealing set; defaults to a
    /// small multiple of the Lipschitz constant of H.
    pub h_constant: Option<f64>,
    #[serde(default = "defaults::dual_half_width")]
    pub dual_half_width: f64,
    /// Dual lattice points per axis minus one; defaults to `m`.
    pub dual_resolution: Option<usize>,
    /// Knots for the conjugate residual; defaults to `0, n/2, n−1`.
    pub conjugate_knots: Option<Vec<usize>>,

    #[serde(default = "defaults::perturbations")]
    pub perturbations: Vec<String>,
    #[serde(default = "defaults::uninformed")]
    pub uninformed: Vec<String>,
    #[serde(default = "defaults::min_visits")]
    pub min_visits: u64,

    /// Restricts the checks that decide the exit status.
    pub checks: Option<Vec<String>>,
    /// Multiplier on standard errors.
    #[serde(default = "defaults::sigma")]
    pub sigma: f64,
    /// Defaults to 0.02 for ex1 and 0.01 otherwise.
    pub closed_form_tol: Option<f64>,
    #[serde(default = "defaults::slack")]
    pub perturbation_slack: f64,
    #[serde(default = "defaults::coarse")]
    pub posterior_tol: f64,
    #[serde(default = "defaults::in_h_min")]
    pub in_h_min: f64,
    #[serde(default = "defaults::coarse")]
    pub jump_tol: f64,
    #[serde(default = "defaults::conjugate_tol")]
    pub conjugate_tol: f64,
    #[serde(default = "defaults::coarse")]
    pub match_slack: f64,
    #[serde(default = "defaults::slack")]
    pub azema_tol: f64,
}

mod defaults {
    pub fn steps() -> usize {
        200
    }
    pub fn resolution() -> usize {
        200
    }
    pub fn paths() -> usize {
        100_000
    }
    pub fn knots() -> Vec<usize> {
        vec![0]
    }
    pub fn dual_half_width() -> f64 {
        4.0
    }
    pub fn perturbations() -> Vec<String> {
        ["eager", "delay", "mix:0.5"].map(String::from).to_vec()
    }
    pub fn uninformed() -> Vec<String> {
        [
            "posterior_best_response",
            "constant:0",
            "uniform",
            "clairvoyant",
        ]
        .map(String::from)
        .to_vec()
    }
    pub fn min_visits() -> u64 {
        500
    }
    pub fn sigma() -> f64 {
        3.0
    }
    pub fn slack() -> f64 {
        0.01
    }
    pub fn coarse() -> f64 {
        0.02
    }
    pub fn in_h_min() -> f64 {
        0.99
    }
    pub fn conjugate_tol() -> f64 {
        0.05
    }
}

const P0_SUM_TOL: f64 = 1e-9;

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses and validates.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            ConfigError::Parse {
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let spec = self.game()?;
        if let Some(i) = self.states {
            if i != spec.dim {
                return Err(invalid(
                    "states",
                    format!("fixture has {} states, got {i}", spec.dim),
                ));
            }
        }
        if let (Some(t), Some(_)) = (self.horizon, &self.fixture) {
            if t != spec.horizon {
                return Err(invalid(
                    "horizon",
                    format!("fixture horizon is {}, got {t}", spec.horizon),
                ));
            }
        }
        for (field, v) in [("n", self.n), ("m", self.m), ("paths", self.paths)] {
            if v == 0 {
                return Err(invalid(field, "must be positive"));
            }
        }
        if self.dual_resolution == Some(0) {
            return Err(invalid("dual_resolution", "must be positive"));
        }
        if !(self.t0.is_finite() && self.t0 >= 0.0 && self.t0 < spec.horizon) {
            return Err(invalid("t0", format!("must lie in [0, {})", spec.horizon)));
        }
        if let Some(p0) = &self.p0 {
            if p0.len() != spec.dim {
                return Err(invalid(
                    "p0",
                    format!("expected {} coordinates, got {}", spec.dim, p0.len()),
                ));
            }
            if p0.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(invalid("p0", "coordinates must be finite and nonnegative"));
            }
            let sum: f64 = p0.iter().sum();
            if (sum - 1.0).abs() > P0_SUM_TOL {
                return Err(invalid("p0", format!("coordinates sum to {sum}, not 1")));
            }
        }
        if let Some(&k) = self.knots.iter().find(|&&k| k > self.n) {
            return Err(invalid("knots", format!("knot {k} exceeds n = {}", self.n)));
        }
        if let Some(&k) = self
            .conjugate_knots
            .iter()
            .flatten()
            .find(|&&k| k >= self.n)
        {
            return Err(invalid(
                "conjugate_knots",
                format!("knot {k} must be below n = {}", self.n),
            ));
        }
        if let Some(c) = self.h_constant {
            if !(c.is_finite() && c >= 0.0) {
                return Err(invalid("h_constant", "must be finite and nonnegative"));
            }
        }
        if !(self.dual_half_width.is_finite() && self.dual_half_width > 0.0) {
            return Err(invalid("dual_half_width", "must be positive"));
        }
        for p in &self.perturbations {
            parse_perturbation(p).map_err(|m| invalid("perturbations", m))?;
        }
        for u in &self.uninformed {
            parse_uninformed(u).map_err(|m| invalid("uninformed", m))?;
        }
        let tols = [
            ("sigma", self.sigma),
            ("perturbation_slack", self.perturbation_slack),
            ("posterior_tol", self.posterior_tol),
            ("in_h_min", self.in_h_min),
            ("jump_tol", self.jump_tol),
            ("conjugate_tol", self.conjugate_tol),
            ("match_slack", self.match_slack),
            ("azema_tol", self.azema_tol),
            ("closed_form_tol", self.closed_form_tol.unwrap_or(0.0)),
        ];
        for (field, v) in tols {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(field, "must be finite and nonnegative"));
            }
        }
        Ok(())
    }

    /// The game this run plays.
    pub fn game(&self) -> Result<GameSpec<f64>, ConfigError> {
        let custom = [
            self.u_actions.is_some(),
            self.v_actions.is_some(),
            self.payoff.is_some(),
        ];
        match (&self.fixture, custom.iter().any(|&c| c)) {
            (Some(_), true) => Err(invalid(
                "fixture",
                "give either a fixture or a payoff table, not both",
            )),
            (None, false) => Err(invalid(
                "fixture",
                "missing; give a fixture name or a payoff table",
            )),
            (Some(name), false) => {
                if self.fixture_is("ex1") || self.alpha_start.is_some() || self.alpha_end.is_some()
                {
                    self.check_alpha(name)?;
                }
                let d = FixtureParams::default();
                let params = FixtureParams {
                    alpha_start: self.alpha_start.unwrap_or(d.alpha_start),
                    alpha_end: self.alpha_end.unwrap_or(d.alpha_end),
                };
                load_builtin(name, &params).map_err(|e| invalid("fixture", e.to_string()))
            }
            (None, true) => {
                let (Some(u), Some(v), Some(table)) =
                    (&self.u_actions, &self.v_actions, &self.payoff)
                else {
                    return Err(invalid(
                        "payoff",
                        "a custom game needs u_actions, v_actions and payoff",
                    ));
                };
                let dim = self
                    .states
                    .ok_or_else(|| invalid("states", "required for a custom game"))?;
                let horizon = self
                    .horizon
                    .ok_or_else(|| invalid("horizon", "required for a custom game"))?;
                let actions =
                    ActionGrid::scalar(u, v).map_err(|e| invalid("u_actions", e.to_string()))?;
                GameSpec::from_payoff_table("custom", dim, horizon, actions, table.clone())
                    .map_err(|e| invalid("payoff", e.to_string()))
            }
        }
    }

    fn check_alpha(&self, name: &str) -> Result<(), ConfigError> {
        if name != "ex1" {
            return Err(invalid(
                "alpha_start",
                "alpha parameters apply only to the ex1 fixture",
            ));
        }
        let d = FixtureParams::default();
        let (a0, a1) = (
            self.alpha_start.unwrap_or(d.alpha_start),
            self.alpha_end.unwrap_or(d.alpha_end),
        );
        if !(a0 > 2.0) {
            return Err(invalid(
                "alpha_start",
                format!("requires alpha(t) > 2 on [0, T], got {a0}"),
            ));
        }
        if !(a1 > 2.0) {
            return Err(invalid(
                "alpha_end",
                format!("requires alpha(t) > 2 on [0, T], got {a1}"),
            ));
        }
        if a1 > a0 {
            return Err(invalid(
                "alpha_end",
                format!("alpha must be nonincreasing, got {a0} -> {a1}"),
            ));
        }
        Ok(())
    }

    pub fn fixture_is(&self, name: &str) -> bool {
        self.fixture.as_deref() == Some(name)
    }

    pub fn p0_point(&self, dim: usize) -> SimplexPoint<f64> {
        let coords = self
            .p0
            .clone()
            .unwrap_or_else(|| vec![1.0 / dim as f64; dim]);
        SimplexPoint::new(coords).expect("validated")
    }

    pub fn closed_form_tol(&self, builtin: Option<Builtin>) -> f64 {
        self.closed_form_tol.unwrap_or(match builtin {
            Some(Builtin::Ex1 { .. }) => 0.02,
            _ => 0.01,
        })
    }

    pub fn conjugate_knots(&self) -> Vec<usize> {
        self.conjugate_knots.clone().unwrap_or_else(|| {
            let mut ks = vec![0, self.n / 2, self.n - 1];
            ks.dedup();
            ks
        })
    }

    pub fn check_enabled(&self, name: &str) -> bool {
        self.checks.as_ref().is_none_or(|list| {
            list.iter()
                .any(|c| name == c || name.starts_with(&format!("{c}:")))
        })
    }
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_perturbation(s: &str) -> Result<infogame::Perturbation, String> {
    use infogame::Perturbation;
    match s {
        "eager" => Ok(Perturbation::Eager),
        "delay" => Ok(Perturbation::Delay),
        _ => {
            let theta = s
                .strip_prefix("mix:")
                .and_then(|x| x.parse::<f64>().ok())
                .ok_or_else(|| format!("unknown perturbation `{s}` (eager, delay, mix:<theta>)"))?;
            if !(0.0..=1.0).contains(&theta) {
                return Err(format!("mix weight {theta} outside [0, 1]"));
            }
            Ok(Perturbation::Mix(theta))
        }
    }
}

pub fn parse_uninformed(s: &str) -> Result<infogame::UninformedStrategy, String> {
    use infogame::UninformedStrategy;
    match s {
        "posterior_best_response" => Ok(UninformedStrategy::PosteriorBestResponse),
        "uniform" => Ok(UninformedStrategy::UniformRandom),
        "clairvoyant" => Ok(UninformedStrategy::Clairvoyant),
        _ => s
            .strip_prefix("constant:")
            .and_then(|x| x.parse::<usize>().ok())
            .map(UninformedStrategy::Constant)
            .ok_or_else(|| format!("unknown strategy `{s}`")),
    }
}
