//! JSON run report. Field order is fixed by the struct definitions and
//! headline keys are sorted, so equal runs serialize to equal bytes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Command, RunConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub relation: Relation,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, observed: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            relation: Relation::AtMost,
            limit,
            passed: observed <= limit,
        }
    }

    pub fn at_least(name: impl Into<String>, observed: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            relation: Relation::AtLeast,
            limit,
            passed: observed >= limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: Command,
    pub config_hash: String,
    pub game: String,
    pub seed: u64,
    pub headline: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn new(command: Command, config: &RunConfig, game: &str) -> Self {
        Self {
            command,
            config_hash: config_hash(config),
            game: game.to_string(),
            seed: config.seed,
            headline: BTreeMap::new(),
            checks: Vec::new(),
            passed: true,
            artifacts: Vec::new(),
        }
    }

    pub fn headline(&mut self, key: &str, value: f64) {
        self.headline.insert(key.to_string(), value);
    }

    /// Records `check`; it decides the outcome only if the configuration
    /// enables it.
    pub fn check(&mut self, config: &RunConfig, check: Check) {
        if config.check_enabled(&check.name) {
            self.passed &= check.passed;
            self.checks.push(check);
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_file(&dir.join("report.json"), &self.to_json())
    }
}

/// SHA-256 of the resolved configuration (output directory excluded).
pub fn config_hash(config: &RunConfig) -> String {
    let body = serde_json::to_string(config).expect("config serializes");
    Sha256::digest(body.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub command: Command,
    pub wall_clock_seconds: f64,
    pub threads: usize,
}
