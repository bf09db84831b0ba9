//! Experiment configuration: JSON parsing and validation.
//!
//! Validation failures on a parsed file name the line and column of the offending key.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dv::Mitigation;
use crate::error::{Error, Result};
use crate::qubit::{NoiseModel, ZneLevels};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Gep,
    Cv,
    Dv,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Gep => "gep",
            Mode::Cv => "cv",
            Mode::Dv => "dv",
        })
    }
}

/// A scalar or a list of scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Which normal modes carry squeezing: `"all"`, `"default"` or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SqueezedModes {
    Named(ModeSet),
    List(BTreeSet<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSet {
    All,
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub ro_flip: f64,
    #[serde(default)]
    pub cnot_p: f64,
}

impl NoiseConfig {
    pub fn model(&self) -> NoiseModel {
        NoiseModel::symmetric(self.ro_flip, self.cnot_p)
    }

    pub fn is_ideal(&self) -> bool {
        self.ro_flip == 0.0 && self.cnot_p == 0.0
    }
}

/// Error mitigation for qubit runs. `readout_zne` folds to {1,3,5,7,9} CNOTs,
/// `readout_zne3` to {1,3,5}; both extrapolate linearly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MitigationKind {
    None,
    Readout,
    ReadoutZne,
    ReadoutZne3,
}

impl MitigationKind {
    pub fn to_mitigation(self) -> Mitigation {
        match self {
            MitigationKind::None => Mitigation::None,
            MitigationKind::Readout => Mitigation::Readout,
            MitigationKind::ReadoutZne => Mitigation::ReadoutZne { levels: ZneLevels::Five, order: 1 },
            MitigationKind::ReadoutZne3 => Mitigation::ReadoutZne { levels: ZneLevels::Three, order: 1 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_bootstrap", rename = "bootstrap_B")]
    pub bootstrap_b: usize,
}

fn default_order() -> usize {
    1
}

fn default_bootstrap() -> usize {
    1000
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { order: default_order(), bootstrap_b: default_bootstrap() }
    }
}

/// One experiment. Unset keys take mode-dependent defaults, resolved by the runner and
/// echoed in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<OneOrMany<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<OneOrMany<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_tilde: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    /// Shots per circuit during optimization; unset means exact expectation values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    /// Shots per circuit for the final evaluation at the optimum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub squeezed_modes: Option<SqueezedModes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mitigation: Option<MitigationKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
    /// CSV of sweep records read by `fit crossing`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    /// Output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

/// A validation failure tied to a (possibly nested) key.
#[derive(Debug, Clone, PartialEq)]
struct Issue {
    key: &'static str,
    message: String,
}

fn issue(key: &'static str, message: impl Into<String>) -> Issue {
    Issue { key, message: message.into() }
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            sites: None,
            m: None,
            lambda_tilde: None,
            cutoff: None,
            shots: None,
            final_shots: None,
            seed: None,
            squeezed_modes: None,
            shift_s: None,
            noise: None,
            mitigation: None,
            fit: None,
            input: None,
            output: None,
        }
    }

    /// Parses and validates a JSON config. Both syntax and validation errors carry the
    /// line and column in `text`.
    pub fn from_json(text: &str) -> Result<Self> {
        // serde_json messages already end in "at line L column C"
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check().map_err(|i| match locate(text, i.key) {
            Some((line, col)) => Error::Config(format!("{}: {} at line {line} column {col}", i.key, i.message)),
            None => Error::Config(format!("{}: {}", i.key, i.message)),
        })?;
        Ok(cfg)
    }

    /// Validates a config built without a source text (for example from CLI flags).
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|i| Error::Config(format!("{}: {}", i.key, i.message)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn check(&self) -> std::result::Result<(), Issue> {
        if let Some(s) = &self.sites {
            let v = s.to_vec();
            if v.is_empty() {
                return Err(issue("L", "needs at least one lattice size"));
            }
            if let Some(l) = v.iter().find(|&&l| l < 2 || l % 2 == 1) {
                return Err(issue("L", format!("lattice size must be even and at least 2, got {l}")));
            }
        }
        if let Some(m) = &self.m {
            let v = m.to_vec();
            if v.is_empty() {
                return Err(issue("m", "needs at least one mass"));
            }
            if let Some(x) = v.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
                return Err(issue("m", format!("mass must be positive and finite, got {x}")));
            }
        }
        if let Some(g) = &self.lambda_tilde {
            if g.is_empty() {
                return Err(issue("lambda_tilde", "grid is empty"));
            }
            if let Some(x) = g.iter().find(|&&x| !(x >= 0.0 && x.is_finite())) {
                return Err(issue("lambda_tilde", format!("couplings must be non-negative and finite, got {x}")));
            }
            if g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(issue("lambda_tilde", "grid must be strictly increasing"));
            }
        }
        if let Some(c) = self.cutoff {
            if !(4..=256).contains(&c) {
                return Err(issue("cutoff", format!("cutoff must lie in 4..=256, got {c}")));
            }
        }
        if self.shots == Some(0) {
            return Err(issue("shots", "must be positive"));
        }
        if self.final_shots == Some(0) {
            return Err(issue("final_shots", "must be positive"));
        }
        if self.final_shots.is_some() && self.shots.is_none() {
            return Err(issue("final_shots", "requires shots"));
        }
        if self.shots.is_some() && self.seed.is_none() {
            return Err(issue("seed", "a seed is required when sampling"));
        }
        if let Some(s) = self.shift_s {
            if !(s > 0.0 && s.is_finite()) {
                return Err(issue("shift_s", format!("must be positive, got {s}")));
            }
        }
        if let Some(n) = self.noise {
            for (key, p, max) in [("ro_flip", n.ro_flip, 0.5), ("cnot_p", n.cnot_p, 1.0)] {
                if !(p >= 0.0 && p < max) {
                    return Err(issue(key, format!("must lie in [0, {max}), got {p}")));
                }
            }
        }
        if let Some(f) = self.fit {
            if !(1..=2).contains(&f.order) {
                return Err(issue("order", format!("fit order must be 1 or 2, got {}", f.order)));
            }
        }
        if self.mode != Mode::Dv && (self.noise.is_some() || self.mitigation.is_some()) {
            let key = if self.noise.is_some() { "noise" } else { "mitigation" };
            return Err(issue(key, format!("only applies to mode dv, not {}", self.mode)));
        }
        if self.mode == Mode::Gep
            && (self.shots.is_some() || self.cutoff.is_some() || self.squeezed_modes.is_some() || self.shift_s.is_some())
        {
            let key = ["shots", "cutoff", "squeezed_modes", "shift_s"]
                .into_iter()
                .zip([self.shots.is_some(), self.cutoff.is_some(), self.squeezed_modes.is_some(), self.shift_s.is_some()])
                .find(|(_, set)| *set)
                .map(|(k, _)| k)
                .unwrap_or("mode");
            return Err(issue(key, "does not apply to mode gep"));
        }
        if self.mode == Mode::Dv && (self.cutoff.is_some() || self.shift_s.is_some()) {
            let key = if self.cutoff.is_some() { "cutoff" } else { "shift_s" };
            return Err(issue(key, "does not apply to mode dv; the qubit encoding is fixed"));
        }
        Ok(())
    }
}

/// Line and column (1-based) of the first `"key"` used as an object key in `text`.
fn locate(text: &str, key: &str) -> Option<(usize, usize)> {
    let needle = format!("\"{key}\"");
    let mut from = 0;
    while let Some(pos) = text[from..].find(&needle) {
        let at = from + pos;
        let rest = text[at + needle.len()..].trim_start();
        if rest.starts_with(':') {
            let line = text[..at].matches('\n').count() + 1;
            let col = at - text[..at].rfind('\n').map_or(0, |n| n + 1) + 1;
            return Some((line, col));
        }
        from = at + needle.len();
    }
    None
}
