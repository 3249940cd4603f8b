//! Experiment configuration: a JSON file, command-line flags, or both.
//!
//! Every field has a flag of the same name (underscores become dashes).
//! Flags override file fields. The seed falls back to `GWTAILS_SEED` and
//! then to 0 when neither the file nor the flags set it.

use std::fmt;
use std::str::FromStr;

use gwtails_core::asymptotics::{Horizon, Method};
use gwtails_core::estimators::EstimatorKind;
use gwtails_core::math::geometric_grid;
use gwtails_core::simulator::MAX_POPULATION;
use gwtails_core::{LawSpec, OffspringLaw};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const SEED_ENV: &str = "GWTAILS_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Estimate,
    Approximate,
    Diagnose,
    Bound,
    Compare,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Estimate => "estimate",
            Command::Approximate => "approximate",
            Command::Diagnose => "diagnose",
            Command::Bound => "bound",
            Command::Compare => "compare",
        }
    }
}

/// Threshold values, listed or geometric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum XGrid {
    List(Vec<f64>),
    Geometric(GeometricGrid),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricGrid {
    pub start: f64,
    pub factor: f64,
    pub count: usize,
}

impl Default for XGrid {
    fn default() -> Self {
        XGrid::List(Vec::new())
    }
}

impl XGrid {
    /// The grid values; geometric grids are `start · factor^i`.
    pub fn values(&self) -> Vec<f64> {
        match self {
            XGrid::List(v) => v.clone(),
            XGrid::Geometric(g) if g.count == 0 => Vec::new(),
            XGrid::Geometric(g) => geometric_grid(g.start, g.start * g.factor.powi(g.count as i32 - 1), g.count),
        }
    }
}

/// Serde adapter writing horizons as integers or `"inf"`.
mod horizons {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Finite(usize),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[Horizon], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<Raw> = v
            .iter()
            .map(|h| match h {
                Horizon::Finite(n) => Raw::Finite(*n),
                Horizon::Infinite => Raw::Text("inf".into()),
            })
            .collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Horizon>, D::Error> {
        let raw = Vec::<Raw>::deserialize(d)?;
        raw.into_iter()
            .map(|r| match r {
                Raw::Finite(n) => Ok(Horizon::Finite(n)),
                Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    /// Offspring law, e.g. `tuned(pareto(alpha=2), m=2)`.
    pub law: String,
    #[serde(with = "horizons", default = "default_n")]
    pub n: Vec<Horizon>,
    #[serde(default)]
    pub x: XGrid,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 means one per logical core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub eps: f64,
    /// Approximation method for `approximate` and `compare`.
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_estimator")]
    pub estimator: String,
    /// `chebyshev`, `22` or `23`.
    #[serde(default = "default_prop")]
    pub prop: String,
    /// `m`, `2m` or a number; the summand is `ξ − shift`.
    #[serde(default = "default_shift")]
    pub shift: String,
    /// Truncation level as a fraction of `x` in `bound`.
    #[serde(default = "default_y_ratio")]
    pub y_ratio: f64,
    /// Fixed Chebyshev parameter; `2R(x)/x` when absent.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Constant in the range conditions of the bounds.
    #[serde(default = "default_range_c")]
    pub range_c: f64,
    /// Continuations per weighted prefix in the big-jump estimator.
    #[serde(default = "default_one")]
    pub continuations: u64,
    /// Constant `A` of the variance lower bound.
    #[serde(default = "default_lower_a")]
    pub lower_a: f64,
    /// Matuszewska exponent for `diagnose`.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Insensitivity exponent for `diagnose`.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_cap")]
    pub population_cap: u64,
    /// Event tracking for `simulate`, written `x=X,eps=E` on the command line.
    #[serde(default)]
    pub track_events: Option<TrackEvents>,
    /// `simulate` writes per-generation moments of `W_k` instead of paths.
    #[serde(default)]
    pub summary: bool,
    /// Class checked by `diagnose`, or `all`.
    #[serde(default = "default_check")]
    pub check: String,
    /// Top of the `diagnose` grid.
    #[serde(default = "default_grid_max")]
    pub grid_max: f64,
    /// CSV path; the manifest goes next to it. Standard output when absent.
    #[serde(default)]
    pub out: Option<String>,
}

fn default_n() -> Vec<Horizon> {
    vec![Horizon::Finite(1)]
}
fn default_replicas() -> u64 {
    10_000
}
fn default_method() -> String {
    "series".into()
}
fn default_estimator() -> String {
    "naive".into()
}
fn default_prop() -> String {
    "chebyshev".into()
}
fn default_shift() -> String {
    "m".into()
}
fn default_y_ratio() -> f64 {
    0.5
}
fn default_range_c() -> f64 {
    8.0
}
fn default_one() -> u64 {
    1
}
fn default_lower_a() -> f64 {
    10.0
}
fn default_delta() -> f64 {
    0.1
}
fn default_gamma() -> f64 {
    0.5
}
fn default_check() -> String {
    "all".into()
}
fn default_grid_max() -> f64 {
    (1u64 << 20) as f64
}
fn default_cap() -> u64 {
    MAX_POPULATION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackEvents {
    pub x: f64,
    #[serde(default)]
    pub eps: f64,
}

impl FromStr for TrackEvents {
    type Err = ConfigError;

    /// Parses `x=X` or `x=X,eps=E`.
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let bad = || ConfigError::Invalid(format!("track-events must look like x=X,eps=E, got `{s}`"));
        let (mut x, mut eps) = (None, 0.0);
        for part in s.split(',') {
            let (key, value) = part.split_once('=').ok_or_else(bad)?;
            let value: f64 = value.trim().parse().map_err(|_| bad())?;
            match key.trim() {
                "x" => x = Some(value),
                "eps" => eps = value,
                _ => return Err(bad()),
            }
        }
        Ok(TrackEvents {
            x: x.ok_or_else(bad)?,
            eps,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// Malformed JSON or an unknown field, with its position.
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, column, message } => {
                write!(f, "config error at line {line}, column {column}: {message}")
            }
            ConfigError::Invalid(m) => write!(f, "invalid config: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn syntax(e: serde_json::Error) -> ConfigError {
    ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// The summand shift of the `bound` subcommand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shift {
    Mean,
    TwiceMean,
    Value(f64),
}

impl FromStr for Shift {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.trim() {
            "m" => Ok(Shift::Mean),
            "2m" => Ok(Shift::TwiceMean),
            t => t
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Shift::Value)
                .ok_or_else(|| ConfigError::Invalid(format!("shift must be m, 2m or a number, got `{t}`"))),
        }
    }
}

impl Shift {
    pub fn value(&self, mean: f64) -> f64 {
        match *self {
            Shift::Mean => mean,
            Shift::TwiceMean => 2.0 * mean,
            Shift::Value(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Chebyshev,
    Prop22,
    Prop23,
}

impl FromStr for BoundKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "chebyshev" => Ok(BoundKind::Chebyshev),
            "22" => Ok(BoundKind::Prop22),
            "23" => Ok(BoundKind::Prop23),
            _ => Err(ConfigError::Invalid(format!(
                "prop must be chebyshev, 22 or 23, got `{s}`"
            ))),
        }
    }
}

impl BoundKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundKind::Chebyshev => "chebyshev",
            BoundKind::Prop22 => "22",
            BoundKind::Prop23 => "23",
        }
    }
}

impl ExperimentConfig {
    pub fn new(command: Command, law: impl Into<String>) -> Self {
        ExperimentConfig {
            command,
            law: law.into(),
            n: default_n(),
            x: XGrid::default(),
            replicas: default_replicas(),
            seed: 0,
            workers: 0,
            eps: 0.0,
            method: default_method(),
            estimator: default_estimator(),
            prop: default_prop(),
            shift: default_shift(),
            y_ratio: default_y_ratio(),
            lambda: None,
            range_c: default_range_c(),
            continuations: default_one(),
            lower_a: default_lower_a(),
            delta: default_delta(),
            gamma: default_gamma(),
            population_cap: default_cap(),
            track_events: None,
            summary: false,
            check: default_check(),
            grid_max: default_grid_max(),
            out: None,
        }
    }

    /// Parses a JSON config. A missing `seed` takes `env_seed`, then 0.
    pub fn from_json(text: &str, env_seed: Option<u64>) -> Result<Self, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(syntax)?;
        let has_seed = value.get("seed").is_some();
        let mut config: ExperimentConfig = serde_json::from_str(text).map_err(syntax)?;
        if !has_seed {
            config.seed = env_seed.unwrap_or(0);
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn law_spec(&self) -> Result<LawSpec, gwtails_core::Error> {
        self.law.parse()
    }

    pub fn build_law(&self) -> Result<OffspringLaw, gwtails_core::Error> {
        self.law_spec()?.build()
    }

    pub fn x_values(&self) -> Vec<f64> {
        self.x.values()
    }

    pub fn method_tag(&self) -> Result<Method, gwtails_core::Error> {
        self.method.parse()
    }

    pub fn estimator_tag(&self) -> Result<EstimatorKind, gwtails_core::Error> {
        self.estimator.parse()
    }

    pub fn bound_kind(&self) -> Result<BoundKind, ConfigError> {
        self.prop.parse()
    }

    pub fn shift_value(&self) -> Result<Shift, ConfigError> {
        self.shift.parse()
    }

    /// The finite horizons, rejecting `inf`.
    pub fn finite_n(&self) -> Result<Vec<usize>, ConfigError> {
        self.n
            .iter()
            .map(|h| match h {
                Horizon::Finite(n) => Ok(*n),
                Horizon::Infinite => Err(ConfigError::Invalid(format!(
                    "`{}` needs finite horizons",
                    self.command.as_str()
                ))),
            })
            .collect()
    }

    /// Field-level checks that do not need the law.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.n.is_empty() {
            return invalid("n must list at least one horizon".into());
        }
        if self.replicas < 1 {
            return invalid("replicas must be at least 1".into());
        }
        if let XGrid::Geometric(g) = &self.x {
            if !(g.start > 0.0 && g.factor > 1.0 && g.start.is_finite() && g.factor.is_finite()) {
                return invalid("a geometric grid needs start > 0 and factor > 1".into());
            }
        }
        let xs = self.x_values();
        if xs.iter().any(|x| !x.is_finite()) {
            return invalid("x values must be finite".into());
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("x values must be strictly increasing".into());
        }
        let needs_x = !matches!(self.command, Command::Simulate | Command::Diagnose);
        if xs.is_empty() && needs_x {
            return invalid(format!("`{}` needs at least one x value", self.command.as_str()));
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return invalid("eps must be nonnegative".into());
        }
        if !(self.y_ratio > 0.0 && self.y_ratio < 1.0) {
            return invalid("y_ratio must lie in (0, 1)".into());
        }
        if let Some(t) = &self.track_events {
            if !(t.x > 0.0 && t.x.is_finite() && t.eps >= 0.0 && t.eps.is_finite()) {
                return invalid("track_events needs x > 0 and eps >= 0".into());
            }
        }
        if !(self.grid_max.is_finite() && self.grid_max >= 16.0) {
            return invalid("grid_max must be at least 16".into());
        }
        if self.continuations < 1 {
            return invalid("continuations must be at least 1".into());
        }
        self.bound_kind()?;
        self.shift_value()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_grid_values() {
        let g = XGrid::Geometric(GeometricGrid {
            start: 50.0,
            factor: 2.0,
            count: 8,
        });
        let v = g.values();
        let want = [50.0, 100.0, 200.0, 400.0, 800.0, 1600.0, 3200.0, 6400.0];
        assert_eq!(v.len(), 8);
        for (a, b) in v.iter().zip(want) {
            assert!((a - b).abs() < 1e-9 * b);
        }
    }

    #[test]
    fn unknown_fields_are_rejected_with_position() {
        let text = "{\n  \"command\": \"estimate\",\n  \"law\": \"pareto(alpha=2)\",\n  \"replica\": 5\n}";
        match ExperimentConfig::from_json(text, None) {
            Err(ConfigError::Syntax { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("replica"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seed_fallbacks() {
        let text = r#"{"command": "simulate", "law": "pareto(alpha=2)"}"#;
        assert_eq!(ExperimentConfig::from_json(text, None).unwrap().seed, 0);
        assert_eq!(ExperimentConfig::from_json(text, Some(9)).unwrap().seed, 9);
        let text = r#"{"command": "simulate", "law": "pareto(alpha=2)", "seed": 3}"#;
        assert_eq!(ExperimentConfig::from_json(text, Some(9)).unwrap().seed, 3);
    }

    #[test]
    fn horizons_accept_inf() {
        let text = r#"{"command": "approximate", "law": "pareto(alpha=2)", "n": [3, "inf"], "x": [1.0]}"#;
        let c = ExperimentConfig::from_json(text, None).unwrap();
        assert_eq!(c.n, [Horizon::Finite(3), Horizon::Infinite]);
        assert!(c.to_json().contains("\"inf\""));
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::new(Command::Estimate, "pareto(alpha=2)");
        assert!(c.validate().is_err());
        c.x = XGrid::List(vec![1.0, 2.0]);
        assert!(c.validate().is_ok());
        c.x = XGrid::List(vec![2.0, 1.0]);
        assert!(c.validate().is_err());
        c.x = XGrid::List(vec![1.0]);
        c.shift = "3m".into();
        assert!(c.validate().is_err());
    }
}
