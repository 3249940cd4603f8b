//! Command-line parsing and merging with config files.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gwtails_core::asymptotics::Horizon;

use crate::config::{Command, ConfigError, ExperimentConfig, GeometricGrid, TrackEvents, XGrid, SEED_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "gwtails",
    version,
    about = "Tail probabilities of supercritical Galton-Watson processes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Simulate paths (one CSV row per replica and generation), or
    /// per-generation moments of W_k with --summary.
    Simulate(Flags),
    /// Estimate P{W_n > x} with the naive, big-jump or exact estimator.
    Estimate(Flags),
    /// Evaluate a tail approximation over an (n, x) grid.
    Approximate(Flags),
    /// Check tail-class conditions on a grid; writes a JSON report.
    Diagnose(Flags),
    /// Evaluate large-deviation bounds for sums of centered offspring counts.
    Bound(Flags),
    /// Divide estimates by an approximation over an (n, x) grid.
    Compare(Flags),
    /// Run the subcommand named in a config file.
    Run(Flags),
}

/// Every config field as a flag. Flags override `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Offspring law, e.g. "tuned(pareto(alpha=2), m=2)".
    #[arg(long)]
    pub law: Option<String>,
    /// Horizons, comma separated; `inf` where supported.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<Horizon>>,
    /// Thresholds, comma separated and strictly increasing.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "x_geo")]
    pub x: Option<Vec<f64>>,
    /// Geometric thresholds `start,factor,count`.
    #[arg(long, value_parser = parse_geo)]
    pub x_geo: Option<GeometricGrid>,
    #[arg(long)]
    pub replicas: Option<u64>,
    /// Experiment seed; defaults to $GWTAILS_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 or absent means one per logical core.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Approximation tag; for `estimate` this picks the estimator
    /// (naive, bigjump or exact).
    #[arg(long)]
    pub method: Option<String>,
    /// Estimator for `compare`: naive, bigjump or exact.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Bound for `bound`: chebyshev, 22 or 23.
    #[arg(long)]
    pub prop: Option<String>,
    /// Summand shift for `bound`: m, 2m or a number.
    #[arg(long)]
    pub shift: Option<String>,
    #[arg(long)]
    pub y_ratio: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub range_c: Option<f64>,
    #[arg(long)]
    pub continuations: Option<u64>,
    #[arg(long)]
    pub lower_a: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub population_cap: Option<u64>,
    /// Event tracking for `simulate`: `x=X,eps=E`.
    #[arg(long, value_parser = parse_track)]
    pub track_events: Option<TrackEvents>,
    #[arg(long)]
    pub summary: bool,
    /// Class for `diagnose`, or `all`.
    #[arg(long)]
    pub check: Option<String>,
    #[arg(long)]
    pub grid_max: Option<f64>,
    /// Output path; the manifest is written beside it.
    #[arg(long)]
    pub out: Option<String>,
}

fn parse_geo(s: &str) -> Result<GeometricGrid, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || format!("expected start,factor,count, got `{s}`");
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok(GeometricGrid {
        start: parts[0].parse().map_err(|_| bad())?,
        factor: parts[1].parse().map_err(|_| bad())?,
        count: parts[2].parse().map_err(|_| bad())?,
    })
}

fn parse_track(s: &str) -> Result<TrackEvents, String> {
    s.parse().map_err(|e: ConfigError| e.to_string())
}

fn env_seed() -> Result<Option<u64>, ConfigError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| ConfigError::Invalid(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

impl Sub {
    fn parts(&self) -> (Option<Command>, &Flags) {
        match self {
            Sub::Simulate(f) => (Some(Command::Simulate), f),
            Sub::Estimate(f) => (Some(Command::Estimate), f),
            Sub::Approximate(f) => (Some(Command::Approximate), f),
            Sub::Diagnose(f) => (Some(Command::Diagnose), f),
            Sub::Bound(f) => (Some(Command::Bound), f),
            Sub::Compare(f) => (Some(Command::Compare), f),
            Sub::Run(f) => (None, f),
        }
    }

    /// The fully resolved configuration: file, then `GWTAILS_SEED` for a
    /// missing seed, then flags.
    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let (command, flags) = self.parts();
        let env = env_seed()?;
        let mut config = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError::Invalid(format!("cannot read {}: {e}", path.display())))?;
                ExperimentConfig::from_json(&text, env)?
            }
            None => {
                let command = command.ok_or_else(|| ConfigError::Invalid("`run` needs --config".into()))?;
                let law = flags
                    .law
                    .clone()
                    .ok_or_else(|| ConfigError::Invalid("--law is required without --config".into()))?;
                let mut c = ExperimentConfig::new(command, law);
                c.seed = env.unwrap_or(0);
                c
            }
        };
        if let Some(command) = command {
            config.command = command;
        }
        flags.apply(&mut config);
        Ok(config)
    }
}

impl Flags {
    fn apply(&self, c: &mut ExperimentConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { c.$field = v.clone(); })*
            };
        }
        set!(law, n, replicas, seed, workers, eps, estimator, prop, shift, y_ratio, range_c);
        set!(continuations, lower_a, delta, gamma, population_cap, check, grid_max);
        if let Some(m) = &self.method {
            if c.command == Command::Estimate {
                c.estimator = m.clone();
            } else {
                c.method = m.clone();
            }
        }
        if let Some(x) = &self.x {
            c.x = XGrid::List(x.clone());
        }
        if let Some(g) = self.x_geo {
            c.x = XGrid::Geometric(g);
        }
        if self.lambda.is_some() {
            c.lambda = self.lambda;
        }
        if self.track_events.is_some() {
            c.track_events = self.track_events;
        }
        if self.summary {
            c.summary = true;
        }
        if self.out.is_some() {
            c.out = self.out.clone();
        }
    }
}
