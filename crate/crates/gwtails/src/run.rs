//! One runner per subcommand, plus the exit-code mapping.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use gwtails_core::asymptotics::{self, approximate, ApproxOptions, Horizon};
use gwtails_core::bounds::{self, CenteredSummandLaw, Validity};
use gwtails_core::classes::{self, ClassName, ClassReport};
use gwtails_core::estimators::{self, BigJumpConfig, ComparisonBudget, EstimatorKind, EstimatorResult};
use gwtails_core::exec::Executor;
use gwtails_core::math::geometric_grid;
use gwtails_core::rng::{lanes, StreamId};
use gwtails_core::simulator::{self, MAX_EVENT_HORIZON};
use gwtails_core::OffspringLaw;
use serde_json::{json, Value};

use crate::config::{BoundKind, Command, ConfigError, ExperimentConfig};
use crate::output::{write_outputs, Cell, Table};
use crate::parallel::Parallel;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_PARAM: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Core(gwtails_core::Error),
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<gwtails_core::Error> for RunError {
    fn from(e: gwtails_core::Error) -> Self {
        RunError::Core(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl RunError {
    /// 2 for parameter errors, 3 for numeric failures, 1 for i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_PARAM,
            RunError::Core(e) if e.is_numeric() => EXIT_NUMERIC,
            RunError::Core(_) => EXIT_PARAM,
            RunError::Io(_) => EXIT_IO,
        }
    }
}

/// What a subcommand produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Table(Table),
    /// `diagnose` writes a JSON report instead of a table.
    Report(Value),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub payload: Payload,
    pub warnings: Vec<String>,
    /// Subcommand-specific manifest fields.
    pub extra: Value,
}

impl RunOutput {
    fn table(table: Table) -> Self {
        RunOutput {
            payload: Payload::Table(table),
            warnings: Vec::new(),
            extra: Value::Null,
        }
    }

    fn warn(&mut self, w: String) {
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }

    pub fn rows(&self) -> usize {
        match &self.payload {
            Payload::Table(t) => t.rows.len(),
            Payload::Report(r) => r["reports"].as_array().map_or(0, Vec::len),
        }
    }
}

/// Runs the subcommand without writing anything.
pub fn compute<E: Executor>(config: &ExperimentConfig, exec: &E) -> Result<RunOutput, RunError> {
    config.validate()?;
    let law = config.build_law()?;
    match config.command {
        Command::Simulate if config.summary => simulate_summary(config, &law, exec),
        Command::Simulate => simulate_paths(config, &law, exec),
        Command::Estimate => estimate(config, &law, exec),
        Command::Approximate => approximate_grid(config, &law),
        Command::Diagnose => diagnose(config, &law),
        Command::Bound => bound(config, &law),
        Command::Compare => compare(config, &law, exec),
    }
}

/// Runs the subcommand and writes its outputs and manifest.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let start = Instant::now();
    config.validate()?;
    let exec = Parallel::new(config.workers)
        .map_err(|e| RunError::Config(ConfigError::Invalid(format!("cannot start worker pool: {e}"))))?;
    let output = compute(config, &exec)?;
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    let resolved = config.law_spec()?.resolved()?.to_string();
    let mut manifest = json!({
        "tool": "gwtails",
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": gwtails_core::VERSION,
        "command": config.command.as_str(),
        "config": config,
        "resolved_law": resolved,
        "seed": config.seed,
        "workers": exec.workers(),
        "rows": output.rows(),
        "output": config.out,
        "warnings": output.warnings,
        "extra": output.extra,
    });
    manifest["wall_time_s"] = json!(start.elapsed().as_secs_f64());
    let out = config.out.as_deref().map(Path::new);
    match &output.payload {
        Payload::Table(table) => {
            write_outputs(table, &manifest, out)?;
        }
        Payload::Report(report) => write_report(report, &manifest, out)?,
    }
    Ok(output)
}

fn write_report(report: &Value, manifest: &Value, out: Option<&Path>) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(std::io::Error::other)? + "\n";
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, text)?;
            let m = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)? + "\n";
            std::fs::write(crate::output::manifest_path(path), m)
        }
    }
}

/// Runs and reports errors on standard error; returns the exit code.
pub fn execute(config: &ExperimentConfig) -> i32 {
    match run(config) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn max_horizon(config: &ExperimentConfig) -> Result<usize, RunError> {
    Ok(config.finite_n()?.into_iter().max().unwrap_or(0))
}

fn simulate_paths<E: Executor>(config: &ExperimentConfig, law: &OffspringLaw, exec: &E) -> Result<RunOutput, RunError> {
    let n = max_horizon(config)?;
    if config.track_events.is_some() && n > MAX_EVENT_HORIZON {
        return Err(ConfigError::Invalid(format!("event tracking supports n <= {MAX_EVENT_HORIZON}")).into());
    }
    let m = law.mean();
    let parts = exec.map_chunks(config.replicas, |range| -> gwtails_core::Result<Vec<Vec<Cell>>> {
        let mut rows = Vec::new();
        for i in range {
            let stream = StreamId::new(config.seed, lanes::SIMULATE, i);
            let record = simulator::simulate(law, n, stream, config.population_cap)?;
            let flags = config
                .track_events
                .map(|t| simulator::event_flags(&record, m, t.x, 1.0 + t.eps));
            for k in 0..=n {
                let max = record
                    .gen_max_offspring
                    .get(k)
                    .map_or(Cell::Text(String::new()), |&v| v.into());
                let (b, a) = match flags {
                    Some(f) => (Cell::Int(f.b(k) as u64), Cell::Int(f.a(k) as u64)),
                    None => (Cell::Text(String::new()), Cell::Text(String::new())),
                };
                rows.push(vec![
                    i.into(),
                    k.into(),
                    record.sizes[k].into(),
                    record.w_values[k].into(),
                    max,
                    b,
                    a,
                ]);
            }
        }
        Ok(rows)
    });
    let mut table = Table::new(["replica", "k", "Z_k", "W_k", "max_offspring", "b_k", "a_k"]);
    for part in parts {
        for row in part? {
            table.push(row);
        }
    }
    Ok(RunOutput::table(table))
}

fn simulate_summary<E: Executor>(
    config: &ExperimentConfig,
    law: &OffspringLaw,
    exec: &E,
) -> Result<RunOutput, RunError> {
    let n = max_horizon(config)?;
    let summary = simulator::simulate_summary(law, n, config.replicas, config.seed, config.population_cap, exec)?;
    let mut table = Table::new([
        "k",
        "replicas",
        "mean_w",
        "mean_se",
        "var_w",
        "var_se",
        "var_theory",
        "extinct_fraction",
    ]);
    for k in 0..=n {
        let w = &summary.w[k];
        let theory = if law.has_finite_variance() {
            asymptotics::var_wn(law.variance(), law.mean(), Horizon::Finite(k))?
        } else {
            f64::INFINITY
        };
        table.push(vec![
            k.into(),
            w.count.into(),
            w.mean.into(),
            w.mean_std_error().into(),
            w.variance().into(),
            w.variance_std_error().into(),
            theory.into(),
            (summary.extinct[k] as f64 / config.replicas as f64).into(),
        ]);
    }
    let mut out = RunOutput::table(table);
    if summary.capped > 0 {
        out.warn(format!("{} paths hit the population cap", summary.capped));
    }
    Ok(out)
}

fn estimate_one<E: Executor>(
    config: &ExperimentConfig,
    law: &OffspringLaw,
    kind: EstimatorKind,
    n: usize,
    x: f64,
    exec: &E,
) -> gwtails_core::Result<EstimatorResult> {
    match kind {
        EstimatorKind::NaiveMc => {
            estimators::naive_mc(law, n, x, config.replicas, config.seed, config.population_cap, exec)
        }
        EstimatorKind::BigJump => {
            let bj = BigJumpConfig {
                replicas_per_k: config.replicas,
                continuations: config.continuations,
                seed: config.seed,
            };
            estimators::big_jump_estimator(law, n, x, config.eps, &bj, exec)
        }
        EstimatorKind::Exact => estimators::exact_w_tail(law, n, x),
    }
}

fn estimate<E: Executor>(config: &ExperimentConfig, law: &OffspringLaw, exec: &E) -> Result<RunOutput, RunError> {
    let kind = config.estimator_tag()?;
    let ns = config.finite_n()?;
    let xs = config.x_values();
    let width = if kind == EstimatorKind::BigJump {
        ns.iter().copied().max().unwrap_or(0)
    } else {
        0
    };
    let mut header: Vec<String> = ["n", "x", "method", "estimate", "se", "ci_low", "ci_high", "replicas"]
        .map(String::from)
        .to_vec();
    header.extend((0..width).map(|k| format!("breakdown_k{k}")));
    let mut table = Table::new(header);
    let mut warnings = Vec::new();
    for &n in &ns {
        for &x in &xs {
            let r = estimate_one(config, law, kind, n, x, exec)?;
            let mut row: Vec<Cell> = vec![
                n.into(),
                x.into(),
                kind.as_str().into(),
                r.estimate.into(),
                r.std_error.into(),
                r.ci_low.into(),
                r.ci_high.into(),
                r.replicas_used.into(),
            ];
            let breakdown = r.breakdown.clone().unwrap_or_default();
            row.extend((0..width).map(|k| breakdown.get(k).map_or(Cell::Text(String::new()), |&v| v.into())));
            table.push(row);
            if r.overflow_count > 0 {
                warnings.push(format!("n={n}, x={x}: {} replicas overflowed", r.overflow_count));
            }
            warnings.extend(r.flags.iter().map(|f| format!("n={n}, x={x}: {f}")));
        }
    }
    let mut out = RunOutput::table(table);
    warnings.into_iter().for_each(|w| out.warn(w));
    Ok(out)
}

fn approximate_grid(config: &ExperimentConfig, law: &OffspringLaw) -> Result<RunOutput, RunError> {
    let method = config.method_tag()?;
    let opts = ApproxOptions {
        lower_a: config.lower_a,
        ..ApproxOptions::default()
    };
    let mut table = Table::new(["x", "n", "method", "value", "truncation_terms", "truncation_bound"]);
    let mut out = RunOutput::table(Table::default());
    for &n in &config.n {
        for x in config.x_values() {
            let a = approximate(law, method, n, x, &opts)?;
            table.push(vec![
                x.into(),
                n.to_string().into(),
                method.as_str().into(),
                a.value.into(),
                a.truncation_terms.into(),
                a.truncation_bound.into(),
            ]);
            if a.heuristic {
                out.warn(format!("n={n}, x={x}: series truncated by the small-terms heuristic"));
            }
            if a.vacuous {
                out.warn(format!("n={n}, x={x}: lower bound is vacuous"));
            }
        }
    }
    if let Some(w) = asymptotics::regime_warning(law, method)? {
        out.warn(w);
    }
    out.payload = Payload::Table(table);
    Ok(out)
}

const CHECKS: [ClassName; 8] = [
    ClassName::DominatedVarying,
    ClassName::IntermediateRV,
    ClassName::Matuszewska,
    ClassName::HInsensitive,
    ClassName::SStar,
    ClassName::RapidlyVarying,
    ClassName::HazardIncrement,
    ClassName::HazardSlope,
];

fn run_check(
    config: &ExperimentConfig,
    law: &OffspringLaw,
    name: ClassName,
    grid: &[f64],
) -> gwtails_core::Result<ClassReport> {
    let small_eps = if config.eps > 0.0 { config.eps } else { 0.05 };
    match name {
        ClassName::DominatedVarying => classes::check_dominated_varying(law, config.grid_max),
        ClassName::IntermediateRV => classes::check_intermediate_rv(law, small_eps, grid),
        ClassName::Matuszewska => classes::check_matuszewska(law, config.delta, config.range_c, grid),
        ClassName::HInsensitive => classes::check_insensitive(law, config.gamma, grid),
        ClassName::SStar => classes::check_sstar(law, grid),
        ClassName::RapidlyVarying => classes::check_rapid_variation(law, 0.5, grid),
        ClassName::HazardIncrement => classes::check_hazard_increment(law, 1.0, config.grid_max as u64),
        ClassName::HazardSlope => classes::check_hazard_slope(law, small_eps, grid[0], grid),
    }
}

fn report_json(r: &ClassReport) -> Value {
    json!({
        "class_name": r.class_name.as_str(),
        "grid": r.grid,
        "statistic": r.statistic,
        "verdict": r.verdict.as_str(),
        "witness": r.witness.map(|w| json!({"x": w.x, "y": w.y, "statistic": w.statistic})),
    })
}

fn diagnose(config: &ExperimentConfig, law: &OffspringLaw) -> Result<RunOutput, RunError> {
    let grid = geometric_grid(8.0, config.grid_max, 64);
    let selected: Vec<ClassName> = if config.check == "all" {
        CHECKS.to_vec()
    } else {
        let found = CHECKS.iter().find(|c| c.as_str() == config.check).ok_or_else(|| {
            let names: Vec<&str> = CHECKS.iter().map(|c| c.as_str()).collect();
            ConfigError::Invalid(format!(
                "unknown check `{}`; expected all or one of {}",
                config.check,
                names.join(", ")
            ))
        })?;
        vec![*found]
    };
    let mut warnings = Vec::new();
    let mut reports = Vec::new();
    for name in selected {
        match run_check(config, law, name, &grid) {
            Ok(r) => reports.push(report_json(&r)),
            // one inapplicable check should not sink the whole battery
            Err(e) if config.check == "all" => warnings.push(format!("{}: {e}", name.as_str())),
            Err(e) => return Err(e.into()),
        }
    }
    let regime = asymptotics::classify(law)?;
    let report = json!({
        "law": config.law,
        "regime": regime.regime.as_str(),
        "method": regime.regime.method().map(|m| m.as_str()),
        "reports": reports,
    });
    Ok(RunOutput {
        payload: Payload::Report(report),
        warnings,
        extra: json!({"regime": regime.regime.as_str()}),
    })
}

fn bound(config: &ExperimentConfig, law: &OffspringLaw) -> Result<RunOutput, RunError> {
    let kind = config.bound_kind()?;
    let shift = config.shift_value()?.value(law.mean());
    let summand = CenteredSummandLaw::new(law, shift)?;
    let mut table = Table::new([
        "n",
        "x",
        "prop",
        "bound",
        "jump_term",
        "chernoff_term",
        "raw_chebyshev",
        "lambda",
        "y",
        "validity",
    ]);
    let mut out = RunOutput::table(Table::default());
    for n in config.finite_n()? {
        for x in config.x_values() {
            let r = match kind {
                BoundKind::Chebyshev => {
                    let lambda = match config.lambda {
                        Some(l) => l,
                        None => 2.0 * summand.hazard(x)? / x,
                    };
                    bounds::chebyshev_sum_bound(&summand, n as u64, x, config.y_ratio * x, lambda)?
                }
                BoundKind::Prop22 => bounds::prop22_bound(&summand, n as u64, x, config.y_ratio, config.range_c)?,
                BoundKind::Prop23 => {
                    let eps = if config.eps > 0.0 {
                        config.eps
                    } else {
                        1.0 - config.y_ratio
                    };
                    bounds::prop23_bound(&summand, n as u64, x, config.y_ratio * x, eps, config.range_c)?
                }
            };
            table.push(vec![
                n.into(),
                x.into(),
                kind.as_str().into(),
                r.bound_value.into(),
                r.jump_term.into(),
                r.chernoff_term.into(),
                r.raw_chebyshev.into(),
                r.lambda_used.into(),
                r.y_used.into(),
                r.validity.as_str().into(),
            ]);
            if r.validity == Validity::OutOfRange {
                out.warn(format!("n={n}, x={x}: {}", r.range_note));
            }
        }
    }
    out.payload = Payload::Table(table);
    out.extra = json!({"shift": shift, "summand_mean": summand.mean_eta});
    Ok(out)
}

fn compare<E: Executor>(config: &ExperimentConfig, law: &OffspringLaw, exec: &E) -> Result<RunOutput, RunError> {
    let method = config.method_tag()?;
    let kind = config.estimator_tag()?;
    let budget = ComparisonBudget {
        replicas: config.replicas,
        seed: config.seed,
        eps: config.eps,
        population_cap: config.population_cap,
    };
    let rows = estimators::compare_to_asymptotics(
        law,
        &config.finite_n()?,
        &config.x_values(),
        method,
        kind,
        &budget,
        exec,
    )?;
    let mut table = Table::new([
        "n",
        "x",
        "estimate",
        "se",
        "ci_low",
        "ci_high",
        "approximation",
        "ratio",
    ]);
    for r in rows {
        table.push(vec![
            r.n.into(),
            r.x.into(),
            r.estimate.estimate.into(),
            r.estimate.std_error.into(),
            r.estimate.ci_low.into(),
            r.estimate.ci_high.into(),
            r.approximation.into(),
            r.ratio.into(),
        ]);
    }
    let mut out = RunOutput::table(table);
    if let Some(w) = asymptotics::regime_warning(law, method)? {
        out.warn(w);
    }
    Ok(out)
}
