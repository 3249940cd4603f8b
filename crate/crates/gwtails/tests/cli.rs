use std::path::Path;
use std::process::{Command, Output};

use gwtails::config::{Command as Sub, ExperimentConfig, GeometricGrid, TrackEvents, XGrid};
use gwtails::output::{Cell, Table};
use gwtails_core::asymptotics::Horizon;
use proptest::prelude::*;

fn gwtails(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwtails"))
        .args(args)
        .env_remove("GWTAILS_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn exit_zero_and_exact_value() {
    let o = gwtails(&[
        "estimate",
        "--law",
        "finite(0:0.25,2:0.75)",
        "--n",
        "2",
        "--x",
        "0.5",
        "--method",
        "exact",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = stdout(&o);
    let row = csv.lines().nth(1).unwrap();
    let estimate: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    // P{Z_2 > 1.125}, that is Z_2 >= 2
    assert!((estimate - 45.0 / 64.0).abs() < 1e-15);
}

#[test]
fn exit_two_on_parameter_errors() {
    let o = gwtails(&["estimate", "--law", "pareto(alpha=2", "--x", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("column"), "{}", stderr(&o));

    let o = gwtails(&["estimate", "--law", "pareto(alpha=2)", "--x", "3,2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("strictly increasing"));

    let o = gwtails(&[
        "approximate",
        "--law",
        "pareto(alpha=2)",
        "--x",
        "3",
        "--method",
        "nope",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_three_on_numeric_failures() {
    let o = gwtails(&[
        "bound",
        "--law",
        "tuned(pareto(alpha=2), m=2)",
        "--n",
        "3",
        "--x",
        "1e6",
        "--lambda",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = gwtails(&[
        "estimate",
        "--law",
        "finite(0:0.1,1000000:0.9)",
        "--n",
        "6",
        "--x",
        "10",
        "--method",
        "exact",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn unknown_config_field_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(
        &path,
        "{\n  \"command\": \"estimate\",\n  \"law\": \"pareto(alpha=2)\",\n  \"xgrid\": [1]\n}",
    )
    .unwrap();
    let o = gwtails(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 4") && err.contains("xgrid"), "{err}");
}

fn run_to(dir: &Path, name: &str, workers: &str) -> (String, serde_json::Value) {
    let out = dir.join(name);
    let o = gwtails(&[
        "estimate",
        "--law",
        "tuned(pareto(alpha=2), m=2)",
        "--n",
        "2,3",
        "--x",
        "5,20",
        "--method",
        "bigjump",
        "--replicas",
        "5000",
        "--seed",
        "11",
        "--workers",
        workers,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let manifest_path = out.with_file_name(format!("{}.manifest.json", out.file_stem().unwrap().to_string_lossy()));
    let manifest = serde_json::from_str(&std::fs::read_to_string(manifest_path).unwrap()).unwrap();
    (csv, manifest)
}

#[test]
fn csv_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, ma) = run_to(dir.path(), "a.csv", "1");
    let (b, mb) = run_to(dir.path(), "b.csv", "3");
    assert_eq!(a, b);
    assert_eq!(ma["seed"], 11);
    assert_eq!(ma["rows"], 4);
    assert_eq!(ma["config"]["law"], mb["config"]["law"]);
    assert!(ma["version"].is_string() && ma["core_version"].is_string());
    assert!(ma["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(a.starts_with("n,x,method,estimate,se,ci_low,ci_high,replicas,breakdown_k0,breakdown_k1,breakdown_k2\n"));
}

#[test]
fn seed_environment_variable_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let run = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_gwtails"));
        cmd.args([
            "simulate",
            "--law",
            "finite(0:0.2,3:0.8)",
            "--n",
            "2",
            "--replicas",
            "4",
        ])
        .args(["--out", out.to_str().unwrap()])
        .args(extra)
        .env_remove("GWTAILS_SEED");
        if let Some(v) = env {
            cmd.env("GWTAILS_SEED", v);
        }
        assert!(cmd.status().unwrap().success());
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.manifest.json")).unwrap()).unwrap();
        m["seed"].as_u64().unwrap()
    };
    assert_eq!(run(&[], None), 0);
    assert_eq!(run(&[], Some("42")), 42);
    assert_eq!(run(&["--seed", "7"], Some("42")), 7);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let out = dir.path().join("a.csv");
    let mut c = ExperimentConfig::new(Sub::Approximate, "tuned(pareto(alpha=2), m=2)");
    c.n = vec![Horizon::Finite(3), Horizon::Infinite];
    c.x = XGrid::Geometric(GeometricGrid {
        start: 100.0,
        factor: 10.0,
        count: 2,
    });
    c.out = Some(out.to_str().unwrap().into());
    std::fs::write(&path, c.to_json()).unwrap();
    let o = gwtails(&["run", "--config", path.to_str().unwrap(), "--method", "series_inf"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().skip(1).all(|l| l.contains(",series_inf,")));
}

#[test]
fn diagnose_writes_report() {
    let o = gwtails(&[
        "diagnose",
        "--law",
        "tuned(pareto(alpha=2), m=2)",
        "--check",
        "dominated_varying",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["reports"][0]["class_name"], "dominated_varying");
    assert_eq!(v["reports"][0]["verdict"], "consistent");
    assert_eq!(v["regime"], "irv_series");
}

#[test]
fn simulate_tracks_events() {
    let o = gwtails(&[
        "simulate",
        "--law",
        "finite(0:0.2,3:0.8)",
        "--n",
        "3",
        "--replicas",
        "5",
        "--track-events",
        "x=2,eps=0",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("replica,k,Z_k,W_k,max_offspring,b_k,a_k"));
    assert_eq!(lines.count(), 20);
}

fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
    let commands = prop_oneof![
        Just(Sub::Simulate),
        Just(Sub::Estimate),
        Just(Sub::Approximate),
        Just(Sub::Diagnose),
        Just(Sub::Bound),
        Just(Sub::Compare),
    ];
    let horizon = prop_oneof![(0usize..100).prop_map(Horizon::Finite), Just(Horizon::Infinite)];
    let grid =
        prop_oneof![
            prop::collection::vec(-1e9f64..1e9, 0..6).prop_map(XGrid::List),
            (1e-3f64..1e3, 1.01f64..10.0, 0usize..40)
                .prop_map(|(start, factor, count)| XGrid::Geometric(GeometricGrid { start, factor, count })),
        ];
    (
        (
            commands,
            "[a-z(),=. 0-9]{0,30}",
            prop::collection::vec(horizon, 1..4),
            grid,
        ),
        (any::<u64>(), any::<u64>(), 0usize..64, 0.0f64..1.0),
        (
            prop::option::of(0.0f64..5.0),
            prop::option::of((0.1f64..1e4, 0.0f64..1.0)),
            any::<bool>(),
        ),
        (prop::option::of("[a-z/._]{1,12}"), 1u64..1000, -1e6f64..1e6),
    )
        .prop_map(
            |((command, law, n, x), (replicas, seed, workers, eps), (lambda, track, summary), (out, cont, shift))| {
                let mut c = ExperimentConfig::new(command, law);
                c.n = n;
                c.x = x;
                c.replicas = replicas;
                c.seed = seed;
                c.workers = workers;
                c.eps = eps;
                c.lambda = lambda;
                c.track_events = track.map(|(x, eps)| TrackEvents { x, eps });
                c.summary = summary;
                c.out = out;
                c.continuations = cont;
                c.shift = shift.to_string();
                c
            },
        )
}

proptest! {
    #[test]
    fn config_round_trips(c in arb_config()) {
        let back = ExperimentConfig::from_json(&c.to_json(), Some(c.seed.wrapping_add(1))).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn csv_reals_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let mut t = Table::new(["v"]);
        t.push(vec![Cell::Real(v)]);
        let csv = t.to_csv();
        let back: f64 = csv.lines().nth(1).unwrap().parse().unwrap();
        prop_assert_eq!(back.to_bits(), v.to_bits());
    }
}
