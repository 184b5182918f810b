use std::path::Path;
use std::process::{Command, Output};

use icn_lab_cli::output::{read_report_csv, read_scaling_csv};
use icn_lab_cli::{Report, ReportRow, Rows};

fn icnlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icnlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("ICNLAB_WORKERS")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn rows_of(out: &Output) -> Vec<ReportRow> {
    read_report_csv(&out.stdout).unwrap()
}

fn aggregate(rows: &[ReportRow]) -> Vec<&ReportRow> {
    rows.iter().filter(|r| r.content == "all").collect()
}

#[test]
fn small_grid_without_caches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "a.json",
        r#"{"analyze": {"levels": [2], "occupancy": {"source": "uniform", "rho": [0]}}}"#,
    );
    let out = icnlab(&["analyze", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rows = rows_of(&out);
    let all = aggregate(&rows)[0];
    assert!((all.e_h.unwrap() - 5.0 / 3.0).abs() < 1e-12);
    assert!((all.gamma_max.unwrap() - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn full_caches_emit_the_sentinel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "a.json",
        r#"{"analyze": {"levels": [5], "occupancy": {"source": "uniform", "rho": [1]}}}"#,
    );
    let out = icnlab(&["analyze", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert!(text.contains(",inf,"), "{text}");
    let rows = rows_of(&out);
    let all = aggregate(&rows)[0];
    assert_eq!(all.gamma_max, Some(f64::INFINITY));
    assert_eq!(all.flag, "inf-sentinel");
}

#[test]
fn json_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for (command, preset) in [("analyze", "fig5"), ("sweep", "fig3"), ("scaling", "fig5")] {
        let out_path = dir.path().join(format!("{command}.json"));
        let out = icnlab(
            &[
                command,
                "--preset",
                preset,
                "--format",
                "json",
                "--out",
                out_path.to_str().unwrap(),
            ],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{command}");
        let text = std::fs::read_to_string(&out_path).unwrap();
        let report = Report::from_json(&text).unwrap();
        assert_eq!(report.meta.command, command);
        assert_eq!(report.to_json().unwrap(), text);

        let csv = icnlab(&[command, "--preset", preset], dir.path());
        match &report.rows {
            Rows::Report(rows) => assert_eq!(&read_report_csv(&csv.stdout).unwrap(), rows),
            Rows::Scaling(rows) => assert_eq!(&read_scaling_csv(&csv.stdout).unwrap(), rows),
        }
    }
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            r#"{"analyze": {"levels": [3, -1]}}"#,
            "analyze",
            "analyze.levels[1]",
        ),
        (
            r#"{"sweep": {"axes": [{"parameter": "request_rate", "values": []}]}}"#,
            "sweep",
            "sweep.axes[0].values",
        ),
        (
            r#"{"sweep": {"axes": [{"parameter": "speed", "values": [1]}]}}"#,
            "sweep",
            "sweep.axes[0].parameter",
        ),
        (
            r#"{"simulate": {"network": {"kind": "grid", "levels": 3}, "occupancy": {"mode": "ttl", "horizon": 1}}}"#,
            "simulate",
            "simulate.occupancy",
        ),
        (r#"{"seed": "x"}"#, "analyze", "seed"),
    ];
    for (text, command, field) in cases {
        let cfg = write(dir.path(), "bad.json", text);
        let out = icnlab(&[command, "--config", &cfg], dir.path());
        assert_eq!(out.status.code(), Some(2), "{text}");
        let diag: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(diag["error"], "config");
        assert_eq!(diag["field"], field, "{text}");
        assert!(out.stdout.is_empty());
    }
    let out = icnlab(&["analyze", "--config", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let cfg = write(dir.path(), "ok.json", "{}");
    let out = icnlab(&["sweep", "--config", &cfg, "--preset", "fig3"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = icnlab(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2), "simulate needs its section");
}

#[test]
fn error_rows_set_exit_status_one() {
    let dir = tempfile::tempdir().unwrap();
    // Ring discovery has no formula for level-dependent occupancy.
    let cfg = write(
        dir.path(),
        "a.json",
        r#"{"catalog": {"items": [{"size": 1, "popularity": 1, "request_rate": 1,
                                    "ttl": {"law": "fixed", "duration": 1, "refresh_on_hit": true}}]},
            "analyze": {"scenarios": ["I", "II"], "levels": [4], "occupancy": {"source": "on-path"}}}"#,
    );
    let out = icnlab(&["analyze", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let rows = rows_of(&out);
    assert!(rows.iter().any(|r| r.scenario == "I" && !r.is_error()));
    assert!(rows.iter().any(|r| r.scenario == "II" && r.is_error()));
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"seed": 5,
            "simulate": {"network": {"kind": "grid", "levels": 5},
                         "occupancy": {"mode": "snapshot", "profile": {"source": "uniform", "rho": [0.3]}, "samples": 4000},
                         "replicas": 6},
            "sweep": {"axes": [{"parameter": "rho", "values": [0.1, 0.4, 0.7]},
                               {"parameter": "levels", "values": [3, 6]}],
                      "evaluate": "simulated"}}"#,
    );
    for command in ["simulate", "sweep"] {
        let one = icnlab(&[command, "--config", &cfg, "--workers", "1"], dir.path());
        let four = icnlab(&[command, "--config", &cfg, "--workers", "4"], dir.path());
        assert_eq!(
            one.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&one.stderr)
        );
        assert_eq!(one.stdout, four.stdout, "{command}");
        let env = Command::new(env!("CARGO_BIN_EXE_icnlab"))
            .args([command, "--config", &cfg])
            .env("ICNLAB_WORKERS", "3")
            .output()
            .unwrap();
        assert_eq!(env.stdout, one.stdout);
    }
    let seeded = icnlab(&["simulate", "--config", &cfg, "--seed", "6"], dir.path());
    let base = icnlab(&["simulate", "--config", &cfg], dir.path());
    assert_ne!(seeded.stdout, base.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_icnlab"))
        .args(["simulate", "--config", &cfg])
        .env("ICNLAB_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn snapshot_matches_level_wise_hops() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"seed": 9,
            "analyze": {"levels": [20], "occupancy": {"source": "uniform", "rho": [0.5]}},
            "simulate": {"network": {"kind": "grid", "levels": 20},
                         "occupancy": {"mode": "snapshot", "profile": {"source": "uniform", "rho": [0.5]}, "samples": 100000}}}"#,
    );
    let sim = rows_of(&icnlab(&["simulate", "--config", &cfg], dir.path()));
    let ana = rows_of(&icnlab(&["analyze", "--config", &cfg], dir.path()));
    let s = aggregate(&sim)[0];
    let a = aggregate(&ana)[0];
    assert_eq!(s.source, icn_lab_cli::Source::Simulated);
    let se = s.stderr.unwrap();
    assert!(
        (s.e_h.unwrap() - a.e_h.unwrap()).abs() <= 3.0 * se,
        "{:?} vs {:?} se {se}",
        s.e_h,
        a.e_h
    );
}

#[test]
fn no_requests_leave_caches_empty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"catalog": {"items": [{"size": 1, "popularity": 1, "request_rate": 0, "ttl": {"law": "exponential", "rate": 1}}]},
            "simulate": {"network": {"kind": "grid", "levels": 3},
                         "occupancy": {"mode": "ttl", "horizon": 100, "warmup": 10}}}"#,
    );
    let out = icnlab(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = rows_of(&out);
    let presence: Vec<f64> = rows.iter().filter_map(|r| r.rho).collect();
    assert!(!presence.is_empty());
    assert!(presence.iter().all(|&x| x == 0.0));
}

#[test]
fn trace_file_lists_services() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"simulate": {"network": {"kind": "grid", "levels": 3}, "trace_limit": 50,
                         "occupancy": {"mode": "ttl", "horizon": 100, "warmup": 10}}}"#,
    );
    let trace = dir.path().join("trace.csv");
    let out = icnlab(
        &[
            "simulate",
            "--config",
            &cfg,
            "--trace",
            trace.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("replica,time,requester,content,holder,serving_level,hops")
    );
    assert!(lines.count() >= 50);
}

#[test]
fn fig4_request_rate_is_set_by_the_timeout() {
    let dir = tempfile::tempdir().unwrap();
    let rows = rows_of(&icnlab(&["sweep", "--preset", "fig4"], dir.path()));
    let all = aggregate(&rows);
    assert_eq!(all.len(), 41);
    let rates: Vec<f64> = all.iter().map(|r| r.total_request_rate.unwrap()).collect();
    assert!(rates.windows(2).all(|w| w[1] < w[0]));
    // At 1/mu = 100 the rate is N mu regardless of the request rate.
    let last = all.last().unwrap();
    let n = last.n.unwrap() as f64;
    let mean = last.value_1.unwrap();
    assert!((rates[40] - n / mean).abs() / (n / mean) < 0.011);
}

#[test]
fn fig5_columns_follow_the_size_orders() {
    let dir = tempfile::tempdir().unwrap();
    let rows = rows_of(&icnlab(&["analyze", "--preset", "fig5"], dir.path()));
    for scenario in ["I", "II", "III"] {
        let cached: Vec<f64> = aggregate(&rows)
            .into_iter()
            .filter(|r| r.scenario == scenario && r.flag.is_empty())
            .map(|r| r.gamma_max.unwrap())
            .collect();
        let bare: Vec<f64> = aggregate(&rows)
            .into_iter()
            .filter(|r| r.scenario == scenario && r.flag == "no-cache")
            .map(|r| r.gamma_max.unwrap())
            .collect();
        assert!(cached.len() >= 6 && cached.len() == bare.len());
        assert!(bare.windows(2).all(|w| w[1] < w[0]), "{scenario}: {bare:?}");
        assert!(cached.iter().zip(&bare).all(|(c, b)| c > b));
        if scenario != "III" {
            let (lo, hi) = cached
                .iter()
                .fold((f64::MAX, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
            assert!(hi / lo < 1.01, "{scenario}: {cached:?}");
        }
    }
}

#[test]
fn scaling_standard_checks_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = icnlab(&["scaling"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rows = read_scaling_csv(&out.stdout).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.pass == Some(true)), "{rows:?}");
}
