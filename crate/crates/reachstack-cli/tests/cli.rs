//! End-to-end checks of the `reachstack` binary: exit codes, file formats,
//! idempotent table computation, and report composition.

use std::path::Path;
use std::process::Command;

use reachstack_cli::table_io::read_table;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reachstack"))
}

/// Small but non-trivial grid so tube solves finish in well under a second.
fn small_config(dir: &Path, extra: serde_json::Value) -> std::path::PathBuf {
    let mut base = serde_json::json!({
        "grid": {
            "lower": [-40.0, -8.0, -0.6, 10.0, 10.0],
            "upper": [40.0, 8.0, 0.6, 30.0, 30.0],
            "nodes": [17, 9, 5, 6, 6],
            "periodic": [false, false, false, false, false]
        },
        "solver": {"cfl_number": 0.5, "time_horizon_tau": 1.0,
                    "dissipation_bounds": null, "store_intermediate": false},
        "scenario": {"episodes": 1, "duration_s": 2.0, "n_other_cars": 6},
        "output": {"dir": dir.join("out")},
    });
    merge(&mut base, extra);
    let path = dir.join("config.json");
    std::fs::write(&path, base.to_string()).unwrap();
    path
}

fn merge(base: &mut serde_json::Value, add: serde_json::Value) {
    if let (Some(b), serde_json::Value::Object(a)) = (base.as_object_mut(), add) {
        for (k, v) in a {
            match b.get_mut(&k) {
                Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                _ => {
                    b.insert(k, v);
                }
            }
        }
    }
}

#[test]
fn compute_is_idempotent_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), serde_json::json!({}));
    let table_path = dir.path().join("brt.hjvt");
    for _ in 0..2 {
        let status = bin()
            .args(["brt", "compute", "--quiet", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&table_path)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let table = read_table(&table_path).unwrap();
    assert_eq!(table.spec().dim(), 5);
    assert_eq!(table.horizon_tau(), 1.0);

    // Idempotence: identical config, identical bytes.
    let first = std::fs::read(&table_path).unwrap();
    bin()
        .args(["brt", "compute", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&table_path)
        .status()
        .unwrap();
    assert_eq!(first, std::fs::read(&table_path).unwrap());
}

#[test]
fn f32_precision_close_to_f64() {
    let dir = tempfile::tempdir().unwrap();
    let cfg64 = small_config(dir.path(), serde_json::json!({}));
    let p64 = dir.path().join("t64.hjvt");
    let p32 = dir.path().join("t32.hjvt");
    assert!(bin()
        .args(["brt", "compute", "--quiet", "--config"])
        .arg(&cfg64)
        .arg("--out")
        .arg(&p64)
        .status()
        .unwrap()
        .success());
    assert!(bin()
        .args(["brt", "compute", "--quiet", "--config"])
        .arg(&cfg64)
        .args(["--set", "output.precision=f32", "--out"])
        .arg(&p32)
        .status()
        .unwrap()
        .success());
    let t64 = read_table(&p64).unwrap();
    let t32 = read_table(&p32).unwrap();
    assert!(std::fs::metadata(&p32).unwrap().len() < std::fs::metadata(&p64).unwrap().len());
    for (a, b) in t32.data().iter().zip(t64.data()) {
        assert!((a - b).abs() <= 1e-5 * b.abs().max(1.0));
    }
}

#[test]
fn exit_codes_contract() {
    let dir = tempfile::tempdir().unwrap();

    // 2: config error (malformed JSON).
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let code = bin()
        .args(["sim", "run", "--quiet", "--config"])
        .arg(&bad)
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(2));

    // 2: schema violation.
    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"plannr": {}}"#).unwrap();
    let code = bin()
        .args(["sim", "run", "--quiet", "--config"])
        .arg(&unknown)
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(2));

    // 5: configuration needs a table that is not on disk.
    let cfg = small_config(
        dir.path(),
        serde_json::json!({
            "controller": {"mode": "spc"},
            "table": dir.path().join("missing.hjvt"),
        }),
    );
    let code = bin()
        .args(["sim", "run", "--quiet", "--config"])
        .arg(&cfg)
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(5));

    // 4: corrupt table file.
    let table_path = dir.path().join("brt.hjvt");
    assert!(bin()
        .args(["brt", "compute", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&table_path)
        .status()
        .unwrap()
        .success());
    let mut bytes = std::fs::read(&table_path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x55;
    std::fs::write(&table_path, &bytes).unwrap();
    let cfg = small_config(
        dir.path(),
        serde_json::json!({
            "controller": {"mode": "spc"},
            "table": table_path,
        }),
    );
    let code = bin()
        .args(["sim", "run", "--quiet", "--config"])
        .arg(&cfg)
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(4));

    // 3: solver failure surfaces from compute (dissipation below the bound).
    let cfg = small_config(
        dir.path(),
        serde_json::json!({
            "solver": {"dissipation_bounds": [0.1, 0.1, 0.1, 0.1, 0.1]},
        }),
    );
    let code = bin()
        .args(["brt", "compute", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("x.hjvt"))
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(2), "invalid dissipation is a config error");
}

#[test]
fn sim_and_report_compose() {
    let dir = tempfile::tempdir().unwrap();
    let table_path = dir.path().join("brt.hjvt");
    let cfg = small_config(
        dir.path(),
        serde_json::json!({
            "scenario": {"episodes": 2, "duration_s": 4.0},
        }),
    );
    assert!(bin()
        .args(["brt", "compute", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&table_path)
        .status()
        .unwrap()
        .success());

    // Two configurations: plain and reachability-aware SPC.
    assert!(bin()
        .args(["sim", "run", "--quiet", "--config"])
        .arg(&cfg)
        .status()
        .unwrap()
        .success());
    let cfg2 = small_config(
        dir.path(),
        serde_json::json!({
            "scenario": {"episodes": 2, "duration_s": 4.0},
            "planner": {"gamma_r": 0.9},
            "controller": {"mode": "spc"},
            "table": table_path,
        }),
    );
    assert!(bin()
        .args(["sim", "run", "--quiet", "--config"])
        .arg(&cfg2)
        .status()
        .unwrap()
        .success());

    let out = dir.path().join("out");
    // 2 configs x (2 episode csvs + 1 aggregate).
    let files: Vec<_> = std::fs::read_dir(&out).unwrap().collect();
    assert_eq!(files.len(), 6);
    let ep = std::fs::read_to_string(out.join("op_none_ep000.csv")).unwrap();
    assert_eq!(ep.lines().count(), 1 + 200);

    let report_dir = dir.path().join("report");
    let pattern = format!("{}/*_aggregate.json", out.display());
    assert!(bin()
        .args(["report", "--quiet", "--in", &pattern, "--out"])
        .arg(&report_dir)
        .status()
        .unwrap()
        .success());
    let report = std::fs::read_to_string(report_dir.join("report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 3);
    // Stable name ordering.
    assert!(lines[1].starts_with("hjop_spc_mi,"));
    assert!(lines[2].starts_with("op_none,"));

    // Plot data: point count equals the total window count (4 s episodes
    // yield one 10 s window each).
    let points = std::fs::read_to_string(report_dir.join("tradeoff_points.csv")).unwrap();
    assert_eq!(points.lines().count(), 1 + 4);
    assert!(report_dir.join("tradeoff_summary.csv").exists());

    // Schema mismatch in an aggregate is a config error (exit 2).
    std::fs::write(out.join("zzz_aggregate.json"), "{\"nope\": 1}").unwrap();
    let code = bin()
        .args(["report", "--quiet", "--in", &pattern, "--out"])
        .arg(&report_dir)
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(2));
}
