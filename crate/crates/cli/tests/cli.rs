use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn pnet(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pnet"));
    cmd.args(args).env_remove("PNET_NODE_BUDGET");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_vec(cfg).unwrap()).unwrap();
    p
}

fn run_config(sub: &str, cfg: &Value) -> (Output, TempDir) {
    let dir = TempDir::new().unwrap();
    let p = write_config(&dir, "cfg.json", cfg);
    (pnet(&[sub, "--config", p.to_str().unwrap()], &[]), dir)
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

fn csv_column(bytes: &[u8], name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_reader(bytes);
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn bounds_reports_entangled_mse() {
    let (o, _d) = run_config("bounds", &json!({"alpha": ["1/2", "1/2"], "N": 10}));
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert!((v["phase_sensing"]["mse_entangled"].as_f64().unwrap() - 0.01).abs() < 1e-15);
    assert!(v.get("displacement_sensing").is_none());

    let (o, _d) = run_config("bounds", &json!({"alpha": ["1", "-1"], "N": 2}));
    assert!((stdout_json(&o)["phase_sensing"]["mse_entangled"].as_f64().unwrap() - 0.25).abs() < 1e-15);
}

#[test]
fn bounds_writes_both_couplings_and_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "cfg.json", &json!({"alpha": ["1", "2", "-3"], "N": 6, "N_bar": 40.0, "M": 2}));
    let out = dir.path().join("report.json");
    let o = pnet(&["bounds", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert!(v["phase_sensing"].is_object() && v["displacement_sensing"].is_object());
    let rows = read_csv(&dir.path().join("report.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][0], "1;2;-3");
}

#[test]
fn degenerate_alpha_is_a_validation_error() {
    let (o, _d) = run_config("bounds", &json!({"alpha": ["0", "0"], "N": 3}));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate function"));

    let (o, _d) = run_config("bounds", &json!({"alpha": ["1"], "N": 3, "typo": 1}));
    assert_eq!(o.status.code(), Some(2));
    let (o, _d) = run_config("design", &json!({"alpha": ["1", "1"], "N_bar": 3.0}));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn design_finds_balanced_column() {
    let (o, _d) = run_config("design", &json!({"alpha": ["1", "1"], "N": 2, "M": 1}));
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["columns"], json!([[1, 1]]));
    assert_eq!(v["r"], json!([1]));
    assert_eq!(v["N"], json!(2));
    assert!(v["residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn design_reports_infeasibility() {
    let (o, _d) = run_config("design", &json!({"alpha": ["1/3", "2/3"], "N": 2, "M": 1}));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible"));

    let cfg = json!({"alpha": ["1", "1"], "N": 2, "M": 1, "solver": {"support_cap": 1}});
    let (o, _d) = run_config("design", &cfg);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn node_budget_exhaustion_is_inconclusive() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "cfg.json", &json!({"alpha": ["1", "1", "1", "1", "1"], "N": 6, "M": 5}));
    let o = pnet(&["design", "--config", cfg.to_str().unwrap()], &[("PNET_NODE_BUDGET", "3")]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("inconclusive"));
    let o = pnet(&["design", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn verify_accepts_solver_output_and_rejects_edits() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "cfg.json", &json!({"alpha": ["2", "-1", "1"], "N": 4, "M": 3}));
    let sched = dir.path().join("schedule.json");
    let o = pnet(&["design", "--config", cfg.to_str().unwrap(), "--out", sched.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));

    let o = pnet(&["verify", sched.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!(v["saturation_residual"].as_f64().unwrap() < 1e-10);
    assert!(v["qfi_deviation"].as_f64().unwrap() < 1e-10);
    assert_eq!(v["target_hit"], json!(true));

    // Move one pass onto a different admissible label.
    let mut s: Value = serde_json::from_slice(&std::fs::read(&sched).unwrap()).unwrap();
    let cols = s["columns"].as_array().unwrap().clone();
    let r: Vec<u64> = serde_json::from_value(s["r"].clone()).unwrap();
    let mut edited = r.clone();
    edited[0] -= 1;
    let mut new_cols = cols.clone();
    new_cols.push(json!([3, 0, 1]));
    edited.push(1);
    s["columns"] = Value::Array(new_cols);
    s["r"] = json!(edited);
    let bad = dir.path().join("edited.json");
    std::fs::write(&bad, serde_json::to_vec(&s).unwrap()).unwrap();
    let o = pnet(&["verify", "--config", bad.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(5));
    let v = stdout_json(&o);
    assert!(v["saturation_residual"].as_f64().unwrap() > 1e-6);
    assert_eq!(v["target_hit"], json!(false));
}

#[test]
fn verify_single_noon_schedule() {
    let dir = TempDir::new().unwrap();
    let (n, m) = (5u64, 3u64);
    let f = ((m * n) as f64).powi(2);
    let file = json!({
        "alpha": ["1"], "N": n, "M": m, "columns": [[n]], "r": [m],
        "qfi": [[f]], "residual": 0.0
    });
    let p = write_config(&dir, "noon.json", &file);
    let o = pnet(&["verify", p.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert!((v["qfi_numeric"][0][0].as_f64().unwrap() - f).abs() < 1e-9 * f);
}

#[test]
fn phase_sweep_is_deterministic_and_heisenberg_like() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({
        "alpha": ["1"], "N": 1, "M": 1, "theta": [1.234],
        "rpe": {"budgets": [2048, 4096, 8192, 16384]}, "trials": 600, "seed": 7
    });
    let p = write_config(&dir, "cfg.json", &cfg);
    let a = pnet(&["simulate-phase", "--config", p.to_str().unwrap()], &[]);
    let b = pnet(&["simulate-phase", "--config", p.to_str().unwrap()], &[]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);

    let mut rdr = csv::Reader::from_reader(a.stdout.as_slice());
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        headers,
        ["alpha", "N", "M", "K", "total_photons", "trials", "mse_empirical", "bound", "ratio", "slope_context"]
    );
    let slope = csv_column(&a.stdout, "slope_context");
    assert_eq!(slope.len(), 4);
    assert!((slope[0] + 2.0).abs() <= 0.2, "slope {}", slope[0]);
    for r in csv_column(&a.stdout, "ratio") {
        assert!(r >= 1.0);
    }

    let c = pnet(&["simulate-phase", "--config", p.to_str().unwrap(), "--seed", "8"], &[]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn phase_simulation_uses_stored_schedule_and_explicit_stages() {
    let dir = TempDir::new().unwrap();
    let design = write_config(&dir, "d.json", &json!({"alpha": ["1", "1"], "N": 4, "M": 2}));
    let sched = dir.path().join("s.json");
    let o = pnet(&["design", "--config", design.to_str().unwrap(), "--out", sched.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    let cfg = json!({
        "alpha": ["1", "1"], "N": 4, "M": 2, "theta": [0.05, 0.03], "schedule": "s.json",
        "rpe": {"multipliers": [1, 2, 4], "repetitions": [30, 16, 10]}, "trials": 200, "seed": 1
    });
    let p = write_config(&dir, "sim.json", &cfg);
    let o = pnet(&["simulate-phase", "--config", p.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let total = csv_column(&o.stdout, "total_photons");
    assert_eq!(total, vec![4.0 * (30.0 + 32.0 + 40.0)]);
    let rows = csv::Reader::from_reader(o.stdout.as_slice()).records().next().unwrap().unwrap();
    assert_eq!(&rows[9], "");
}

#[test]
fn sampling_requires_a_seed() {
    let (o, _d) = run_config("simulate-phase", &json!({"alpha": ["1"], "N": 1, "theta": [0.1]}));
    assert_eq!(o.status.code(), Some(2));
    let (o, _d) = run_config("simulate-displacement", &json!({"alpha": ["1"], "N_bar": 10.0, "theta": [0.1]}));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn displacement_sweep_ratios_approach_one() {
    let cfg = json!({
        "alpha": ["1", "1"], "N_bar_sweep": [10.0, 100.0, 1000.0], "M": 1,
        "theta": [0.02, -0.01], "shots": 100000, "seed": 3
    });
    let (o, _d) = run_config("simulate-displacement", &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        headers,
        ["N_bar", "M", "d", "mse_empirical", "mse_bound_leading", "mse_bound_exact", "ratio", "stderr"]
    );
    let ratio = csv_column(&o.stdout, "ratio");
    let mse = csv_column(&o.stdout, "mse_empirical");
    let exact = csv_column(&o.stdout, "mse_bound_exact");
    let leading = csv_column(&o.stdout, "mse_bound_leading");
    let se = csv_column(&o.stdout, "stderr");
    for i in 0..3 {
        assert!((mse[i] - exact[i]).abs() < 5.0 * se[i]);
        assert!(exact[i] < leading[i]);
    }
    let gaps: Vec<f64> = ratio.iter().map(|r| (r - 1.0).abs()).collect();
    assert!(gaps[0] > gaps[2]);
}

#[test]
fn emitted_json_round_trips() {
    let dir = TempDir::new().unwrap();
    let bounds = write_config(&dir, "b.json", &json!({"alpha": ["3/7", "-1/7", "2/7"], "N": 5, "N_bar": 12.5, "M": 2}));
    let design = write_config(&dir, "d.json", &json!({"alpha": ["3/7", "-1/7", "2/7"], "N": 3, "M": 5}));
    for (sub, cfg) in [("bounds", &bounds), ("design", &design)] {
        let out = dir.path().join(format!("{sub}.json"));
        let o = pnet(&[sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
        assert_eq!(o.status.code(), Some(0), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
        let text = std::fs::read_to_string(&out).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        let again = serde_json::to_string_pretty(&v).unwrap();
        assert_eq!(serde_json::from_str::<Value>(&again).unwrap(), v);
    }
    let summary: pnet_core::bounds::BoundSummary =
        serde_json::from_slice(&std::fs::read(dir.path().join("bounds.json")).unwrap()).unwrap();
    let text = serde_json::to_string(&summary).unwrap();
    assert_eq!(serde_json::from_str::<pnet_core::bounds::BoundSummary>(&text).unwrap(), summary);
    let report: pnet_core::design::ScheduleReport =
        serde_json::from_slice(&std::fs::read(dir.path().join("design.json")).unwrap()).unwrap();
    let s = report.to_schedule().unwrap();
    assert_eq!(pnet_core::design::ScheduleReport::from_schedule(&s), report);
}
