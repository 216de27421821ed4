use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bridgesens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bridgesens"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
    p
}

fn sim_spec(n: usize, p: usize, mediator: f64) -> Value {
    let mut coefs = vec![0.2, 1.0];
    coefs.extend(vec![0.3; p]);
    json!({
        "n": n, "p": p, "treat_prob": 0.5,
        "mediator_coefs": coefs,
        "mediator_variance": 1.0,
        "outcome": {"intercept": 0.5, "treatment": 0.4, "mediator": mediator, "interaction": 0.0,
                    "covariates": vec![0.2; p]},
        "outcome_variance": 1.0, "latent_strength": 0.0,
        "benchmark": {"low": 0.0, "high": 5.0, "outcome_coef": 0.3, "mediator_coef": 0.4}
    })
}

/// Simulates a dataset into `dir/data` and returns the CSV path.
fn simulate(dir: &Path, spec: Value, seed: u64) -> PathBuf {
    let cfg = write_config(dir, "sim.json", &json!({"seed": seed, "simulate": spec}));
    let o = bridgesens(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.join("data").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("data/synthetic.csv")
}

fn columns(p: usize, with_w: bool) -> Value {
    let mut c = json!({"treatment": "a", "mediator": "m", "outcome": "y",
                       "covariates": (1..=p).map(|j| format!("x{j}")).collect::<Vec<_>>()});
    if with_w {
        c["benchmark"] = json!("w");
    }
    c
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn parse(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn simulate_framing_sized_file_and_repeat_bytes() {
    let dir = TempDir::new().unwrap();
    let csv = simulate(dir.path(), sim_spec(265, 4, 0.6), 12);
    let (header, rows) = read_csv(&csv);
    assert_eq!(rows.len(), 265);
    assert_eq!(header, ["x1", "x2", "x3", "x4", "a", "m", "y", "w"]);
    let first = fs::read(&csv).unwrap();
    let truth = fs::read(dir.path().join("data/truth.json")).unwrap();
    simulate(dir.path(), sim_spec(265, 4, 0.6), 12);
    assert_eq!(fs::read(&csv).unwrap(), first);
    assert_eq!(fs::read(dir.path().join("data/truth.json")).unwrap(), truth);
}

#[test]
fn simulate_rejects_invalid_variance() {
    let dir = TempDir::new().unwrap();
    let mut spec = sim_spec(100, 1, 0.6);
    spec["outcome_variance"] = json!(-1.0);
    let cfg = write_config(dir.path(), "sim.json", &json!({"simulate": spec}));
    let o = bridgesens(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn malformed_configs_exit_with_config_code() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\"draws\": ").unwrap();
    assert_eq!(code(&bridgesens(&["fit", "--config", cfg.to_str().unwrap()])), 2);
    let cfg = write_config(dir.path(), "neg.json", &json!({"setting": {"calibration": {"route": "residual_budget", "k": [2, 2], "g": [2, 2]}}}));
    assert_eq!(code(&bridgesens(&["sweep", "--config", cfg.to_str().unwrap()])), 2);
    let o = bridgesens(&["fit", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn fit_recovers_null_dataset_coefficients() {
    let dir = TempDir::new().unwrap();
    let mut spec = sim_spec(2000, 1, 0.0);
    spec["benchmark"] = Value::Null;
    let csv = simulate(dir.path(), spec, 5);
    let cfg = write_config(
        dir.path(),
        "fit.json",
        &json!({"input": csv, "columns": columns(1, false), "draws": 400, "burn_in": 0, "seed": 2}),
    );
    let out = dir.path().join("fit");
    let o = bridgesens(&["fit", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&fs::read(out.join("fit_report.json")).unwrap()).unwrap();
    let param = |name: &str| {
        report["parameters"]
            .as_array()
            .unwrap()
            .iter()
            .find(|p| p["name"] == name)
            .unwrap_or_else(|| panic!("{name} missing"))
            .clone()
    };
    for (name, truth) in [("mediator.a", 1.0), ("mediator.x1", 0.3), ("outcome.a", 0.4)] {
        let p = param(name);
        let (mean, sd) = (p["mean"].as_f64().unwrap(), p["sd"].as_f64().unwrap());
        assert!((mean - truth).abs() < 4.0 * sd, "{name}: {mean} +- {sd}");
    }
    assert!((param("mediator.sigma2")["mean"].as_f64().unwrap() - 1.0).abs() < 0.1);
    let (header, rows) = read_csv(&out.join("fit_draws.csv"));
    assert_eq!(rows.len(), 400);
    assert_eq!(header.len(), 2 + 4 + 9);
}

#[test]
fn fit_names_a_missing_column() {
    let dir = TempDir::new().unwrap();
    let csv = simulate(dir.path(), sim_spec(100, 1, 0.6), 5);
    let mut cols = columns(1, false);
    cols["mediator"] = json!("emo");
    let cfg = write_config(dir.path(), "fit.json", &json!({"input": csv, "columns": cols}));
    let o = bridgesens(&["fit", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("emo"));
}

fn sweep_config(csv: &Path, with_w: bool) -> Value {
    let mut sweeps = vec![json!({
        "setting": {"calibration": {"route": "residual_budget", "k": [0.25, 0.25], "g": [1, 1]}},
        "axis": "g", "grid": [1, 1.25, 1.5, 2, 3],
        "overlay": {"axis": "k", "values": [0.25, 0.5, 1.0]}
    })];
    if with_w {
        sweeps.push(json!({
            "setting": {"calibration": {"route": "benchmark", "scale": "raw", "lambda": [1, 1], "kappa": [1, 1]}},
            "axis": "kappa", "grid": [1, 1.5, 2, 3],
            "overlay": {"axis": "lambda", "values": [1, 1.5, 2]}
        }));
    }
    json!({"input": csv, "columns": columns(1, with_w), "draws": 80, "burn_in": 5, "mediator_draws": 10,
           "seed": 4, "sweeps": sweeps})
}

#[test]
fn sweep_tables_honor_their_contracts() {
    let dir = TempDir::new().unwrap();
    let csv = simulate(dir.path(), sim_spec(300, 1, 0.6), 8);
    let cfg = write_config(dir.path(), "sweep.json", &sweep_config(&csv, true));
    let out = dir.path().join("sw");
    let o = bridgesens(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let (header, kappa) = read_csv(&out.join("sweep_kappa_by_lambda.csv"));
    assert_eq!(header[..3], ["overlay", "value", "si_center"]);
    assert_eq!(kappa.len(), 12);
    let hw = header.iter().position(|h| h == "half_width").unwrap();
    for group in kappa.chunks(4) {
        for w in group.windows(2) {
            assert!(parse(&w[1][hw]) >= parse(&w[0][hw]));
        }
    }
    assert!(kappa.iter().all(|r| r[2] == kappa[0][2]));

    let (_, g) = read_csv(&out.join("sweep_g_by_k.csv"));
    assert_eq!(g.len(), 15);
    for j in 0..5 {
        let widths: Vec<f64> = (0..3).map(|o| parse(&g[o * 5 + j][hw])).collect();
        assert!(widths[0] <= widths[1] && widths[1] <= widths[2]);
        if j == 0 {
            assert_eq!(widths, [0.0; 3]);
        }
    }
    let (dh, draws) = read_csv(&out.join("run_draws.csv"));
    assert_eq!(dh.len(), 13);
    assert_eq!(draws.len(), 80);
    let summary: Value = serde_json::from_slice(&fs::read(out.join("run_summary.json")).unwrap()).unwrap();
    assert!(summary["summary"]["quantities"]["nie"]["mean"].is_f64());
    let archived: Value = serde_json::from_slice(&fs::read(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(archived["seed"], 4);
}

#[test]
fn sweep_benchmark_route_without_benchmark_column_is_rejected() {
    let dir = TempDir::new().unwrap();
    let csv = simulate(dir.path(), sim_spec(200, 1, 0.6), 8);
    let mut cfg = sweep_config(&csv, true);
    cfg["columns"] = columns(1, false);
    let cfg = write_config(dir.path(), "sweep.json", &cfg);
    let o = bridgesens(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_default_run_passes_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = bridgesens(&["verify", "--seed", "7", "--out", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.contains(" PASS ")).count(), 12);
    assert_eq!(code(&bridgesens(&["verify", "--seed", "7", "--out", b.to_str().unwrap()])), 0);
    assert_eq!(
        fs::read(a.join("verify_report.json")).unwrap(),
        fs::read(b.join("verify_report.json")).unwrap()
    );
    assert!(!a.join("failing_models.json").exists());
}

#[test]
fn verify_reports_an_injected_corrupt_model() {
    let dir = TempDir::new().unwrap();
    let o = bridgesens(&["verify", "--models", "30", "--inject-corrupt", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    let dump: Value = serde_json::from_slice(&fs::read(dir.path().join("failing_models.json")).unwrap()).unwrap();
    let dump = dump.as_array().unwrap();
    assert_eq!(dump.len(), 1);
    assert_eq!(dump[0]["index"], 30);
    assert!(dump[0]["checks"].as_array().unwrap().contains(&json!("sharp_bound")));
    assert!(dump[0]["model"]["outcome_mean"].is_array());
}
