use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hamlab(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hamlab"));
    cmd.args(args).env_remove("HAMLAB_SEED");
    if let Some(s) = env_seed {
        cmd.env("HAMLAB_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn report_body(dir: &Path) -> Value {
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    v["body"].clone()
}

const SMALL_SHOCK: &str = r#"
scenario = "shock"
n_list = [40, 80]
replicas = 6
grid = [[-0.5, 1.0], [0.0, 1.0], [1.0, 1.0], [1.5, 1.0], [0.0, 0.0]]
seed = 3
# tiny n needs more room for minimizer fluctuations
margin = 2.0
tests = ["limit_law", "variance", "spread_decrease"]
xi_tests = [[0.0, 0.5, 0.5]]
"#;

#[test]
fn run_writes_schema_valid_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "shock.toml", SMALL_SHOCK);
    let out = dir.path().join("out");
    let o = hamlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(o.status.code().unwrap() <= 1, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("scenario,n,replica,x,t,zeta_n,argmin_over_n"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2 * 6 * 5);
    for row in &rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f.len(), 7);
        assert_eq!(f[0], "shock");
        let z = f[5];
        assert!(z == "0" || z.split('e').next().unwrap().trim_start_matches('-').len() == 13, "{z}");
        assert_eq!(f[6], "");
    }
    let body = report_body(&out);
    assert_eq!(body["verdicts"].as_array().unwrap().len(), 3);
    assert_eq!(body["summaries"].as_array().unwrap().len(), 2 * 5);
    assert_eq!(body["xi_summaries"].as_array().unwrap().len(), 2);
    assert_eq!(body["seed"], 3);
}

#[test]
fn reports_do_not_depend_on_workers_or_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "shock.toml", SMALL_SHOCK);
    let mut bodies = Vec::new();
    let mut csvs = Vec::new();
    for (k, workers) in ["1", "1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("out{k}"));
        let o = hamlab(&["run", "--config", &cfg, "--workers", workers, "--out", out.to_str().unwrap()], None);
        assert!(o.status.code().unwrap() <= 1, "{}", String::from_utf8_lossy(&o.stderr));
        bodies.push(report_body(&out));
        csvs.push(std::fs::read(out.join("samples.csv")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    assert_eq!(bodies[0], bodies[2]);
    assert_eq!(csvs[0], csvs[2]);
    // a different seed changes the samples
    let out = dir.path().join("other");
    let o = hamlab(&["run", "--config", &cfg, "--seed", "4", "--out", out.to_str().unwrap()], None);
    assert!(o.status.code().unwrap() <= 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert_ne!(std::fs::read(out.join("samples.csv")).unwrap(), csvs[0]);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "eq.toml",
        "scenario = \"equilibrium\"\nn_list = [20]\nreplicas = 1\n",
    );
    let out = dir.path().join("out");
    let o = hamlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], Some("77"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report_body(&out)["seed"], 77);
    let o = hamlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], Some("seven"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tagged_and_step_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tagged.toml",
        "scenario = \"tagged\"\nn_list = [30]\nreplicas = 2\nt_horizon = 2.0\nt_steps = 4\n",
    );
    let out = dir.path().join("tagged");
    let o = hamlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    let rows: Vec<Vec<String>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(rows.len(), 2 * 4);
    // the tagged particle's minimizer only moves left
    let mins: Vec<f64> = rows[..4].iter().map(|r| r[6].parse().unwrap()).collect();
    assert!(mins.windows(2).all(|w| w[1] <= w[0]), "{mins:?}");

    let cfg = write(
        dir.path(),
        "bdj.toml",
        "scenario = \"bdj_step\"\nn_list = [50, 100, 200]\nreplicas = 20\ntests = [\"scaling_exponent\"]\n",
    );
    let out = dir.path().join("bdj");
    let o = hamlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(o.status.code().unwrap() <= 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report_body(&out)["verdicts"][0]["name"], "scaling_exponent");
}

#[test]
fn config_errors_exit_with_usage_status() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("scenario = \"shock\"\nreplicas = 0\n", "replicas"),
        ("scenario = \"shock\"\nreplica = 3\n", "unknown field"),
        ("scenario = \"custom\"\n", "breakpoints"),
        ("scenario = \"shock\"\ntests = [\"scaling_exponent\"]\n", "scaling_exponent"),
        ("scenario = \"shock\"\n[tolerances]\nalpha = 1.5\n", "alpha"),
        ("scenario = \"shock\"\ngrid = [[0.0, -1.0]]\n", "grid[0]"),
        ("scenario = \"bdj_step\"\ndensities = [1.0]\n", "bdj_step"),
    ];
    for (k, (text, needle)) in cases.iter().enumerate() {
        let cfg = write(dir.path(), &format!("bad{k}.toml"), text);
        let o = hamlab(&["run", "--config", &cfg], None);
        assert_eq!(o.status.code(), Some(2), "{text}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "{text}: {err}");
    }
    let o = hamlab(&["run"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = hamlab(&["frobnicate"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn window_too_small_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tight.toml",
        "scenario = \"equilibrium\"\nn_list = [200]\nreplicas = 8\nguard = 0\nmargin = 0.0\ngrid = [[0.0, 1.0]]\n",
    );
    let o = hamlab(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("suggested i_min"));
}

#[test]
fn verify_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let o = hamlab(&["verify", "--bundle", "unit-oracles", "--out", dir.path().to_str().unwrap()], None);
    let table = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{table}");
    assert_eq!(table.lines().filter(|l| l.starts_with("PASS")).count(), 3);
    assert!(dir.path().join("verify.json").exists());

    let o = hamlab(&["verify", "--bundle", "no-such-bundle"], None);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write(dir.path(), "v.toml", "bundle = \"unit-oracles\"\n[tolerances]\nsemigroup_tol = -1.0\n");
    let o = hamlab(&["verify", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("semigroup_tol"));
    // a tolerance nothing can meet fails the bundle
    let cfg = write(dir.path(), "w.toml", "bundle = \"unit-oracles\"\n[tolerances]\nweak_ratio = 100.0\n");
    let o = hamlab(&["verify", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(1));
    let o = hamlab(&["verify", "--list"], None);
    assert!(String::from_utf8_lossy(&o.stdout).contains("shock-fluctuations: A3 A4"));
}
