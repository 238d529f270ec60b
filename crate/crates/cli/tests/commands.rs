use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BANANA: &str = r#"
integrators = ["glf_a", "im_a"]
step_sizes = [0.1]
num_steps = [5]
num_samples = 10000
burn_in = 1000
seed = 1
timing = false

[model]
name = "banana"
"#;

fn rmhmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmhmc")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("experiment.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn banana_grid_writes_one_row_per_integrator() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), BANANA);
    let out = tmp.path().join("reports");
    let result = rmhmc(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));

    let (header, rows) = read_csv(&out.join("runs.csv"));
    assert_eq!(&header[..8], ["step_size", "num_steps", "method", "acceptance", "mean_ess", "min_ess", "mean_ess_per_sec", "min_ess_per_sec"]);
    assert_eq!(rows.len(), 2);
    let acc = column(&header, "acceptance");
    let method = column(&header, "method");
    for row in &rows {
        let a: f64 = row[acc].parse().unwrap();
        match row[method].as_str() {
            "glf_a" => assert!((0.50..=0.72).contains(&a), "glf_a {a}"),
            "im_a" => assert!(a >= 0.95, "im_a {a}"),
            other => panic!("unexpected method {other}"),
        }
        // Every row carries the configuration that produced it.
        assert_eq!(row[0], "0.1");
        assert_eq!(row[1], "5");
        assert_eq!(row[column(&header, "tolerance")], "0.000001");
        assert_eq!(row[column(&header, "seed")], "1");
        assert_eq!(row[column(&header, "status")], "ok");
        // Timing disabled: ESS/sec and wall time are blank.
        assert_eq!(row[column(&header, "mean_ess_per_sec")], "");
        assert_eq!(row[column(&header, "wall_time")], "");
    }

    let (probe_header, probes) = read_csv(&out.join("probes.csv"));
    assert_eq!(&probe_header[..4], ["method", "step_size", "num_steps", "tolerance"]);
    // 2 runs × 100 probes × 3 tolerances.
    assert_eq!(probes.len(), 600);
    let manifest: toml::Table = fs::read_to_string(out.join("manifest.toml")).unwrap().parse().unwrap();
    assert_eq!(manifest["run_count"].as_integer(), Some(2));
    assert_eq!(manifest["config"]["model"]["name"].as_str(), Some("banana"));
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn replications_add_an_aggregate_row() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), BANANA);
    let out = tmp.path().join("reps");
    let result = rmhmc(&[
        "run", "--config", &config, "--out", out.to_str().unwrap(),
        "--set", "replications=10", "--set", "num_samples=300", "--set", "burn_in=50",
        "--set", "probes=5", "--set", "tolerances=[1e-6]",
    ]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let (header, rows) = read_csv(&out.join("runs.csv"));
    assert_eq!(rows.len(), 2 * 11);
    let rep = column(&header, "replication");
    let acc = column(&header, "acceptance");
    let acc_se = column(&header, "acceptance_se");
    for cell in rows.chunks(11) {
        let values: Vec<f64> = cell[..10].iter().map(|r| r[acc].parse().unwrap()).collect();
        assert!(cell[..10].iter().enumerate().all(|(i, r)| r[rep] == i.to_string()));
        assert!(cell[..10].iter().all(|r| r[acc_se].is_empty()));
        let aggregate = &cell[10];
        assert_eq!(aggregate[rep], "mean");
        let mean = values.iter().sum::<f64>() / 10.0;
        let se = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0 / 10.0).sqrt();
        assert!((aggregate[acc].parse::<f64>().unwrap() - mean).abs() < 1e-12);
        assert!((aggregate[acc_se].parse::<f64>().unwrap() - se).abs() < 1e-12);
    }
}

#[test]
fn empty_integrator_list_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &BANANA.replace(r#"["glf_a", "im_a"]"#, "[]"));
    let result = rmhmc(&["run", "--config", &config, "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&result.stderr).contains("integrator list is empty"));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn unreadable_config_and_unknown_model_exit_with_one() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(rmhmc(&["run", "--config", "/nonexistent/exp.toml"]).status.code(), Some(1));
    let config = write_config(tmp.path(), &BANANA.replace("\"banana\"", "\"rosenbrock\""));
    let result = rmhmc(&["run", "--config", &config]);
    assert_eq!(result.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&result.stderr).contains("rosenbrock"));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), BANANA);
    let out = tmp.path().join("out");
    let files = ["runs.csv", "probes.csv", "manifest.toml"];
    let mut snapshots = Vec::new();
    for threads in ["1", "3"] {
        let result = rmhmc(&[
            "run", "--config", &config, "--out", out.to_str().unwrap(), "--threads", threads,
            "--set", "num_samples=500", "--set", "replications=2", "--set", "probes=10",
        ]);
        assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
        snapshots.push(files.map(|f| fs::read(out.join(f)).unwrap()));
    }
    for (i, file) in files.iter().enumerate() {
        assert!(snapshots[0][i] == snapshots[1][i], "{file} differs between reruns");
    }
}

#[test]
fn seed_flag_overrides_file_and_missing_directories_are_created() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), BANANA);
    let out = tmp.path().join("deep/nested/dir");
    let result = rmhmc(&[
        "run", "--config", &config, "--out", out.to_str().unwrap(), "--seed", "77",
        "--set", "seed=5", "--set", "num_samples=100", "--set", "probes=2", "--set", "integrators=[\"im_b\"]",
    ]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let (header, rows) = read_csv(&out.join("runs.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][column(&header, "seed")], "77");
    assert_eq!(rows[0][column(&header, "method")], "im_b");
}

#[test]
fn list_models_names_every_bundled_model() {
    let result = rmhmc(&["list-models"]);
    assert!(result.status.success());
    let text = String::from_utf8(result.stdout).unwrap();
    for name in ["gaussian", "banana", "funnel", "logistic", "oscillator"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing from:\n{text}");
    }
}
