use std::path::Path;
use std::process::Command;

use uir_cli::bench::{run_benchmark, Method};
use uir_cli::config::{ExperimentConfig, NoiseSpec, RegressionSpec};
use uir_cli::diagnose::{diagnose, DiagnoseOptions, Perturbation};
use uir_cli::emit::{read_csv, write_csv};

fn uir() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uir"))
}

fn write_config(dir: &Path, config: &ExperimentConfig) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        regression: RegressionSpec::ClippedExponential { rate: 2.0 },
        noise: NoiseSpec::Gaussian { sd: 0.3 },
        sizes: vec![50, 200],
        replications: 3,
        seed: 42,
        p_list: vec![1.0, 2.0],
        ..ExperimentConfig::default()
    }
}

fn without_seconds(csv: &str) -> String {
    csv.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f[5] = "-";
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn benchmark_has_one_row_per_cell_and_is_deterministic() {
    let config = small_config();
    let a = run_benchmark(&config).unwrap();
    assert_eq!(a.len(), 2 * 3 * 3 * 2);
    assert!(a.iter().all(|r| r.error.is_some_and(|e| e >= 0.0)));
    let b = run_benchmark(&config).unwrap();
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    write_csv(&a, &mut ca).unwrap();
    write_csv(&b, &mut cb).unwrap();
    let (ca, cb) = (String::from_utf8(ca).unwrap(), String::from_utf8(cb).unwrap());
    assert_eq!(without_seconds(&ca), without_seconds(&cb));
    // replication r uses seed + r
    assert!(a.iter().all(|r| r.seed == 42 + r.rep as u64));
    assert_eq!(read_csv(ca.as_bytes()).unwrap(), a);
}

#[test]
fn bench_subcommand_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config());
    let (csv, svg) = (dir.path().join("rows.csv"), dir.path().join("plot.svg"));
    let status = uir()
        .args(["bench", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .arg("--svg")
        .arg(&svg)
        .status()
        .unwrap();
    assert!(status.success());
    let rows = read_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 36);
    let plot = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(plot.matches("<polyline").count(), Method::ALL.len());
}

#[test]
fn simulate_then_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        noise: NoiseSpec::PointMass,
        ..small_config()
    };
    let cfg = write_config(dir.path(), &config);
    let data = dir.path().join("data.csv");
    let status = uir()
        .args(["simulate", "--n", "300", "--seed", "5", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&data)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&data).unwrap();
    assert!(text.starts_with("x,y\n"));
    assert_eq!(text.lines().count(), 301);

    let mut fits = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(format!("fit{seed}.csv"));
        let status = uir()
            .args(["estimate", "--noise-family", "point-mass", "--V", "1", "--seed", seed, "--input"])
            .arg(&data)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        fits.push(std::fs::read_to_string(&out).unwrap());
    }
    // different shuffles of the same multiset give the same fit
    assert_eq!(fits[0], fits[1]);
    let spacing = 1.0 / 300f64.powf(0.25);
    for (i, line) in fits[0].lines().skip(1).enumerate() {
        let mut parts = line.split(',').map(|s| s.parse::<f64>().unwrap());
        let (x, fitted) = (parts.next().unwrap(), parts.next().unwrap());
        assert!((x - (i + 1) as f64 / 300.0).abs() < 1e-12);
        let truth = RegressionSpec::ClippedExponential { rate: 2.0 }.eval(x, 1.0);
        assert!((fitted - truth).abs() <= spacing, "x={x}: {fitted} vs {truth}");
    }
}

#[test]
fn invalid_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x,z\n0.5,1\n").unwrap();
    let out = dir.path().join("o.csv");
    let status = uir()
        .args(["estimate", "--noise-family", "gaussian", "--noise-param", "0.3", "--V", "1", "--input"])
        .arg(&bad)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    std::fs::write(&bad, "x,y\n0.1,0\n0.2,0\n").unwrap();
    let status = uir()
        .args(["estimate", "--noise-family", "gaussian", "--noise-param", "0.3", "--V", "1", "--input"])
        .arg(&bad)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1), "n < 3 is rejected");

    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"regression": {"family": "linear"}, "V": -1, "noise": {"family": "point_mass"}, "sizes": [10]}"#).unwrap();
    let status = uir().args(["bench", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn diagnostics_pass_by_default_and_fail_when_perturbed() {
    let report = diagnose(&DiagnoseOptions::default()).unwrap();
    assert!(report.all_passed(), "{}", report.to_table());
    let mut names: Vec<&str> = report.checks.iter().map(|c| c.name).collect();
    let total = names.len();
    names.sort_unstable();
    names.dedup();
    assert_eq!(names.len(), total, "every check listed once");

    let perturbed = diagnose(&DiagnoseOptions {
        perturbation: Some(Perturbation::MomentGap(1e-3)),
        ..DiagnoseOptions::default()
    })
    .unwrap();
    assert!(!perturbed.check("priors").unwrap().passed);
    assert!(!perturbed.all_passed());

    let status = uir().args(["diagnose", "--perturb-moments", "1e-3"]).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
    let table = String::from_utf8(status.stdout).unwrap();
    assert!(table.contains("priors.status = fail"));
}
