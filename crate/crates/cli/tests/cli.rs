use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gramor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gramor"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("GRAMOR_THREADS")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, k: usize, mode: &str) -> PathBuf {
    let file = dir.join(format!("heat-{mode}-{k}.json"));
    let out = gramor(&[
        "generate-benchmark",
        "--k",
        &k.to_string(),
        "--mode",
        mode,
        "--out",
        path_str(&file),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    file
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn smallest_bilinear_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let file = generate(dir.path(), 2, "bilinear");
    let sys = read_json(&file);
    assert_eq!(sys["n"], 4);
    assert_eq!(sys["m"], 2);
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = gramor(&["generate-benchmark", "--mode", "stochastic"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--k"));

    let out = gramor(&["reproduce", "--target", "table2"]);
    assert_eq!(out.status.code(), Some(2));

    let sys = generate(dir.path(), 3, "stochastic");
    let out = gramor(&[
        "reduce",
        "--system",
        path_str(&sys),
        "--r",
        "0",
        "--out",
        path_str(&dir.path().join("r0")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = gramor(&["bounds", "--system", path_str(&sys)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reduce_writes_rom_spectrum_and_hankel_values() {
    let dir = tempfile::tempdir().unwrap();
    let sys = generate(dir.path(), 4, "stochastic");
    let out_dir = dir.path().join("reduce");
    let out = gramor(&[
        "reduce",
        "--system",
        path_str(&sys),
        "--method",
        "both",
        "--r",
        "3",
        "--out",
        path_str(&out_dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "rom-os.json",
        "rom-bt.json",
        "observability.json",
        "spectrum.csv",
        "hankel.csv",
    ] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let spectrum = fs::read_to_string(out_dir.join("spectrum.csv")).unwrap();
    let lines: Vec<&str> = spectrum.lines().collect();
    assert_eq!(lines.len(), 17);
    assert!(lines[0].chars().any(|c| c.is_alphabetic()));
    // 17 significant digits
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(
        first[1]
            .split('e')
            .next()
            .unwrap()
            .trim_start_matches('-')
            .len(),
        18
    );

    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["timings"]["observabilityGramian"]
        .as_f64()
        .is_some());
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn bound_sweep_and_representations_agree() {
    let dir = tempfile::tempdir().unwrap();
    let sys = generate(dir.path(), 4, "stochastic");
    let mut columns = Vec::new();
    for rep in ["general", "weighted"] {
        let out_dir = dir.path().join(rep);
        let out = gramor(&[
            "bounds",
            "--system",
            path_str(&sys),
            "--sweep",
            "1:8",
            "--representation",
            rep,
            "--out",
            path_str(&out_dir),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let mut rdr = csv::Reader::from_path(out_dir.join("bounds.csv")).unwrap();
        let header = rdr.headers().unwrap().clone();
        let col = header
            .iter()
            .position(|h| h == "inputIndependentFactor")
            .unwrap();
        let vals: Vec<f64> = rdr
            .records()
            .map(|r| r.unwrap()[col].parse().unwrap())
            .collect();
        assert_eq!(vals.len(), 8);
        assert!(vals.windows(2).all(|w| w[1] <= w[0]));
        columns.push(vals);
    }
    for (g, w) in columns[0].iter().zip(&columns[1]) {
        assert!((g - w).abs() <= 1e-8 * g);
    }
}

#[test]
fn rom_of_another_system_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), 3, "stochastic");
    let b = generate(dir.path(), 4, "stochastic");
    let out_dir = dir.path().join("rom");
    assert!(gramor(&[
        "reduce",
        "--system",
        path_str(&a),
        "--r",
        "2",
        "--out",
        path_str(&out_dir)
    ])
    .status
    .success());
    let out = gramor(&[
        "bounds",
        "--system",
        path_str(&b),
        "--rom",
        path_str(&out_dir.join("rom-os.json")),
        "--out",
        path_str(&dir.path().join("b")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stability_check_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let sys = generate(dir.path(), 3, "bilinear");
    let out = gramor(&[
        "stability-check",
        "--system",
        path_str(&sys),
        "--out",
        path_str(&dir.path().join("s")),
    ]);
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["verdict"], "asymptotically-stable");
    assert_eq!(report["rescaled"], true);
    assert!(report["abscissa"].as_f64().unwrap() < 0.0);
}

#[test]
fn simulate_writes_a_mean_error_curve() {
    let dir = tempfile::tempdir().unwrap();
    let sys = generate(dir.path(), 3, "stochastic");
    let red = dir.path().join("red");
    assert!(gramor(&[
        "reduce",
        "--system",
        path_str(&sys),
        "--r",
        "2",
        "--out",
        path_str(&red)
    ])
    .status
    .success());
    let sim = dir.path().join("sim");
    let out = gramor(&[
        "simulate",
        "--system",
        path_str(&sys),
        "--rom",
        path_str(&red.join("rom-os.json")),
        "--samples",
        "256",
        "--seed",
        "4",
        "--out",
        path_str(&sim),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut rdr = csv::Reader::from_path(sim.join("simulate.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["t", "meanError", "stderr"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 257);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 0.0);
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn manifest_rerun_reproduces_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let out = gramor(&[
        "reproduce",
        "--target",
        "table1",
        "--k",
        "4",
        "--r",
        "3",
        "--samples",
        "300",
        "--seed",
        "5",
        "--threads",
        "1",
        "--out",
        path_str(&first),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let second = dir.path().join("second");
    let out = gramor(&[
        "rerun",
        "--manifest",
        path_str(&first.join("manifest.json")),
        "--threads",
        "3",
        "--out",
        path_str(&second),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let a = csv_files(&first);
    assert_eq!(a.len(), 3);
    assert_eq!(a, csv_files(&second));
    let table =
        String::from_utf8(a.iter().find(|(n, _)| n == "table1.csv").unwrap().1.clone()).unwrap();
    assert!(table.starts_with("method,errorBound,maxMeanError"));
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn rerun_refuses_changed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let sys = generate(dir.path(), 3, "stochastic");
    let red = dir.path().join("red");
    assert!(gramor(&[
        "reduce",
        "--system",
        path_str(&sys),
        "--r",
        "2",
        "--out",
        path_str(&red)
    ])
    .status
    .success());
    let mut text = fs::read_to_string(&sys).unwrap();
    text.push('\n');
    fs::write(&sys, text).unwrap();
    let out = gramor(&[
        "rerun",
        "--manifest",
        path_str(&red.join("manifest.json")),
        "--out",
        path_str(&dir.path().join("again")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("changed"));
}
