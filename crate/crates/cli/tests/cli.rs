//! End-to-end CLI contract: the generate/invert/evaluate/render pipeline on
//! a tiny problem, plus the pinned exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn elastinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elastinv"))
        .args(args)
        .output()
        .expect("spawn elastinv")
}

fn tmpdir(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("elastinv-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn pipeline_runs_end_to_end() {
    let root = tmpdir("pipe");
    let data = root.join("data");
    let runs = root.join("runs");
    let data_s = data.to_str().unwrap();

    let out = elastinv(&["generate", "--output", data_s, "--nx", "16", "--ny", "16"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["meta.json", "strain_xx.csv", "strain_yy.csv", "strain_xy.csv", "truth_E.csv"] {
        assert!(data.join(f).is_file(), "missing {f}");
    }

    // Identical invocation is byte-identical (determinism).
    let data2 = root.join("data2");
    let out = elastinv(&["generate", "--output", data2.to_str().unwrap(), "--nx", "16", "--ny", "16"]);
    assert!(out.status.success());
    for f in ["meta.json", "strain_xx.csv"] {
        assert_eq!(
            std::fs::read(data.join(f)).unwrap(),
            std::fs::read(data2.join(f)).unwrap(),
            "{f} differs between identical generate calls"
        );
    }

    // Noise changes the strains and is recorded in the metadata.
    let noisy = root.join("noisy");
    let out = elastinv(&[
        "generate", "--output", noisy.to_str().unwrap(), "--nx", "16", "--ny", "16",
        "--noise", "0.1", "--noise-seed", "7",
    ]);
    assert!(out.status.success());
    assert_ne!(
        std::fs::read(data.join("strain_xx.csv")).unwrap(),
        std::fs::read(noisy.join("strain_xx.csv")).unwrap()
    );
    let meta = std::fs::read_to_string(noisy.join("meta.json")).unwrap();
    assert!(meta.contains("\"level\": 0.1"));

    let out = elastinv(&[
        "invert", "--data", data_s, "--output", runs.to_str().unwrap(),
        "--variant", "ps-w1", "--epochs", "2", "--seeds", "1,2",
        "--features", "4,8", "--hidden", "8,8",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "run-1/est_E.csv", "run-1/est_nu.csv", "run-1/losses.csv",
        "run-1/psi_constitutive.csv", "run-1/est_stress_xx.csv",
        "run-2/losses.csv", "aggregate/mean_E.csv", "aggregate/summary.json",
    ] {
        assert!(runs.join(f).is_file(), "missing {f}");
    }

    // Variant P carries neither stress estimates nor weight maps.
    let runs_p = root.join("runs-p");
    let out = elastinv(&[
        "invert", "--data", data_s, "--output", runs_p.to_str().unwrap(),
        "--variant", "p", "--epochs", "1", "--seeds", "1",
        "--features", "4,8", "--hidden", "8,8",
    ]);
    assert!(out.status.success());
    assert!(runs_p.join("run-1/est_E.csv").is_file());
    assert!(!runs_p.join("run-1/est_stress_xx.csv").exists());
    assert!(!runs_p.join("run-1/psi_constitutive.csv").exists());

    let out = elastinv(&["evaluate", "--data", data_s, "--results", runs.to_str().unwrap()]);
    assert!(out.status.success());
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("median_err_E"), "report: {report}");

    let ppm = root.join("e.ppm");
    let est = runs.join("run-1/est_E.csv");
    let out = elastinv(&["render", est.to_str().unwrap(), ppm.to_str().unwrap()]);
    assert!(out.status.success());
    let bytes = std::fs::read(&ppm).unwrap();
    assert!(bytes.starts_with(b"P6\n16 16\n255\n"));
    assert_eq!(bytes.len(), b"P6\n16 16\n255\n".len() + 3 * 16 * 16);

    std::fs::remove_dir_all(&root).unwrap();
}

#[test]
fn exit_codes_follow_the_contract() {
    // 1: usage errors.
    assert_eq!(elastinv(&["invert"]).status.code(), Some(1));
    assert_eq!(elastinv(&["frobnicate"]).status.code(), Some(1));
    let missing = Path::new("/nonexistent-elastinv");
    assert_eq!(
        elastinv(&["generate", "--output", "/tmp/x", "--nx", "1", "--ny", "1"]).status.code(),
        Some(1),
        "degenerate grid is an invalid argument"
    );
    // 2: data/format errors.
    assert_eq!(
        elastinv(&[
            "invert", "--data", missing.to_str().unwrap(), "--output", "/tmp/elastinv-cli-x",
            "--variant", "ps", "--epochs", "1",
        ])
        .status
        .code(),
        Some(2)
    );
    let bad = tmpdir("badcsv");
    std::fs::write(bad.join("f.csv"), "not,a\nnumber,grid\n").unwrap();
    let out = elastinv(&[
        "render",
        bad.join("f.csv").to_str().unwrap(),
        bad.join("f.ppm").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    // 0: help and version.
    assert_eq!(elastinv(&["--help"]).status.code(), Some(0));
    std::fs::remove_dir_all(&bad).unwrap();
}
