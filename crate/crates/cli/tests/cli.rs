use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rnp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rnp"))
        .args(args)
        .output()
        .expect("rnp binary runs")
}

fn shipped(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const SMALL: &str = "[rnp]\nnx = 16\nP0_amp = 0.1\nP0_noise = 0.02\nseed = 3\nT_final = 0.004\nsnapshot_every = 20\n";

#[test]
fn check_config_prints_manifest() {
    let out = rnp(&["check-config", &shipped("baseline.conf")]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[rnp]"));
    for key in rnp_core::config::RNP_KEYS {
        assert!(text.lines().any(|l| l.starts_with(&format!("{key} = "))), "{key} missing");
    }
    for name in ["baseline_tilde.conf", "cho.conf"] {
        assert_eq!(code(&rnp(&["check-config", &shipped(name)])), 0, "{name}");
    }
}

#[test]
fn config_errors_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.conf", "[rnp]\nnx = 16\nP0_cnst = 0.5\n");
    let out = rnp(&["check-config", &bad]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3") && err.contains("P0_cnst"), "{err}");

    let out = rnp(&["run", &shipped("cho.conf"), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&rnp(&["check-config", "/nonexistent.conf"])), 2);
    assert_eq!(code(&rnp(&["frobnicate"])), 2);
}

#[test]
fn run_is_deterministic_and_manifest_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.conf", SMALL);
    let outs: Vec<PathBuf> = ["a", "b"].iter().map(|d| dir.path().join(d)).collect();
    for o in &outs {
        let out = rnp(&["run", &cfg, "--out", o.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let csv = |o: &Path| fs::read(o.join("diagnostics.csv")).unwrap();
    assert_eq!(csv(&outs[0]), csv(&outs[1]));
    let records = rnp_core::output::read_csv(&outs[0].join("diagnostics.csv")).unwrap();
    assert!(!records.is_empty());

    let mut snaps: Vec<_> = fs::read_dir(outs[0].join("snapshots"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    snaps.sort();
    assert!(snaps.iter().any(|n| n.to_string_lossy() == "phi1_000000.pgm"));
    for n in &snaps {
        let a = fs::read(outs[0].join("snapshots").join(n)).unwrap();
        let b = fs::read(outs[1].join("snapshots").join(n)).unwrap();
        assert_eq!(a, b, "{n:?}");
        assert!(a.starts_with(b"P5\n16 16\n255\n"));
    }

    let manifest = outs[0].join("manifest.conf");
    let text = fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("# invariant conservation pass"));
    let resolved = rnp(&["check-config", manifest.to_str().unwrap()]);
    assert_eq!(code(&resolved), 0);
    let original = rnp(&["check-config", &cfg]);
    assert_eq!(resolved.stdout, original.stdout);
}

#[test]
fn oversized_step_names_the_failing_invariant() {
    let dir = tempfile::tempdir().unwrap();
    // tau is 100 times 1/(c1 + c2 + c3 + c4)
    let cfg = write(
        dir.path(),
        "fast.conf",
        "[rnp]\nnx = 16\nc1 = 100\nc3 = 100\nP0_amp = 0.1\ntau = 0.5\nT_final = 2.0\n",
    );
    let out = rnp(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("min_max"), "{err}");
}

#[test]
fn newton_failure_is_numerical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tight.conf",
        "[cho]\nnx = 16\nphi0_const = 0.0\nphi0_noise = 0.5\nnewton_max_iter = 1\nnewton_tol = 1e-12\ntau = 0.01\nT_final = 0.1\n",
    );
    let o = dir.path().join("o");
    let out = rnp(&["cho", &cfg, "--out", o.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    let manifest = fs::read_to_string(o.join("manifest.conf")).unwrap();
    assert!(manifest.contains("# aborted:"));
}

#[test]
fn cho_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cho.conf", "[cho]\nnx = 8\nT_final = 0.05\noutput_every = 5\n");
    let o = dir.path().join("o");
    let out = rnp(&["cho", &cfg, "--out", o.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(o.join("diagnostics.csv")).unwrap();
    assert!(csv.starts_with("t,phi_mean,mean_discrete,"));
    assert_eq!(csv.lines().count(), 1 + 11);
}

#[test]
fn verify_mz_is_seeded() {
    let args = ["verify-mz", "--trials", "1000", "--seed", "7"];
    let a = rnp(&args);
    let b = rnp(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("violations = 0"));
    let c = rnp(&["verify-mz", "--trials", "1000", "--seed", "8"]);
    assert_ne!(c.stdout, text.as_bytes());
    assert_eq!(code(&rnp(&["verify-mz", "--trials", "0"])), 2);
}
