use std::path::Path;
use std::process::{Command, Output};

fn qpi(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpi"))
        .args(args)
        .current_dir(cwd)
        .env("QPI_THREADS", "1")
        .output()
        .expect("spawn qpi")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.cfg");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn bad_config_exits_with_2_and_lists_every_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "eta0 = 1.5\nbogus = 3\nepsilon = -1\n");
    let o = qpi(&["--config", &cfg, "target"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn out_of_range_value_exits_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "eta0 = 1.5\n");
    let o = qpi(&["--config", &cfg, "target"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_input_exits_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qpi(
        &["retrieve", "--input", "does_not_exist", "--out", "r"],
        tmp.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn target_writes_fields_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "grid = 224\n");
    let o = qpi(&["--config", &cfg, "--out", "t", "target"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("t");
    for f in ["tau.qpf", "phi.qpf", "tau.pgm", "phi.pgm", "manifest.txt"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let phi = qpi_core::qpf::decode(&std::fs::read(out.join("phi.qpf")).unwrap()).unwrap();
    assert_eq!((phi.width(), phi.height()), (224, 224));
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("grid = 224"));
    assert!(manifest.contains("phi.qpf"));
}

#[test]
fn simulate_then_retrieve_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "grid = 224\nframes = 2\ndz_mm = 0.0125\nbins = 1\n",
    );
    let sim = qpi(
        &[
            "--config",
            &cfg,
            "--out",
            "sim",
            "simulate",
            "--calib-frames",
            "2",
            "--focus-frames",
            "2",
        ],
        tmp.path(),
    );
    assert!(
        sim.status.success(),
        "{}",
        String::from_utf8_lossy(&sim.stderr)
    );
    let ret = qpi(
        &[
            "--config", &cfg, "--out", "ret", "retrieve", "--input", "sim",
        ],
        tmp.path(),
    );
    assert!(
        ret.status.success(),
        "{}",
        String::from_utf8_lossy(&ret.stderr)
    );
    let summary = std::fs::read_to_string(tmp.path().join("ret/summary.csv")).unwrap();
    assert!(summary.lines().count() >= 2, "{summary}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qpi(&["target", "--no-such-flag"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}
