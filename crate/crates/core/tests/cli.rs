use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_asg-cdi"));
    c.env_remove("ASG_CDI_OUT");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

/// Data rows of a CSV artifact, after the comment and header lines.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# schema=asg-cdi/"));
    lines
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn moments_table_starts_with_kingman_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["moments", "--theta", "0", "--sigma", "0"], dir.path());
    assert!(o.status.success());
    let r = rows(&dir.path().join("moments.csv"));
    assert_eq!(&r[0][..3], ["2", "1", "1.0"]);
    for r in rows(&dir.path().join("moments_oracle.csv")) {
        assert!(r[4].parse::<f64>().unwrap() < 1e-8);
    }
}

#[test]
fn cdi_speed_at_one_hundredth() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["cdi", "--t-grid", "0.01"], dir.path());
    assert!(o.status.success());
    let r = rows(&dir.path().join("cdi.csv"));
    assert_eq!(r[0][1], "200");
    assert_eq!(r[0][6], "true");
}

#[test]
fn coupling_check_has_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "coupling-check",
            "--theta",
            "1",
            "--sigma",
            "1",
            "--n0",
            "200",
            "--replicates",
            "1000",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let r = rows(&dir.path().join("coupling-check.csv"));
    assert_eq!(r[0][0], "1000");
    assert_eq!(r[0][2], "0");
}

#[test]
fn reruns_are_byte_identical_and_carry_the_hash() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--theta",
        "0.5",
        "--sigma",
        "1",
        "--n0",
        "30",
        "--replicates",
        "4",
        "--seed",
        "7",
    ];
    assert!(run(&args, a.path()).status.success());
    assert!(run(&args, b.path()).status.success());
    let fa = fs::read(a.path().join("simulate.csv")).unwrap();
    assert_eq!(fa, fs::read(b.path().join("simulate.csv")).unwrap());
    let resolved = fs::read_to_string(a.path().join("config.resolved")).unwrap();
    let hash = resolved
        .lines()
        .find_map(|l| l.strip_prefix("# config_hash = "))
        .unwrap();
    assert!(String::from_utf8(fa)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .contains(hash));
}

#[test]
fn json_report_and_resolved_config_reproduce() {
    let a = tempfile::tempdir().unwrap();
    let args = [
        "supdev",
        "--theta",
        "1",
        "--sigma",
        "1",
        "--n0",
        "300",
        "--replicates",
        "60",
        "--t-grid",
        "0.2,0.1",
        "--format",
        "json",
    ];
    assert!(run(&args, a.path()).status.success());
    let first = fs::read(a.path().join("supdev.json")).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["master_seed"], 1);
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 16);

    // the resolved file is itself a valid config
    let b = tempfile::tempdir().unwrap();
    let cfg = a.path().join("config.resolved");
    let o = bin()
        .args(["supdev", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(b.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(first, fs::read(b.path().join("supdev.json")).unwrap());
}

#[test]
fn flags_override_config_file_and_env_sets_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "theta = 0.0\nsigma = 0.0\nt_grid = [0.1]\nn_max = 5000\n",
    )
    .unwrap();
    let out = dir.path().join("env_out");
    let o = bin()
        .args(["cdi", "--config"])
        .arg(&cfg)
        .args(["--t-grid", "0.01"])
        .env("ASG_CDI_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success());
    let r = rows(&out.join("cdi.csv"));
    assert_eq!(r.len(), 1);
    assert_eq!(r[0][0], "0.01");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&["cdi", "--theta", "-1"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["cdi", "--no-such-flag"], dir.path()).status.code(),
        Some(2)
    );
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "thetta = 1\n").unwrap();
    assert_eq!(
        run(&["cdi", "--config", cfg.to_str().unwrap()], dir.path())
            .status
            .code(),
        Some(2)
    );
    // N_max too small for the requested time
    assert_eq!(
        run(&["cdi", "--nmax", "100", "--t-grid", "0.0001"], dir.path())
            .status
            .code(),
        Some(2)
    );
    // output path is a file: runtime failure
    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    assert_eq!(run(&["moments"], &file).status.code(), Some(1));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}
