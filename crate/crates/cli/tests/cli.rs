use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spod_rom::io::load;

const TINY: &str = r#"
[system]
kind = "ginzburg-landau"
n_x = 16
half_width = 20.0

[forcing]
kind = "gaussian"
xi = 4.0
tau = 2.0
seed = 3

[modes]
n_omega = 32
dt = 0.5
blocks = 8

[rom]
r = 4

[experiment]
training_steps = 200
spinup_steps = 16
n_test = 2
r_values = [2, 4]
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spod-rom"))
        .args(args)
        .output()
        .expect("spawn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

#[test]
fn verify_passes() {
    let o = run(&["verify", "--systems", "4", "--max-nx", "8"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("pass  operator-sum"), "{out}");
    assert!(!out.contains("FAIL"));
}

#[test]
fn unknown_config_key_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, TINY.replace("blocks = 8", "blocks = 8\nbogus = 1")).unwrap();
    let o = run(&[
        "generate-data",
        "--config",
        p(&cfg),
        "--out",
        p(&dir.path().join("d")),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn missing_config_and_bad_arguments_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "build-rom",
        "--config",
        p(&dir.path().join("none.cfg")),
        "--data",
        "x",
        "--out",
        "y",
    ]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&run(&["solve"])), 1);
    assert_eq!(code(&run(&["no-such-command"])), 1);
}

#[test]
fn pipeline_generate_build_solve() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = root.join("tiny.cfg");
    fs::write(&cfg, TINY).unwrap();
    let data = root.join("data");
    let o = run(&["generate-data", "--config", p(&cfg), "--out", p(&data)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(data.join("training").is_dir());
    assert!(data.join("test_001").is_dir());

    let modes = root.join("modes");
    let o = run(&[
        "compute-modes",
        "--config",
        p(&cfg),
        "--data",
        p(&data),
        "--out",
        p(&modes),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let rom = root.join("rom");
    let o = run(&[
        "build-rom",
        "--config",
        p(&cfg),
        "--data",
        p(&data),
        "--out",
        p(&rom),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let sol = root.join("sol");
    let test = data.join("test_000");
    let o = run(&[
        "solve",
        "--rom",
        p(&rom),
        "--trajectory",
        p(&test),
        "--out",
        p(&sol),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let y = load(&sol.join("y.sprm")).unwrap().to_cmat().unwrap();
    assert_eq!(y.shape(), (16, 32));
    assert!(y.norm() > 0.0);
    let csv = fs::read_to_string(sol.join("solution.csv")).unwrap();
    assert_eq!(csv.lines().count(), 33);

    // rank zero keeps nothing and returns an exactly zero output
    let zero = root.join("zero");
    let o = run(&[
        "solve",
        "--rom",
        p(&rom),
        "--trajectory",
        p(&test),
        "--out",
        p(&zero),
        "--r",
        "0",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let y0 = load(&zero.join("y.sprm")).unwrap().to_cmat().unwrap();
    assert_eq!(y0.shape(), (16, 32));
    assert_eq!(y0.norm(), 0.0);
}

#[test]
fn benchmark_writes_tables_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    fs::write(&cfg, TINY).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["benchmark", "--config", p(&cfg), "--out", p(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["modes.csv", "time.csv", "retention.csv", "config.toml"] {
        assert!(a.join(f).is_file(), "{f}");
    }
    assert_eq!(
        fs::read(a.join("coefficients.sprm")).unwrap(),
        fs::read(b.join("coefficients.sprm")).unwrap()
    );
}
