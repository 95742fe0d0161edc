use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vpgrav::io::RunConfig;

fn vpgrav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vpgrav"))
        .args(args)
        .env_remove("VPGRAV_THREADS")
        .output()
        .unwrap()
}

const TINY: &str = r#"
[physics]
g = 10
eta = 1
beta = 1.5

[grid]
n3 = 16
m1 = 4
m2 = 4
m3 = 12

[dynamic]
dt = 0.05
T = 0.2
f0 = "zero"
output_stride = 2
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn unknown_subcommand_exits_with_usage() {
    let out = vpgrav(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn shipped_default_matches_builtin() {
    let shipped =
        fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../default.cfg"))
            .unwrap();
    let builtin = RunConfig::parse("[physics]\ng = 10\neta = 1\nbeta = 1.5\n").unwrap();
    assert_eq!(RunConfig::parse(&shipped).unwrap(), builtin);
}

#[test]
fn invalid_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[physics]\ng = -1\neta = 1\nbeta = 1\n");
    let out = vpgrav(&[
        "steady",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("physics.g must be positive"));
}

#[test]
fn evolve_without_perturbation_has_zero_density() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let outdir = dir.path().join("out");
    let out = vpgrav(&[
        "evolve",
        "--config",
        &cfg,
        "--out",
        outdir.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(outdir.join("timeseries.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("t,norm_rho_inf,norm_f_weighted,decay_lhs,decay_rhs,bootstrap_ok")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("0")));
    for step in [0, 2, 4] {
        assert!(outdir.join(format!("f_{step:06}.snap")).exists());
    }
}

#[test]
fn steady_echo_reparses_to_the_same_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = vpgrav(&[
        "steady",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let echoed =
        RunConfig::parse(&fs::read_to_string(dir.path().join("config.toml")).unwrap()).unwrap();
    let mut expected = RunConfig::parse(TINY).unwrap();
    expected.verify.seed = 7;
    assert_eq!(echoed, expected);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("# resolved configuration"));
    let csv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(csv.starts_with("iteration,difference,ratio,bound_margin,grad_phi_sup\n"));
    let h = vpgrav::io::Snapshot::read(&dir.path().join("steady_h.snap")).unwrap();
    assert_eq!(h.to_distribution().unwrap().grid.len(), 16 * 4 * 4 * 12);
}
