use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plate-lab")).args(args).current_dir(dir).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) {
    std::fs::write(dir.join(name), body).unwrap();
}

#[test]
fn classify_writes_bad_cube_stats() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "plane.txt", "0.5 0.0 0.5 1.0\n");
    let out = lab(&["classify", "--crack", "plane.txt", "--h", "0.0625", "--seed", "7", "--out", "stats.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("stats.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "h,offset,bad_cubes,cubes,boundary_measure,jump_energy,projection");
    assert_eq!(lines.len(), 2);
    assert!(!csv.contains('\r'));
}

#[test]
fn sweep_emits_one_row_per_rho() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "lab.cfg", "# recovery sweep\ncells = 32\nlayers = 8\nrho = 0.1, 0.01, 0.001\ndatum = stretch:0.5\n");
    let out = lab(&["sweep", "--experiment", "recover", "--config", "lab.cfg"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("rho,"));
}

#[test]
fn identical_seeds_give_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "plane.txt", "0.1 0.8 0.9 0.2\n");
    write(dir.path(), "lab.cfg", "offsets = 10\nh = 0.0625, 0.03125\n");
    let args = ["jump-energy", "--config", "lab.cfg", "--crack", "plane.txt", "--seed", "3"];
    let (a, b) = (lab(&args, dir.path()), lab(&args, dir.path()));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn missing_crack_file_exits_one_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["classify", "--crack", "nowhere/plane.txt"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere/plane.txt"));
}

#[test]
fn invalid_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lab(&["recover", "--rho", "0.01,0.1"], dir.path()).status.code(), Some(1));
    assert_eq!(lab(&["recover", "--datum", "twist:3"], dir.path()).status.code(), Some(1));
    assert_eq!(lab(&["sweep"], dir.path()).status.code(), Some(1));
    assert_eq!(lab(&["frobnicate"], dir.path()).status.code(), Some(1));
    write(dir.path(), "bad.cfg", "rho = 0.1\nlayers = many\n");
    let out = lab(&["recover", "--config", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.cfg:2"));
}

#[test]
fn solver_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "lab.cfg", "cells = 16\nlayers = 4\nrho = 0.1\ndatum = stretch:1.2\ncg_tol = 1e-300\n");
    let out = lab(&["minimize", "--config", "lab.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_lists_every_config_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["--help"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["experiment", "omega_lo", "cells", "layers", "rho", "crack", "datum", "smoothing", "tie_tol", "exhaustive", "seed", "out"] {
        assert!(text.contains(key), "{key}");
    }
}
