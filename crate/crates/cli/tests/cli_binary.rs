//! Exit-code and artifact checks through the actual binary.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_breather-lab"))
}

fn tmp(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("breather-cli-{tag}"));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn construct_defaults_exit_zero() {
    let out = tmp("construct");
    let status = bin()
        .args(["--out"])
        .arg(&out)
        .arg("construct")
        .status()
        .expect("spawn");
    assert_eq!(status.code(), Some(0));
    assert!(out.join("potential.csv").exists());
    assert!(out.join("potential.svg").exists());
}

#[test]
fn bad_scenario_exits_two() {
    let out = tmp("bad");
    let scn = out.join("bad.scn");
    std::fs::write(&scn, "grid.n_points = not_a_number\n").unwrap();
    let output = bin()
        .arg("--scenario")
        .arg(&scn)
        .arg("construct")
        .output()
        .expect("spawn");
    assert_eq!(output.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&output.stderr);
    assert!(msg.contains("line 1"), "diagnostics should cite the line: {msg}");
}

#[test]
fn zero_resonance_guard_exits_three() {
    let out = tmp("guard");
    let scn = out.join("r2even.scn");
    std::fs::write(
        &scn,
        format!(
            "potential.kind = two_soliton\n\
             potential.rho1 = {}\n\
             potential.rho2 = 1.0\n\
             parity = even\n\
             epsilons = 0.04\n\
             grid.half_width = 40.0\n\
             grid.n_points = 512\n\
             spectral.n_time = 256\n\
             predict.convergence_check = false\n\
             output.dir = {}\n",
            1.0 / 2.0f64.sqrt(),
            out.display()
        ),
    )
    .unwrap();
    let output = bin().arg("--scenario").arg(&scn).arg("predict").output().expect("spawn");
    assert_eq!(output.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let msg = String::from_utf8_lossy(&output.stderr);
    assert!(msg.contains("zero-energy resonance"), "{msg}");
    // the documented toggle lets the renormalized prediction through
    let status = bin()
        .arg("--scenario")
        .arg(&scn)
        .args(["--drop-zero-resonance", "predict"])
        .status()
        .expect("spawn");
    assert_eq!(status.code(), Some(0));
}

#[test]
fn compare_without_artifacts_exits_two() {
    let out = tmp("noartifacts");
    let status = bin().args(["--out"]).arg(&out).arg("compare").status().expect("spawn");
    assert_eq!(status.code(), Some(2));
}

#[test]
fn flag_overrides_apply() {
    let out = tmp("flags");
    // --epsilon and --periods shorten the run; exit 0 and row count honors
    // the overrides
    let status = bin()
        .args(["--out"])
        .arg(&out)
        .args(["--epsilon", "0.04", "--periods", "1", "--parity", "even", "simulate"])
        .status()
        .expect("spawn");
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("simulate_eps0.0400.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 16 + 1); // header + record_every + initial
}
