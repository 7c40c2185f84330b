use std::path::PathBuf;
use std::process::Command;

use melnikov_core::io::fixtures;
use melnikov_core::pipeline::{run_pipeline, ResultDocument, RunConfig};
use melnikov_core::puiseux::BranchStatus;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn melnikov(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_melnikov")).args(args).output().unwrap()
}

fn doc(kmax: usize) -> ResultDocument {
    let f = fixtures::mixed();
    let mut o = f.options.clone();
    o.kmax = Some(kmax);
    let mut cfg = RunConfig::new(o);
    cfg.residual = false;
    run_pipeline(&f.to_system().unwrap(), &cfg).unwrap()
}

#[test]
fn runs_are_deterministic_and_round_trip() {
    let a = doc(4);
    let b = doc(4);
    assert_eq!(a.to_json(), b.to_json());
    let back = ResultDocument::from_json(&a.to_json()).unwrap();
    assert_eq!(back.to_json(), a.to_json());
}

#[test]
fn exit_code_follows_branch_status() {
    let mut d = doc(3);
    assert_eq!(d.exit_code(), 0);
    for z in &mut d.zeros {
        for b in &mut z.branches {
            if b.status == BranchStatus::SimpleRootFound {
                b.status = BranchStatus::DepthExhausted;
            }
        }
    }
    assert_eq!(d.exit_code(), 3);
}

#[test]
fn cli_exit_codes() {
    let p = fixture("pendulum.json");
    let ok = melnikov(&["expand", p.to_str().unwrap(), "--order", "3", "--no-residual"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let out: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(out["name"], "pendulum");

    let bad = melnikov(&["analyze", fixture("degenerate.json").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(!bad.stderr.is_empty());

    let missing = melnikov(&["analyze", "/nonexistent/system.json"]);
    assert_eq!(missing.status.code(), Some(1));

    // G constant: the Melnikov function has no zeros, so no branch exists
    let dir = std::env::temp_dir().join(format!("melnikov-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let nz = dir.join("no-zeros.json");
    std::fs::write(
        &nz,
        r#"{"omega": ["0", "1"], "A0": "1", "G": [{"basis": "cos", "sigma": 0, "sigma_prime": 0, "apoly": ["1"]}], "resonance": {"p": 1, "q": 1}}"#,
    )
    .unwrap();
    let none = melnikov(&["expand", nz.to_str().unwrap(), "--no-residual"]);
    assert_eq!(none.status.code(), Some(3));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn out_flag_and_precision_env() {
    let dir = std::env::temp_dir().join(format!("melnikov-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let target = dir.join("zeros.json");
    let st = Command::new(env!("CARGO_BIN_EXE_melnikov"))
        .env("MELNIKOV_PRECISION_BITS", "96")
        .args(["analyze", fixture("sine-cubed.json").to_str().unwrap(), "--out", target.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0));
    assert!(st.stdout.is_empty());
    let d = ResultDocument::from_json(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert!(!d.zeros.is_empty());
    assert!(d.zeros.iter().all(|z| z.n == 3), "{:?}", d.zeros.iter().map(|z| z.n).collect::<Vec<_>>());
    std::fs::remove_dir_all(&dir).ok();

    let low = Command::new(env!("CARGO_BIN_EXE_melnikov")).env("MELNIKOV_PRECISION_BITS", "notanumber").args(["analyze", "x"]).output().unwrap();
    assert_eq!(low.status.code(), Some(2), "clap rejects the value");
}

#[test]
fn trees_subcommand_reports_success() {
    let p = fixture("pendulum.json");
    let out = melnikov(&["trees", p.to_str().unwrap(), "--k", "2", "--j", "1", "--order", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
}
