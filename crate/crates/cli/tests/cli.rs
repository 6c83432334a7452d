//! Runs the built binary through a synth, train, track, eval round.

use std::path::Path;
use std::process::{Command, Output};

fn mdatrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdatrack")).args(args).output().expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

#[test]
fn synth_train_track_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.txt");
    std::fs::write(&cfg, "frame_count = 20\ntarget_count = 4\nepochs = 3\n").unwrap();
    let scen = dir.path().join("scenario");
    let out = mdatrack(&["--mode", "synth", "--config", arg(&cfg), "--out", arg(&scen), "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (gt, det) = (scen.join("gt.txt"), scen.join("det.txt"));

    let params = dir.path().join("params.txt");
    let out = mdatrack(&["--mode", "train", "--config", arg(&cfg), "--gt", arg(&gt), "--out", arg(&params)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curve = std::fs::read_to_string(dir.path().join("params.txt.curve")).unwrap();
    assert_eq!(curve.lines().count(), 4);

    let hyp = dir.path().join("hyp.txt");
    let out = mdatrack(&["--mode", "track", "--config", arg(&params), "--input", arg(&det), "--out", arg(&hyp)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = mdatrack(&["--mode", "eval", "--gt", arg(&gt), "--input", arg(&hyp)]);
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    let ids: usize = table.lines().nth(1).unwrap().split('\t').next_back().unwrap().parse().unwrap();
    assert_eq!(ids, 0, "{table}");

    let out = mdatrack(&["--mode", "eval", "--gt", arg(&gt), "--input", arg(&gt)]);
    assert!(String::from_utf8(out.stdout).unwrap().lines().nth(1).unwrap().starts_with("1.0000\t"));
}

#[test]
fn training_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.txt");
    std::fs::write(&cfg, "frame_count = 12\ntarget_count = 3\nepochs = 2\n").unwrap();
    let curves: Vec<String> = ["a", "b"]
        .iter()
        .map(|name| {
            let p = dir.path().join(name);
            let out = mdatrack(&["--mode", "train", "--config", arg(&cfg), "--out", arg(&p), "--seed", "9"]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            std::fs::read_to_string(dir.path().join(format!("{name}.curve"))).unwrap()
        })
        .collect();
    assert_eq!(curves[0], curves[1]);
}

#[test]
fn validation_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "alpha = 1.5\n").unwrap();
    let missing = dir.path().join("missing.txt");
    let cases: [Vec<&str>; 4] = [
        vec!["--mode", "track", "--config", arg(&bad), "--input", arg(&bad), "--out", arg(&missing)],
        vec!["--mode", "track", "--input", arg(&missing), "--out", arg(&bad)],
        vec!["--mode", "eval", "--input", arg(&bad)],
        vec!["--mode", "synth"],
    ];
    for args in cases {
        assert_eq!(mdatrack(&args).status.code(), Some(1), "{args:?}");
    }
    std::fs::write(&bad, "unknown_key = 1\n").unwrap();
    assert_eq!(mdatrack(&["--mode", "synth", "--config", arg(&bad), "--out", arg(dir.path())]).status.code(), Some(1));
}
