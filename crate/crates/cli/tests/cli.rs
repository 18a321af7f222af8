use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deep-eiou"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const DETS: &str =
    "1,-1,0,0,10,20,0.9,-1,-1,-1\n2,-1,2,0,10,20,0.9,-1,-1,-1\n3,-1,4,0,10,20,0.9,-1,-1,-1\n";

#[test]
fn track_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let dets = write(dir.path(), "det.txt", DETS);
    let gt = write(
        dir.path(),
        "gt.txt",
        "1,1,0,0,10,20,1,1,1\n2,1,2,0,10,20,1,1,1\n3,1,4,0,10,20,1,1,1\n",
    );
    let res = dir.path().join("res.txt");
    let out = run(&["track", "--dets", &dets, "--out", res.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        std::fs::read_to_string(&res).unwrap(),
        "1,1,0.00,0.00,10.00,20.00,0.90,-1,-1,-1\n\
         2,1,2.00,0.00,10.00,20.00,0.90,-1,-1,-1\n\
         3,1,4.00,0.00,10.00,20.00,0.90,-1,-1,-1\n"
    );
    let json = dir.path().join("report.json");
    let out = run(&[
        "eval",
        "--gt",
        &gt,
        "--res",
        res.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("hota: 1.0000\n"));
    assert!(text.contains("id_switches: 0\n"));
    let report = std::fs::read_to_string(json).unwrap();
    for key in ["\"hota\"", "\"idf1\"", "\"fn\""] {
        assert!(report.contains(key));
    }
}

#[test]
fn flag_overrides_and_set() {
    let dir = tempfile::tempdir().unwrap();
    let dets = write(dir.path(), "det.txt", DETS);
    assert!(run(&["track", "--dets", &dets, "--e-initial", "0.3"])
        .status
        .success());
    assert!(run(&["track", "--dets", &dets, "--set", "max_gap=0"])
        .status
        .success());
    let cfg = write(dir.path(), "run.toml", "t_total = 3\n");
    assert!(run(&["track", "--dets", &dets, "--config", &cfg])
        .status
        .success());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let dets = write(dir.path(), "det.txt", DETS);
    let bad = write(dir.path(), "bad.txt", "1,-1,0,0,10\n");

    let code = |o: Output| o.status.code().unwrap();
    assert_eq!(code(run(&["track", "--dets", &bad])), 1);
    assert_eq!(
        code(run(&["track", "--dets", &dets, "--high-thresh", "0.05"])),
        1
    );
    assert_eq!(
        code(run(&["track", "--dets", &dets, "--set", "nonsense=1"])),
        1
    );
    assert_eq!(code(run(&["frobnicate"])), 1);
    assert_eq!(
        code(run(&["track", "--dets", "/definitely/missing.txt"])),
        2
    );
    let unwritable = dir.path().join("no/such/dir/res.txt");
    assert_eq!(
        code(run(&[
            "track",
            "--dets",
            &dets,
            "--out",
            unwritable.to_str().unwrap()
        ])),
        2
    );
    assert_eq!(code(run(&["--help"])), 0);
}

#[test]
fn parse_error_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "det.txt", "1,-1,0,0,10,20,0.9\n2,-1,0,0,10\n");
    let out = run(&["track", "--dets", &bad]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("det.txt:2:"));
}

#[test]
fn synth_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(
        dir.path(),
        "s.toml",
        "preset = \"crossing\"\nn_frames = 15\n",
    );
    let out_dir = dir.path().join("seq");
    let out = run(&[
        "synth",
        "--scenario",
        &scenario,
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["gt.txt", "det.txt", "emb.txt"] {
        assert!(!std::fs::read_to_string(out_dir.join(f)).unwrap().is_empty());
    }
}

#[test]
fn sweep_rejects_unknown_param() {
    let dir = tempfile::tempdir().unwrap();
    let dets = write(dir.path(), "det.txt", DETS);
    let gt = write(dir.path(), "gt.txt", "1,1,0,0,10,20,1,1,1\n");
    let out = run(&[
        "sweep", "--dets", &dets, "--gt", &gt, "--param", "bogus", "--values", "0.1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&[
        "sweep",
        "--dets",
        &dets,
        "--gt",
        &gt,
        "--param",
        "e_initial",
        "--values",
        "0.3,0.7",
    ]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);
}
