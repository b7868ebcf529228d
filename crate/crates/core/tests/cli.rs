use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/example22.json")
}

fn tsd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsd")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_check_simulate_plot_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let result = dir.path().join("cor1.json");
    let out = tsd(&["synth", s(&fixture()), "--method", "corollary1", "--out", s(&result)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("S1: feasible"));

    let out = tsd(&["check", s(&fixture()), s(&result)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).matches("PASS").count(), 2);

    let traj = dir.path().join("traj.csv");
    let out = tsd(&[
        "simulate",
        s(&fixture()),
        s(&result),
        "--x0",
        "1,-1;-1,0.5",
        "--T",
        "2",
        "--out",
        s(&traj),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&traj).unwrap();
    assert!(text.starts_with("t,x_S1_1,x_S1_2,x_S2_1,x_S2_2,u_S1_1,u_S2_1,V_S1,V_S2,"));
    assert_eq!(text.lines().count(), 2002);

    let svg = dir.path().join("traj.svg");
    let out = tsd(&["plot", s(&traj), "--svg", s(&svg)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&svg).unwrap().matches("<polyline").count(), 4);
}

#[test]
fn synth_dumps_instances_and_problems() {
    let dir = tempfile::tempdir().unwrap();
    let lmi = dir.path().join("lmi");
    let sdp = dir.path().join("sdp");
    let out = tsd(&[
        "synth",
        s(&fixture()),
        "--method",
        "cor1",
        "--out",
        s(&dir.path().join("r.json")),
        "--dump-lmi",
        s(&lmi),
        "--dump-sdp",
        s(&sdp),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(std::fs::read_dir(lmi.join("S1")).unwrap().count() > 0);
    assert!(sdp.join("S2.dat-s").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = tsd(&["synth"]);
    assert_eq!(out.status.code(), Some(1));
    let out = tsd(&["synth", "/nonexistent/model.json", "--out", s(&dir.path().join("r.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/model.json"));
    let out = tsd(&["--help"]);
    assert_eq!(out.status.code(), Some(0));

    // Zero control authority with an unstable vertex.
    let mut model: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fixture()).unwrap()).unwrap();
    for sub in model["subsystems"].as_array_mut().unwrap() {
        sub["B"] = serde_json::json!([[[0.0], [0.0]], [[0.0], [0.0]]]);
    }
    model["subsystems"][0]["A"][0] = serde_json::json!([[1.0, 0.0], [0.0, 1.0]]);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, model.to_string()).unwrap();
    let out = tsd(&["synth", s(&bad), "--method", "corollary1", "--out", s(&dir.path().join("r.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = tsd(&["check", s(&bad), s(&dir.path().join("r.json"))]);
    assert_eq!(out.status.code(), Some(2));

    let out = tsd(&[
        "sweep",
        s(&fixture()),
        "--bind",
        "a=sub1.A[7][0][0]",
        "--range",
        "a:0:1:2",
        "--out",
        s(&dir.path().join("s.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_csv_is_bytewise_reproducible_and_cells_are_independent() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, a: &str, b: &str| {
        let path = dir.path().join(name);
        let out = tsd(&[
            "sweep",
            s(&fixture()),
            "--bind",
            "a",
            "--bind",
            "b=sub1.B[2][0][0]",
            "--range",
            a,
            "--range",
            b,
            "--methods",
            "theorem1,corollary1",
            "--out",
            s(&path),
            "--svg",
            s(&path.with_extension("svg")),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(path).unwrap()
    };
    let first = run("one.csv", "a:-0.5:0:2", "b:-1:-0.5:2");
    let second = run("two.csv", "a:-0.5:0:2", "b:-1:-0.5:2");
    assert_eq!(first, second);
    assert_eq!(first.lines().count(), 5);

    // The last cell alone reproduces its row of the grid.
    let single = run("one_cell.csv", "a:0:0:1", "b:-0.5:-0.5:1");
    assert_eq!(single.lines().nth(1), first.lines().nth(4));
    let svg = std::fs::read_to_string(dir.path().join("one.svg")).unwrap();
    assert!(svg.contains(">a</text>") && svg.contains(">b</text>"));
}
