use std::process::Command;

const TINY: [&str; 10] = [
    "n=3",
    "length=30",
    "hidden=4",
    "q_hidden=8",
    "max_episodes=16",
    "warmup_episodes=4",
    "batch_size=8",
    "n_omega=4",
    "replay_capacity=500",
    "stride=0",
];

fn stemo(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_stemo")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn synth_writes_csvs_that_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _, err) = stemo(&["synth", "--spec", "changepoint", "--n", "6", "--out", out, "length=10"]);
    assert_eq!(code, 0, "{err}");
    let ds = stemo::harness::ingest_csv(&dir.path().join("series.csv"), &dir.path().join("graph.csv")).unwrap();
    assert_eq!((ds.n(), ds.len()), (6, 120));
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(stemo(&["train", "--out", out, "kapa=1"]).0, 2);
    assert_eq!(stemo(&["train", "--out", out, "horizon=1"]).0, 2);
    let (code, _, err) = stemo(&[
        "train",
        "--out",
        out,
        "source=csv",
        "series_path=/nonexistent/series.csv",
        "graph_path=/nonexistent/graph.csv",
    ]);
    assert_eq!(code, 3, "{err}");
    assert_eq!(stemo(&["pareto", "--report", "/nonexistent/report.csv"]).0, 3);
}

#[test]
fn train_evaluate_pareto_discover() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["train", "--out", out];
    args.extend(TINY);
    let (code, stdout, err) = stemo(&args);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("\"stemo\""));

    let mut args = vec!["evaluate", "--out", out];
    args.extend(TINY);
    let (code, stdout, _) = stemo(&args);
    assert_eq!(code, 0);
    assert_eq!(stdout, std::fs::read_to_string(dir.path().join("report.csv")).unwrap());

    let (code, stdout, _) = stemo(&["pareto", "--out", out]);
    assert_eq!(code, 0);
    assert!(stdout.contains("hv"));

    let mut args = vec!["discover-preference", "--out", out, "--hidden", "0.7", "--budget", "5"];
    args.extend(TINY);
    let (code, _, err) = stemo(&args);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("budget"));

    let mut args = vec!["discover-preference", "--out", out, "--hidden", "0.7", "--budget", "20"];
    args.extend(TINY);
    let (code, stdout, err) = stemo(&args);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("episodes 20"));
}
