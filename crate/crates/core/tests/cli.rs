use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.json")).display().to_string()
}

fn noharm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noharm")).args(args).env_remove("NOHARM_FORMAT").output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn solve_prints_outcome_and_trace() {
    let out = noharm(&["solve", "--game", &fixture("pd"), "--ref", "D,D", "--order", "Row,Column"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("outcome: C,C (3,3)"), "{text}");
    assert!(text.contains("mutual_stay C,C"));
}

#[test]
fn solve_without_the_rule_shows_its_mode() {
    let out = noharm(&["solve", "--game", &fixture("pd"), "--ref", "D,D", "--no-nhp"]);
    assert!(stdout(&out).starts_with("mode: subgame perfect (no-harm off)"));
    let v = json(&noharm(&["solve", "--game", &fixture("nhp_off"), "--ref", "L,R", "--no-nhp", "--json"]));
    assert_eq!(v["payoffs"], serde_json::json!([3, 2]));
}

#[test]
fn weak_mode_lists_the_outcome_set() {
    let out = noharm(&["solve", "--game", &fixture("weak_tie"), "--ref", "U,L", "--weak"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("outcome set: "));
    let refused = noharm(&["solve", "--game", &fixture("weak_tie"), "--ref", "U,L"]);
    assert_eq!(refused.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"ref": "C,D", "k": 2, "order": ["Column", "Row"]}"#).unwrap();
    let v = json(&noharm(&[
        "solve",
        "--game",
        &fixture("pd"),
        "--config",
        cfg.to_str().unwrap(),
        "--ref",
        "D,D",
        "--json",
    ]));
    assert_eq!(v["outcome"], "C,C");
    assert_eq!(v["config"]["k"], 2);
    assert_eq!(v["config"]["order"], serde_json::json!(["Column", "Row"]));
    let v = json(&noharm(&[
        "solve",
        "--game",
        &fixture("pd"),
        "--ref",
        "D,D",
        "--nature-q",
        "0.5,0.5",
        "--seed",
        "4",
        "--json",
    ]));
    assert_eq!(v["config"]["nature"]["seed"], 4);
}

#[test]
fn pareto_sets() {
    let out = noharm(&["pareto", "--game", &fixture("game22")]);
    assert!(stdout(&out).starts_with("pareto optimal: (A,C) (A,D) (B,D)\n"));
    let out = noharm(&["pareto", "--game", &fixture("pd")]);
    assert!(stdout(&out).starts_with("pareto optimal: (C,C) (C,D) (D,C)\n"));

    let dir = tempfile::tempdir().unwrap();
    let single = dir.path().join("one.json");
    std::fs::write(&single, r#"{"players": ["A", "B"], "actions": [["x"], ["y"]], "payoffs": {"x,y": [1, 1]}}"#)
        .unwrap();
    let v = json(&noharm(&["pareto", "--game", single.to_str().unwrap(), "--json"]));
    assert_eq!(v["pareto_optimal"], serde_json::json!(["x,y"]));
}

#[test]
fn compare_against_nash_and_rule_off() {
    let v = json(&noharm(&["compare", "--game", &fixture("stag_hunt"), "--json"]));
    assert_eq!(v["nhe_outcomes"], serde_json::json!(["Stag,Stag"]));
    assert_eq!(v["pure_nash"], serde_json::json!(["Stag,Stag", "Hare,Hare"]));

    let v = json(&noharm(&["compare", "--game", &fixture("hawk_dove"), "--json"]));
    assert!(v["nhe_outcomes"].as_array().unwrap().contains(&serde_json::json!("Dove,Dove")));
    assert_eq!(v["pure_nash"], serde_json::json!(["Hawk,Dove", "Dove,Hawk"]));

    let v = json(&noharm(&["compare", "--game", &fixture("pd"), "--json"]));
    assert_eq!(v["pure_nash"], serde_json::json!(["D,D"]));
    assert!(!v["nhe_outcomes"].as_array().unwrap().contains(&serde_json::json!("D,D")));

    let v = json(&noharm(&["compare", "--game", &fixture("game22"), "--json"]));
    assert_eq!(v["nhp_off_outcomes"], serde_json::json!(["A,C"]));
    let nhe = v["nhe_outcomes"].as_array().unwrap();
    assert!(nhe.contains(&serde_json::json!("A,D")) && nhe.contains(&serde_json::json!("B,D")));
}

#[test]
fn trace_exports() {
    let out = noharm(&["trace", "--game", &fixture("pd"), "--ref", "D,D"]);
    let lines: Vec<serde_json::Value> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.last().unwrap()["verdict"], "mutual_stay C,C");
    let out = noharm(&["trace", "--game", &fixture("pd"), "--ref", "D,D", "--format", "dot"]);
    assert!(stdout(&out).starts_with("digraph play {"));
}

#[test]
fn verify_commands() {
    let out = noharm(&["verify", "--fixtures", "--expect-fail", "degenerate"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("(failure expected)"));

    let out = noharm(&["verify", "--random", "count=20", "seed=1", "--ks", "1", "--no-nature"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("20 games, 160 configs: 160 pass"));

    let out = noharm(&[
        "verify",
        "--random",
        "count=2",
        "seed=1",
        "--ks",
        "2",
        "--checks",
        "existence",
        "--no-nature",
        "--audit-max-contexts",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("over budget"));
}

#[test]
fn bad_input_exits_with_two() {
    assert_eq!(noharm(&["solve", "--game", "missing.json", "--ref", "D,D"]).status.code(), Some(2));
    assert_eq!(noharm(&["solve", "--game", &fixture("pd"), "--ref", "X,Y"]).status.code(), Some(2));
    assert_eq!(noharm(&["solve", "--game", &fixture("pd"), "--ref", "D,D", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        noharm(&["solve", "--game", &fixture("pd"), "--ref", "D,D", "--order", "Row,Row"]).status.code(),
        Some(2)
    );
    assert_eq!(noharm(&["verify", "--random", "n=x"]).status.code(), Some(2));
    assert_eq!(noharm(&["verify", "--fixtures", "--expect-fail", "other"]).status.code(), Some(2));
    let out = noharm(&["solve", "--game", &fixture("pd"), "--ref", "D,D", "--k", "2", "--max-contexts", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resource limit"));
}

#[test]
fn format_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_noharm"))
        .args(["pareto", "--game", &fixture("pd")])
        .env("NOHARM_FORMAT", "json")
        .output()
        .unwrap();
    assert!(serde_json::from_slice::<serde_json::Value>(&out.stdout).is_ok());
    let out = Command::new(env!("CARGO_BIN_EXE_noharm"))
        .args(["pareto", "--game", &fixture("pd"), "--format", "table"])
        .env("NOHARM_FORMAT", "json")
        .output()
        .unwrap();
    assert!(stdout(&out).starts_with("pareto optimal:"));
}

#[test]
fn numbers_round_trip_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dec.json");
    std::fs::write(
        &path,
        r#"{"players": ["Row", "Column"], "actions": [["C", "D"], ["C", "D"]],
            "payoffs": {"C,C": [3.10, 3.1], "C,D": [-1.25, 4], "D,C": [4, -1.25], "D,D": [0.5, 0.50]}}"#,
    )
    .unwrap();
    let out = noharm(&["solve", "--game", path.to_str().unwrap(), "--ref", "D,D", "--json"]);
    let text = stdout(&out);
    let v = json(&out);
    assert_eq!(v["outcome"], "C,C");
    assert!(text.contains("3.10"), "{text}");
    let table = stdout(&noharm(&["solve", "--game", path.to_str().unwrap(), "--ref", "D,D"]));
    assert!(table.contains("(3.10,3.1)"), "{table}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (three, pd, game22) = (fixture("three_person"), fixture("pd"), fixture("game22"));
    let runs = [
        vec!["solve", "--game", &three, "--ref", "A,D,E", "--json"],
        vec!["solve", "--game", &pd, "--ref", "D,D", "--nature-q", "0.3,0.7", "--seed", "11", "--k", "2", "--json"],
        vec!["verify", "--random", "count=10", "seed=5", "--ks", "1", "--json"],
        vec!["compare", "--game", &game22, "--json"],
    ];
    for args in runs {
        let a = noharm(&args);
        let b = noharm(&args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}
