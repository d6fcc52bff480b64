use std::path::PathBuf;
use std::process::{Command, Output};

use platoon_core::pvm::{parse_document, parse_template};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn platoon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platoon")).args(args).env_remove("PLATOON_MC_WORKERS").output().expect("binary runs")
}

fn run(args: &[&str]) -> (i32, String, String) {
    let o = platoon(args);
    (o.status.code().expect("exit code"), String::from_utf8(o.stdout).unwrap(), String::from_utf8(o.stderr).unwrap())
}

fn path(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

fn verdicts(stdout: &str) -> Vec<String> {
    stdout.lines().filter(|l| l.starts_with("verdict: ") || l.starts_with("query: ")).map(String::from).collect()
}

#[test]
fn check_all_obligations() {
    let (code, out, _) = run(&["check", &path("platoon.pvm"), "--all"]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out.matches("verdict: holds").count(), 6, "{out}");
}

#[test]
fn check_single_query() {
    let (code, out, _) = run(&["check", &path("platoon.pvm"), "--query", "A[] not deadlock"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("query: A[] not deadlock\nverdict: holds\n"), "{out}");
}

#[test]
fn input_errors_exit_2() {
    let (code, _, err) = run(&["check", &path("broken.pvm")]);
    assert_eq!(code, 2);
    assert!(err.contains("line 8"), "{err}");
    let (code, _, err) = run(&["check", &path("undeclared.pvm")]);
    assert_eq!(code, 2);
    assert!(err.contains("line 9") && err.contains("stop"), "{err}");
    let (code, _, err) = run(&["check", &path("platoon.pvm"), "--query", "E<> nowhere.loc"]);
    assert_eq!(code, 2, "{err}");
    let (code, _, _) = run(&["check", &path("missing.pvm")]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["frobnicate"]);
    assert_eq!(code, 2);
}

#[test]
fn failing_query_exits_1_with_trace() {
    let (code, out, _) = run(&["check", &path("platoon_spatial_noLC.pvm")]);
    assert_eq!(code, 1);
    assert!(out.contains("query: A[] not (s2.change and pc)\nverdict: fails"), "{out}");
    assert!(out.contains("  step 1: "), "{out}");
}

#[test]
fn exit_codes_across_fixtures() {
    let expected = [("platoon.pvm", 0), ("platoon_spatial.pvm", 0), ("platoon_spatial_noLC.pvm", 1), ("broken.pvm", 2), ("undeclared.pvm", 2)];
    for (name, code) in expected {
        assert_eq!(run(&["check", &path(name)]).0, code, "{name}");
    }
}

#[test]
fn verdicts_do_not_depend_on_workers() {
    for name in ["platoon.pvm", "platoon_spatial.pvm", "platoon_spatial_noLC.pvm"] {
        let (c1, one, _) = run(&["check", &path(name), "--workers", "1"]);
        let (c4, four, _) = run(&["check", &path(name), "--workers", "4"]);
        assert_eq!(c1, c4, "{name}");
        assert_eq!(verdicts(&one), verdicts(&four), "{name}");
        let env = Command::new(env!("CARGO_BIN_EXE_platoon")).args(["check", &path(name)]).env("PLATOON_MC_WORKERS", "3").output().unwrap();
        assert_eq!(verdicts(&String::from_utf8(env.stdout).unwrap()), verdicts(&one), "{name}");
    }
}

#[test]
fn single_worker_output_is_reproducible() {
    let strip = |s: &str| s.lines().filter(|l| !l.starts_with("wall: ")).collect::<Vec<_>>().join("\n");
    let (_, a, _) = run(&["check", &path("platoon_spatial_noLC.pvm"), "--workers", "1"]);
    let (_, b, _) = run(&["check", &path("platoon_spatial_noLC.pvm"), "--workers", "1"]);
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn records_and_out_file() {
    let out = std::env::temp_dir().join(format!("platoon-cli-{}.jsonl", std::process::id()));
    let (code, stdout, _) = run(&["check", &path("platoon.pvm"), "--format", "records", "--out", &out.to_string_lossy()]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    std::fs::remove_file(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    for l in lines {
        assert!(l.starts_with(r#"{"query":""#) && l.contains(r#","verdict":"holds","states":"#), "{l}");
    }
}

#[test]
fn abstract_modes() {
    let decls = parse_document(&std::fs::read_to_string(fixture("platoon.pvm")).unwrap()).unwrap().network.decls;

    let (code, out, _) = run(&["abstract", &path("platoon.pvm"), "--template", "Spatial", "--mode", "untimed"]);
    assert_eq!(code, 0);
    let t = parse_template(&out, &decls).unwrap();
    assert_eq!(t.locations.len(), 4);
    assert!(t.is_untimed() && t.edges.iter().all(|e| e.updates.is_empty() && e.data_guard.is_none()));

    let (code, out, _) = run(&["abstract", &path("platoon.pvm"), "--template", "Spatial", "--mode", "timed", "--id", "2"]);
    assert_eq!(code, 0);
    assert!(out.contains("do c[2]=1, x=0") && out.contains("not pc sync phy_changing_lane[2]!"), "{out}");
    assert!(parse_template(&out, &decls).unwrap().params.is_empty());

    let doc = parse_document(&std::fs::read_to_string(fixture("platoon.pvm")).unwrap()).unwrap();
    let leader = doc.network.template("Leader").unwrap();
    let (_, out, _) = run(&["abstract", &path("platoon.pvm"), "--template", "Leader", "--mode", "untimed"]);
    assert_eq!(&parse_template(&out, &decls).unwrap(), leader);

    assert_eq!(run(&["abstract", &path("platoon.pvm"), "--template", "Nope", "--mode", "timed"]).0, 2);
    assert_eq!(run(&["abstract", &path("platoon.pvm"), "--template", "Leader", "--mode", "timed", "--id", "2"]).0, 2);
}

#[test]
fn oracle_scenarios() {
    let (code, out, _) = run(&["oracle", &path("platoon_noLC.scn")]);
    assert_eq!(code, 1);
    assert!(out.contains("collision: v2 v3"), "{out}");
    let (code, out, _) = run(&["oracle", &path("platoon.scn")]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("verdict: holds"));
}

#[test]
fn agents_eq1() {
    let (code, out, _) = run(&["agents", &path("follower.bdi"), &path("leader.bdi"), "--query", "eq1"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.starts_with("query: eq1\nverdict: holds\n"), "{out}");
    let (code, _, _) = run(&["agents", &path("follower.bdi"), "--query", "eq1 and"]);
    assert_eq!(code, 2);
}
