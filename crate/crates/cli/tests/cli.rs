use std::path::{Path, PathBuf};
use std::process::Command;

use acvass::gen::Family;
use acvass::io::{machine_from_str, machine_to_string};
use tempfile::TempDir;

const IDENTITY: &str = r#"{"dimension":2,"states":["p","q"],"transitions":[
    {"from":"p","matrix":"identity","delta":[1,-1],"to":"p"},
    {"from":"p","matrix":"identity","delta":[0,0],"to":"q"}]}"#;
const RESET: &str = r#"{"dimension":1,"states":["p"],"transitions":[
    {"from":"p","matrix":[[0]],"delta":[1],"to":"p"}]}"#;
const DOUBLING: &str = r#"{"dimension":1,"states":["p"],"transitions":[
    {"from":"p","matrix":[[2]],"delta":[0],"to":"p"}]}"#;
const SWAP: &str = r#"{"dimension":2,"states":["p"],"transitions":[
    {"from":"p","matrix":[[0,1],[1,0]],"delta":[0,0],"to":"p"},
    {"from":"p","matrix":"identity","delta":[1,-1],"to":"p"}]}"#;
/// Overlapping columns without a full diagonal: coverability is open.
const OPEN: &str = r#"{"dimension":2,"states":["p"],"transitions":[
    {"from":"p","matrix":[[0,1],[1,1]],"delta":[0,0],"to":"p"}]}"#;
const ZERO_TEST: &str = r#"{"dimension":1,"states":["p","q"],"transitions":[
    {"from":"p","matrix":"identity","delta":[1],"to":"p"},
    {"from":"p","zero_test":0,"to":"q"}]}"#;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn acvass(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_acvass")).args(args).output().expect("binary runs");
    Run {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

struct Files(TempDir);

impl Files {
    fn new() -> Self {
        Files(tempfile::tempdir().unwrap())
    }

    fn put(&self, name: &str, text: &str) -> String {
        let path = self.path(name);
        std::fs::write(&path, text).unwrap();
        path.to_str().unwrap().to_string()
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn classify_identity_reports_three_np_verdicts() {
    let f = Files::new();
    let r = acvass(&["classify", &f.put("m.json", IDENTITY)]);
    assert_eq!(r.code, 0);
    assert_eq!(
        r.stdout,
        "reachability: decidable (NP) [continuous-vass]\n\
         coverability: decidable (NP) [continuous-vass]\n\
         state reachability: decidable (NP) [identity-complexity]\n"
    );
}

#[test]
fn reach_on_reset_machine_is_refused_as_undecidable() {
    let f = Files::new();
    let r = acvass(&["reach", &f.put("m.json", RESET), "--from", "p(0)", "--to", "p(1)"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stdout.starts_with("reachability: undecidable [zero-row-or-column]\n"));
}

#[test]
fn zero_tests_are_refused_as_undecidable() {
    let f = Files::new();
    let r = acvass(&["state-reach", &f.put("m.json", ZERO_TEST), "--from", "p(0)", "--to-state", "q"]);
    assert_eq!(r.code, 2);
    assert!(r.stdout.contains("undecidable [zero-test]"));
}

#[test]
fn open_class_exits_unknown() {
    let f = Files::new();
    let r = acvass(&["cover", &f.put("m.json", OPEN), "--from", "p(1, 0)", "--to", "p(1, 1)"]);
    assert_eq!(r.code, 3);
    assert!(r.stdout.contains("unknown [open]"));
}

#[test]
fn force_oracle_runs_the_bounded_search_anyway() {
    let f = Files::new();
    let m = f.put("m.json", RESET);
    let r = acvass(&["reach", &m, "--from", "p(0)", "--to", "p(1)", "--force-oracle", "--witness"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout, "reachability: yes (bounded search)\nwitness: [{\"fraction\":1,\"transition\":0}]\n");
    let r = acvass(&["reach", &m, "--from", "p(0)", "--to", "p(2)", "--force-oracle", "--max-len", "3"]);
    assert_eq!(r.code, 3);
    assert_eq!(r.stdout, "reachability: unknown (no witness of length at most 3)\n");
}

#[test]
fn identity_reach_yes_and_no() {
    let f = Files::new();
    let m = f.put("m.json", IDENTITY);
    let smt = f.path("sys.smt2");
    let r = acvass(&["reach", &m, "--from", "p(0, 1)", "--to", "q(1, 0)", "--witness", "--certificate", "--dump-system", smt.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with("reachability: yes [continuous-vass]\nwitness: ["));
    assert!(r.stdout.contains("certificate: {"));
    assert!(read(&smt).ends_with("(check-sat)\n"));

    // the printed witness replays to the target
    let witness = r.stdout.lines().find_map(|l| l.strip_prefix("witness: ")).unwrap();
    let seq = f.put("w.json", witness);
    let sim = acvass(&["simulate", &m, "--from", "p(0, 1)", "--seq", &seq]);
    assert_eq!(sim.code, 0);
    assert!(sim.stdout.trim_end().ends_with("-> q(1, 0)"), "{}", sim.stdout);

    let r = acvass(&["reach", &m, "--from", "p(0, 1)", "--to", "q(2, 0)"]);
    assert_eq!(r.code, 1);
    assert_eq!(r.stdout, "reachability: no [continuous-vass]\n");
}

#[test]
fn permutation_and_self_loop_dispatch() {
    let f = Files::new();
    let r = acvass(&["reach", &f.put("swap.json", SWAP), "--from", "p(0, 1)", "--to", "p(1/2, 1/2)", "--certificate"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with("reachability: yes [permutation-product]\n"));

    let r = acvass(&["cover", &f.put("dbl.json", DOUBLING), "--from", "p(1)", "--to", "p(100)", "--certificate"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with("coverability: yes [self-loop-coverability]\n"));
    assert!(r.stdout.contains("\"cycles\""));

    let r = acvass(&["cover", &f.path("dbl.json").to_string_lossy(), "--from", "p(0)", "--to", "p(1)"]);
    assert_eq!(r.code, 1);
}

#[test]
fn state_reach_prints_the_abstract_path() {
    let f = Files::new();
    let r = acvass(&["state-reach", &f.put("m.json", IDENTITY), "--from", "p(0, 1)", "--to-state", "q", "--witness"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(
        r.stdout,
        "state reachability: yes [identity-complexity]\nabstract path: p[1] -t1-> q[1]\nwitness: [{\"fraction\":1,\"transition\":1}]\n"
    );
}

#[test]
fn oracle_prints_a_bare_sequence() {
    let f = Files::new();
    let m = f.put("m.json", DOUBLING);
    let r = acvass(&["oracle", &m, "--from", "p(1)", "--to", "p(4)"]);
    assert_eq!(r.code, 0);
    assert_eq!(r.stdout, "[{\"fraction\":1,\"transition\":0},{\"fraction\":1,\"transition\":0}]\n");
    let r = acvass(&["oracle", &m, "--from", "p(1)", "--to", "p(4)", "--max-len", "1"]);
    assert_eq!(r.code, 3);
    // 1-bounded runs cannot leave the unit interval
    let r = acvass(&["oracle", &m, "--from", "p(1/2)", "--to", "p(2)", "--one-bounded"]);
    assert_eq!(r.code, 3);
}

#[test]
fn simulate_traces() {
    let f = Files::new();
    let m = f.put("m.json", IDENTITY);
    let empty = f.put("empty.json", "[]");
    let r = acvass(&["simulate", &m, "--from", "p(0, 1)", "--seq", &empty]);
    assert_eq!((r.code, r.stdout.as_str()), (0, "0: p(0, 1)\n"));

    let two = f.put("two.json", r#"[{"transition":0,"fraction":"1/2"},{"transition":1,"fraction":1}]"#);
    let r = acvass(&["simulate", &m, "--from", "p(0, 1)", "--seq", &two]);
    assert_eq!((r.code, r.stdout.as_str()), (0, "0: p(0, 1)\n1: 1/2*t0 -> p(1/2, 1/2)\n2: 1*t1 -> q(1/2, 1/2)\n"));

    let bad = f.put("bad.json", r#"[{"transition":0,"fraction":1}]"#);
    let r = acvass(&["simulate", &m, "--from", "p(1, 0)", "--seq", &bad]);
    assert_eq!(r.code, 1);
    assert_eq!(r.stdout, "0: p(1, 0)\nstep 1 (1*t0) is not enabled: counter 1 would become negative\n");
}

#[test]
fn identical_invocations_give_identical_bytes() {
    let f = Files::new();
    let m = f.put("m.json", SWAP);
    let args = ["reach", &m, "--from", "p(0, 1)", "--to", "p(1/2, 1/2)", "--witness", "--certificate"];
    assert_eq!(acvass(&args).stdout, acvass(&args).stdout);
    let args = ["gen-random", "--family", "arbitrary", "--seed", "11"];
    let first = acvass(&args);
    assert_eq!(first.code, 0);
    assert_eq!(first.stdout, acvass(&args).stdout);
    assert_ne!(first.stdout, acvass(&["gen-random", "--family", "arbitrary", "--seed", "12"]).stdout);
}

#[test]
fn generated_machines_belong_to_their_family_and_round_trip() {
    for family in Family::ALL {
        for seed in 0..5 {
            let r = acvass(&["gen-random", "--family", family.name(), "--seed", &seed.to_string(), "--dims", "2..3"]);
            assert_eq!(r.code, 0, "{}", r.stderr);
            let doc: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
            let machine = machine_from_str(&doc["machine"].to_string()).unwrap();
            assert!(machine.matrices().all(|m| family.contains(m)), "{family} seed {seed}");
            if family == Family::SelfLoop {
                assert!(machine.matrices().all(|m| (0..m.dim()).all(|i| m.get(i, i) != 0)));
            }
            assert!((2..=3).contains(&machine.dim));
            assert_eq!(machine_from_str(&machine_to_string(&machine)).unwrap(), machine);
        }
    }
    let r = acvass(&["gen-random", "--family", "triangular"]);
    assert_eq!(r.code, 4);
}

#[test]
fn compile_writes_parseable_machines() {
    let f = Files::new();
    let src = f.put("zt.json", ZERO_TEST);
    let out = f.path("out.json");
    let out_s = out.to_str().unwrap();
    let r = acvass(&["compile", "cover-to-reach", "--in", &src, "--out", out_s, "--to-state", "q"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let doc: serde_json::Value = serde_json::from_str(&read(&out)).unwrap();
    assert_eq!(doc["sink"], "q_cover");
    machine_from_str(&doc["machine"].to_string()).unwrap();

    let r = acvass(&["compile", "zero-test-to-negative", "--in", &src, "--out", out_s, "--matrix", "[[1,-1],[0,1]]"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let doc: serde_json::Value = serde_json::from_str(&read(&out)).unwrap();
    let compiled = machine_from_str(&doc["machine"].to_string()).unwrap();
    assert!(!compiled.has_zero_tests());
    assert!(doc["layout"]["primary"].is_array());

    let r = acvass(&["compile", "zero-test-to-negative", "--in", &src, "--out", out_s, "--matrix", "[[1,0],[0,1]]"]);
    assert_eq!(r.code, 4);

    let bp = f.put("bp.json", r#"{"variables":1,"states":["a","b"],"transitions":[{"from":"a","op":"set","var":0,"value":1,"to":"b"}]}"#);
    let r = acvass(&["compile", "boolean-to-perm", "--in", &bp, "--out", out_s, "--sigma", "1,2,0"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let doc: serde_json::Value = serde_json::from_str(&read(&out)).unwrap();
    assert_eq!(doc["true_counter"], serde_json::json!([0]));
    assert_eq!(doc["false_counter"], serde_json::json!([1]));
    let r = acvass(&["compile", "boolean-to-perm", "--in", &bp, "--out", out_s, "--sigma", "0,0"]);
    assert_eq!(r.code, 4);
}

#[test]
fn smt_export_of_solver_and_path_systems() {
    let f = Files::new();
    let m = f.put("m.json", IDENTITY);
    let r = acvass(&["smt-export", &m, "--from", "p(0, 1)", "--to", "q(1, 0)"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with("(set-logic QF_LRA)\n") && r.stdout.ends_with("(check-sat)\n"));
    let r = acvass(&["smt-export", &m, "--from", "p(0, 1)", "--to", "q(1, 0)", "--path", "0,1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("(declare-fun"));
    let r = acvass(&["smt-export", &m, "--from", "p(0, 1)", "--to", "q(1, 0)", "--path", "1,0"]);
    assert_eq!(r.code, 4);
}

#[test]
fn bad_input_exits_with_the_usage_code() {
    let f = Files::new();
    let m = f.put("m.json", IDENTITY);
    // wrong dimension
    let r = acvass(&["reach", &m, "--from", "p(0)", "--to", "q(1, 0)"]);
    assert_eq!(r.code, 4);
    assert!(r.stderr.contains("dimension"));
    let r = acvass(&["reach", &m, "--from", "r(0, 0)", "--to", "q(1, 0)"]);
    assert_eq!(r.code, 4);
    let r = acvass(&["classify", &f.put("bad.json", "{")]);
    assert_eq!(r.code, 4);
    let r = acvass(&["classify", &f.path("missing.json").to_string_lossy()]);
    assert_eq!(r.code, 4);
    let r = acvass(&["frobnicate"]);
    assert_eq!(r.code, 4);
    assert_eq!(acvass(&["--help"]).code, 0);
}
