use std::fs;
use std::ops::RangeInclusive;
use std::path::Path;

use acvass::classify::{classify_machine, Judgement, Justification, Verdict};
use acvass::cvass::{self, CvassOptions, ReachOutcome};
use acvass::gen::{self, Family, GenConfig};
use acvass::io::{config_from_json, config_to_json, machine_from_str, machine_to_json, parse_config, sequence_from_str, sequence_to_json};
use acvass::lra::{to_smtlib, LinearSystem};
use acvass::matrix::Matrix;
use acvass::model::{step, Config, FiringSequence, Machine};
use acvass::num::vec_ge;
use acvass::oracle::{bounded_decide, path_system, OracleOptions, OracleOutcome, Target};
use acvass::permreach;
use acvass::reductions::boolean::{compile_boolean_to_perm, compile_boolean_to_reset, program_from_str, CompiledProgram};
use acvass::reductions::cover::compile_cover_to_reach;
use acvass::reductions::resets::{compile_reset_to_zero_row_col, ZeroLine};
use acvass::reductions::zerotest::{compile_one_bounded_to_reset, compile_one_bounded_to_weighted, compile_zero_test_to_negative, compile_zero_test_to_one_bounded};
use acvass::selfloopcover::{self, CoverOptions, CoverOutcome};
use acvass::statereach::{self, StateReachOutcome};
use serde_json::{json, Value};

use super::{Code, CompileArgs, Compiler, Failure, GenArgs, OracleQuery, Query, SimulateArgs, SmtArgs, StateQuery};

type CmdResult = Result<Code, Failure>;

/// Appends a line to the report.
macro_rules! say {
    ($out:expr, $($arg:tt)*) => {{
        use std::fmt::Write as _;
        writeln!($out, $($arg)*).expect("writing to a String cannot fail");
    }};
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_machine(path: &Path) -> Result<Machine, Failure> {
    machine_from_str(&read(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// `state(v1, ..., vd)` inline, or `@path` to a configuration JSON file.
fn load_config(machine: &Machine, text: &str) -> Result<Config, Failure> {
    let parsed = match text.strip_prefix('@') {
        Some(path) => {
            let text = read(Path::new(path))?;
            let value: Value = serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{path}: {e}")))?;
            config_from_json(machine, value)
        }
        None => parse_config(machine, text),
    };
    parsed.map_err(Failure::usage)
}

fn state_of(machine: &Machine, name: &str) -> Result<usize, Failure> {
    machine.state_index(name).ok_or_else(|| Failure::usage(format!("unknown state `{name}`")))
}

fn compact(v: &Value) -> String {
    serde_json::to_string(v).expect("JSON values serialize")
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialize")
}

fn judgement_line(label: &str, j: &Judgement) -> String {
    format!("{label}: {} [{}]", j.verdict, j.justification)
}

pub fn classify(path: &Path, out: &mut String) -> CmdResult {
    let machine = load_machine(path)?;
    let c = classify_machine(&machine);
    say!(out, "{}", judgement_line("reachability", &c.reach));
    say!(out, "{}", judgement_line("coverability", &c.cover));
    say!(out, "{}", judgement_line("state reachability", &c.state_reach));
    Ok(Code::Yes)
}

/// Stops before any solver runs when the class is not decidable.
fn refuse(label: &str, j: &Judgement, out: &mut String) -> Option<Code> {
    let code = match j.verdict {
        Verdict::Undecidable => Code::Undecidable,
        Verdict::Unknown => Code::Unknown,
        _ => return None,
    };
    say!(out, "{}", judgement_line(label, j));
    say!(out, "no solver applies; --force-oracle runs a bounded search");
    Some(code)
}

/// Whether a replayed witness ends at the goal.
fn check_witness(machine: &Machine, from: &Config, seq: &FiringSequence, to_state: usize, target: &Target) -> Result<(), Failure> {
    let end = acvass::model::run(machine, from, seq).map_err(|e| Failure::internal(format!("witness does not replay: {e}")))?;
    let ok = end.state == to_state
        && match target {
            Target::Exact(v) => end.values == *v,
            Target::Cover(v) => vec_ge(&end.values, v),
            Target::StateOnly => true,
        };
    if ok {
        Ok(())
    } else {
        Err(Failure::internal(format!("witness ends in {}, which misses the goal", end.display(machine))))
    }
}

fn run_oracle(machine: &Machine, from: &Config, to_state: usize, target: &Target, opts: OracleOptions, label: &str, show_witness: bool, out: &mut String) -> CmdResult {
    match bounded_decide(machine, from, to_state, target, opts) {
        OracleOutcome::Witness(seq) => {
            check_witness(machine, from, &seq, to_state, target)?;
            say!(out, "{label}: yes (bounded search)");
            if show_witness {
                say!(out, "witness: {}", compact(&sequence_to_json(&seq)));
            }
            Ok(Code::Yes)
        }
        OracleOutcome::NoWitnessWithin(n) => {
            say!(out, "{label}: unknown (no witness of length at most {n})");
            Ok(Code::Unknown)
        }
    }
}

/// A solver answer with whatever evidence it produced.
enum Answer {
    Yes { witness: Option<FiringSequence>, certificate: Value, system: LinearSystem },
    No,
    Unknown,
}

fn from_reach(outcome: ReachOutcome) -> Answer {
    match outcome {
        ReachOutcome::Yes { witness, certificate } => {
            let (certificate, system) = match certificate {
                Some(c) => (c.to_json(), c.system),
                None => (Value::Null, LinearSystem::new()),
            };
            Answer::Yes { witness: Some(witness), certificate, system }
        }
        ReachOutcome::No => Answer::No,
        ReachOutcome::Unknown => Answer::Unknown,
    }
}

/// Runs the solver the classification names for this problem.
fn solve(machine: &Machine, from: &Config, to: &Config, cover: bool, j: &Judgement, support_cap: Option<usize>) -> Result<Answer, Failure> {
    let cvass_opts = CvassOptions { support_cap: support_cap.unwrap_or(CvassOptions::default().support_cap) };
    let answer = match (j.justification, cover) {
        (Justification::ContinuousVass, false) => from_reach(cvass::reach(machine, from, to, cvass_opts).map_err(Failure::internal)?),
        (Justification::ContinuousVass, true) => from_reach(cvass::cover(machine, from, to, cvass_opts).map_err(Failure::internal)?),
        (Justification::PermutationProduct, false) => from_reach(permreach::reach(machine, from, to, cvass_opts).map_err(Failure::internal)?),
        (Justification::PermutationProduct, true) => from_reach(permreach::cover(machine, from, to, cvass_opts).map_err(Failure::internal)?),
        (Justification::SelfLoopCoverability, true) => {
            let opts = CoverOptions { support_cap: support_cap.unwrap_or(CoverOptions::default().support_cap) };
            match selfloopcover::cover(machine, from, to, opts).map_err(Failure::internal)? {
                CoverOutcome::Yes(c) => Answer::Yes { witness: None, certificate: c.to_json(machine), system: c.system },
                CoverOutcome::No => Answer::No,
                CoverOutcome::Unknown => Answer::Unknown,
            }
        }
        (other, _) => return Err(Failure::internal(format!("no solver registered for {other}"))),
    };
    Ok(answer)
}

pub fn reach_or_cover(q: &Query, cover: bool, out: &mut String) -> CmdResult {
    let machine = load_machine(&q.machine)?;
    let from = load_config(&machine, &q.from)?;
    let to = load_config(&machine, &q.to)?;
    let label = if cover { "coverability" } else { "reachability" };
    let target = if cover { Target::Cover(to.values.clone()) } else { Target::Exact(to.values.clone()) };
    if q.force_oracle {
        let opts = OracleOptions { max_len: q.max_len, one_bounded: false };
        return run_oracle(&machine, &from, to.state, &target, opts, label, q.witness, out);
    }
    let class = classify_machine(&machine);
    let j = if cover { class.cover } else { class.reach };
    if let Some(code) = refuse(label, &j, out) {
        return Ok(code);
    }
    match solve(&machine, &from, &to, cover, &j, q.support_cap)? {
        Answer::Yes { witness, certificate, system } => {
            if let Some(seq) = &witness {
                check_witness(&machine, &from, seq, to.state, &target)?;
            }
            say!(out, "{label}: yes [{}]", j.justification);
            if q.witness {
                match &witness {
                    Some(seq) => say!(out, "witness: {}", compact(&sequence_to_json(seq))),
                    None => say!(out, "witness: not built by this solver; see --certificate"),
                }
            }
            if q.certificate {
                say!(out, "certificate: {}", pretty(&certificate));
            }
            if let Some(path) = &q.dump_system {
                write(path, &to_smtlib(&system))?;
            }
            Ok(Code::Yes)
        }
        Answer::No => {
            say!(out, "{label}: no [{}]", j.justification);
            Ok(Code::No)
        }
        Answer::Unknown => {
            say!(out, "{label}: unknown (support cap exceeded; raise --support-cap)");
            Ok(Code::Unknown)
        }
    }
}

pub fn state_reach(q: &StateQuery, out: &mut String) -> CmdResult {
    let machine = load_machine(&q.machine)?;
    let from = load_config(&machine, &q.from)?;
    let to_state = state_of(&machine, &q.to_state)?;
    let label = "state reachability";
    if q.force_oracle {
        let opts = OracleOptions { max_len: q.max_len, one_bounded: false };
        return run_oracle(&machine, &from, to_state, &Target::StateOnly, opts, label, q.witness, out);
    }
    let j = classify_machine(&machine).state_reach;
    if let Some(code) = refuse(label, &j, out) {
        return Ok(code);
    }
    match statereach::state_reach(&machine, &from, to_state).map_err(Failure::internal)? {
        StateReachOutcome::Reachable { abstract_path, witness } => {
            check_witness(&machine, &from, &witness, to_state, &Target::StateOnly)?;
            say!(out, "{label}: yes [{}]", j.justification);
            let mut path = format!("{}{:?}", machine.states[from.state], from.support().iter().collect::<Vec<_>>());
            let mut state = from.state;
            for (t, support) in &abstract_path {
                state = machine.transitions[*t].to;
                path.push_str(&format!(" -t{t}-> {}{:?}", machine.states[state], support.iter().collect::<Vec<_>>()));
            }
            debug_assert_eq!(state, to_state);
            say!(out, "abstract path: {path}");
            if q.witness {
                say!(out, "witness: {}", compact(&sequence_to_json(&witness)));
            }
            Ok(Code::Yes)
        }
        StateReachOutcome::Unreachable => {
            say!(out, "{label}: no [{}]", j.justification);
            Ok(Code::No)
        }
    }
}

pub fn oracle(q: &OracleQuery, out: &mut String) -> CmdResult {
    let machine = load_machine(&q.machine)?;
    let from = load_config(&machine, &q.from)?;
    let (to_state, target) = match (&q.to, &q.to_state) {
        (Some(to), _) => {
            let to = load_config(&machine, to)?;
            (to.state, if q.cover { Target::Cover(to.values) } else { Target::Exact(to.values) })
        }
        (None, Some(name)) => (state_of(&machine, name)?, Target::StateOnly),
        (None, None) => return Err(Failure::usage("either --to or --to-state is required")),
    };
    let opts = OracleOptions { max_len: q.max_len, one_bounded: q.one_bounded };
    match bounded_decide(&machine, &from, to_state, &target, opts) {
        OracleOutcome::Witness(seq) => {
            check_witness(&machine, &from, &seq, to_state, &target)?;
            say!(out, "{}", compact(&sequence_to_json(&seq)));
            Ok(Code::Yes)
        }
        OracleOutcome::NoWitnessWithin(n) => {
            say!(out, "no witness of length at most {n}");
            Ok(Code::Unknown)
        }
    }
}

fn parse_matrix(text: Option<&str>) -> Result<Matrix, Failure> {
    let text = text.ok_or_else(|| Failure::usage("this compiler needs --matrix"))?;
    let rows: Vec<Vec<i64>> = serde_json::from_str(text).map_err(|e| Failure::usage(format!("--matrix: {e}")))?;
    Matrix::from_rows(&rows).ok_or_else(|| Failure::usage("--matrix must be square"))
}

fn source_pair(machine: &Machine, a: &CompileArgs) -> Result<(Config, Config), Failure> {
    let (Some(from), Some(to)) = (&a.from, &a.to) else {
        return Err(Failure::usage("this compiler needs --from and --to"));
    };
    Ok((load_config(machine, from)?, load_config(machine, to)?))
}

fn program_json(p: &CompiledProgram) -> Value {
    json!({ "machine": machine_to_json(&p.machine), "true_counter": p.true_counter, "false_counter": p.false_counter })
}

pub fn compile(a: &CompileArgs, out: &mut String) -> CmdResult {
    let doc = match a.name {
        Compiler::BooleanToReset | Compiler::BooleanToPerm => {
            let bp = program_from_str(&read(&a.input)?).map_err(Failure::usage)?;
            if matches!(a.name, Compiler::BooleanToReset) {
                program_json(&compile_boolean_to_reset(&bp))
            } else {
                let text = a.sigma.as_deref().ok_or_else(|| Failure::usage("boolean-to-perm needs --sigma"))?;
                let sigma: Vec<usize> = text
                    .split(',')
                    .map(|s| s.trim().parse().map_err(|_| Failure::usage(format!("--sigma: bad index `{s}`"))))
                    .collect::<Result<_, _>>()?;
                program_json(&compile_boolean_to_perm(&bp, &sigma).map_err(Failure::usage)?)
            }
        }
        name => {
            let m = load_machine(&a.input)?;
            match name {
                Compiler::CoverToReach => {
                    let name = a.to_state.as_deref().ok_or_else(|| Failure::usage("cover-to-reach needs --to-state"))?;
                    let c = compile_cover_to_reach(&m, state_of(&m, name)?);
                    json!({ "machine": machine_to_json(&c.machine), "sink": c.machine.states[c.sink], "entry": c.entry })
                }
                Compiler::ZeroTestToOneBounded => {
                    let (from, to) = source_pair(&m, a)?;
                    let (c, b) = compile_zero_test_to_one_bounded(&m, &from, &to).map_err(Failure::usage)?;
                    let mut v = c.to_json();
                    v["budget_counters"] = json!({ "budget": b.budget, "borrowed": b.borrowed, "start": b.start });
                    v
                }
                Compiler::OneBoundedToReset => {
                    let (from, to) = source_pair(&m, a)?;
                    compile_one_bounded_to_reset(&m, &from, &to).map_err(Failure::usage)?.to_json()
                }
                Compiler::ZeroTestToNegative => {
                    let gadget = parse_matrix(a.matrix.as_deref())?;
                    compile_zero_test_to_negative(&m, &gadget).map_err(Failure::usage)?.to_json()
                }
                Compiler::OneBoundedToWeighted => {
                    let (from, to) = source_pair(&m, a)?;
                    let gadget = parse_matrix(a.matrix.as_deref())?;
                    compile_one_bounded_to_weighted(&m, &from, &to, &gadget).map_err(Failure::usage)?.to_json()
                }
                Compiler::ResetToZeroLine => {
                    let gadget = parse_matrix(a.matrix.as_deref())?;
                    let (c, line) = compile_reset_to_zero_row_col(&m, &gadget).map_err(Failure::usage)?;
                    let mut v = c.to_json();
                    v["zero_line"] = match line {
                        ZeroLine::Row(i) => json!({ "row": i }),
                        ZeroLine::Column(i) => json!({ "column": i }),
                    };
                    v
                }
                Compiler::BooleanToReset | Compiler::BooleanToPerm => unreachable!("handled above"),
            }
        }
    };
    write(&a.output, &(pretty(&doc) + "\n"))?;
    say!(out, "wrote {}", a.output.display());
    Ok(Code::Yes)
}

fn parse_range<T: std::str::FromStr + PartialOrd + Copy>(flag: &str, text: &str) -> Result<RangeInclusive<T>, Failure> {
    let bad = || Failure::usage(format!("--{flag}: expected `lo..hi` or a number, got `{text}`"));
    let num = |s: &str| s.trim().parse::<T>().map_err(|_| bad());
    // split at the first `..` that is not a leading minus sign
    let (lo, hi) = match text.find("..") {
        Some(i) => (num(&text[..i])?, num(&text[i + 2..])?),
        None => {
            let v = num(text)?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(bad());
    }
    Ok(lo..=hi)
}

pub fn gen_random(a: &GenArgs, out: &mut String) -> CmdResult {
    let family: Family = a.family.parse().map_err(Failure::usage)?;
    let cfg = GenConfig {
        seed: a.seed,
        family,
        dims: parse_range("dims", &a.dims)?,
        states: parse_range("states", &a.states)?,
        transitions: parse_range("transitions", &a.transitions)?,
        entry_max: a.entry_max,
        deltas: parse_range("deltas", &a.deltas)?,
    };
    if *cfg.dims.start() == 0 || *cfg.states.start() == 0 || cfg.entry_max < 1 {
        return Err(Failure::usage("dimensions and state counts start at 1, and --entry-max is at least 1"));
    }
    let inst = gen::gen_random(&cfg);
    if let Some(bad) = inst.machine.matrices().find(|m| !family.contains(m)) {
        return Err(Failure::internal(format!("generated matrix {:?} is outside the {family} family", bad.rows())));
    }
    let m = &inst.machine;
    let doc = json!({
        "family": family.name(),
        "seed": a.seed,
        "machine": machine_to_json(m),
        "start": config_to_json(m, &inst.start),
        "samples": inst.samples.iter().map(|c| config_to_json(m, c)).collect::<Vec<_>>(),
    });
    let text = pretty(&doc) + "\n";
    match &a.output {
        Some(path) => write(path, &text)?,
        None => out.push_str(&text),
    }
    Ok(Code::Yes)
}

pub fn smt_export(a: &SmtArgs, out: &mut String) -> CmdResult {
    let machine = load_machine(&a.machine)?;
    let from = load_config(&machine, &a.from)?;
    let to = load_config(&machine, &a.to)?;
    let system = match &a.path {
        Some(text) => {
            let path: Vec<usize> = text
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse().map_err(|_| Failure::usage(format!("--path: bad transition id `{s}`"))))
                .collect::<Result<_, _>>()?;
            if path.iter().any(|&t| t >= machine.transitions.len()) {
                return Err(Failure::usage("--path names a transition that does not exist"));
            }
            let target = if a.cover { Target::Cover(to.values.clone()) } else { Target::Exact(to.values.clone()) };
            if path.last().map_or(from.state, |&t| machine.transitions[t].to) != to.state {
                return Err(Failure::usage("--path does not end in the target state"));
            }
            path_system(&machine, &from, &path, Some(&target), a.one_bounded)
                .ok_or_else(|| Failure::usage("--path is not a path of the machine from the source state"))?
                .system
        }
        None => {
            let class = classify_machine(&machine);
            let label = if a.cover { "coverability" } else { "reachability" };
            let j = if a.cover { class.cover } else { class.reach };
            if let Some(code) = refuse(label, &j, out) {
                return Ok(code);
            }
            match solve(&machine, &from, &to, a.cover, &j, a.support_cap)? {
                Answer::Yes { system, .. } => system,
                Answer::No => {
                    say!(out, "{label}: no; the solver built no satisfiable system to export");
                    return Ok(Code::No);
                }
                Answer::Unknown => {
                    say!(out, "{label}: unknown (support cap exceeded)");
                    return Ok(Code::Unknown);
                }
            }
        }
    };
    let text = to_smtlib(&system);
    match &a.output {
        Some(path) => write(path, &text)?,
        None => out.push_str(&text),
    }
    Ok(Code::Yes)
}

pub fn simulate(a: &SimulateArgs, out: &mut String) -> CmdResult {
    let machine = load_machine(&a.machine)?;
    let from = load_config(&machine, &a.from)?;
    let seq = sequence_from_str(&read(&a.seq)?).map_err(|e| Failure::usage(format!("{}: {e}", a.seq.display())))?;
    say!(out, "0: {}", from.display(&machine));
    let mut cfg = from;
    for (i, s) in seq.iter().enumerate() {
        match step(&machine, &cfg, s) {
            Ok(next) => {
                say!(out, "{}: {s} -> {}", i + 1, next.display(&machine));
                cfg = next;
            }
            Err(e) => {
                say!(out, "step {} ({s}) is not enabled: {e}", i + 1);
                return Ok(Code::No);
            }
        }
    }
    Ok(Code::Yes)
}
