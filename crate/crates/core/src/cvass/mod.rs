//! Reachability and coverability when every matrix is the identity.
//!
//! A run with transition support `S` moves through the strongly connected
//! components of the graph formed by `S` in a fixed order, crossing from one
//! component to the next by a single firing. Inside a component the run can
//! be rearranged into: an opening walk with tiny fractions that makes every
//! touched counter non-zero, many small copies of a closed walk that carry
//! the bulk of the flow, and a closing walk that is the reverse of an
//! opening walk of the reversed machine. Deciding reachability therefore
//! amounts to enumerating supports and solving one linear system per
//! support, which also yields every number needed to build the witness.

pub mod admissible;

use std::collections::HashMap;

use itertools::Itertools;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};
use thiserror::Error;

pub use admissible::{admissible, build_admissible_run, minimal_initial_supports, pumpable, support_pump};

use crate::io::rational_to_json;
use crate::lra::{solve, Cmp, LinExpr, LinearSystem, LraResult};
use crate::model::{masses, path_of, replay, run, scale_seq, Config, CounterSet, FiringSequence, Machine, ModelError, Step};
use crate::num::{floor_plus_one, Rational};
use crate::reductions::cover::compile_cover_to_reach;
use crate::statereach::{state_reach, StateReachOutcome};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CvassError {
    #[error("transition {0} does not have the identity matrix")]
    NotIdentity(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CvassOptions {
    /// Largest transition support that is enumerated.
    pub support_cap: usize,
}

impl Default for CvassOptions {
    fn default() -> Self {
        CvassOptions { support_cap: 14 }
    }
}

/// One strongly connected piece of a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub entry: usize,
    pub exit: usize,
    pub transitions: Vec<usize>,
    /// Counters required non-zero on entry and on exit.
    pub entry_support: CounterSet,
    pub exit_support: CounterSet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    /// State names of the machine the certificate talks about. Cover
    /// queries and permutation machines are solved on a derived machine,
    /// whose states and transition ids differ from the input's.
    pub states: Vec<String>,
    pub support: Vec<usize>,
    pub segments: Vec<Segment>,
    /// Transitions crossing from one segment to the next.
    pub bridges: Vec<usize>,
    pub system: LinearSystem,
    pub model: Vec<Rational>,
}

impl Certificate {
    /// Segments, bridges and the model of the solved system keyed by
    /// variable name.
    pub fn to_json(&self) -> Value {
        let segments: Vec<Value> = self
            .segments
            .iter()
            .map(|s| {
                json!({
                    "entry": self.states[s.entry],
                    "exit": self.states[s.exit],
                    "transitions": s.transitions,
                    "entry_support": s.entry_support.iter().collect::<Vec<_>>(),
                    "exit_support": s.exit_support.iter().collect::<Vec<_>>(),
                })
            })
            .collect();
        let model: serde_json::Map<String, Value> =
            self.system.names().iter().zip(&self.model).map(|(n, v)| (n.clone(), rational_to_json(v))).collect();
        json!({ "states": self.states, "support": self.support, "segments": segments, "bridges": self.bridges, "model": model })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReachOutcome {
    Yes { witness: FiringSequence, certificate: Option<Box<Certificate>> },
    No,
    /// Supports above the cap were not explored.
    Unknown,
}

impl ReachOutcome {
    pub fn witness(&self) -> Option<&FiringSequence> {
        match self {
            ReachOutcome::Yes { witness, .. } => Some(witness),
            _ => None,
        }
    }
}

pub fn check_identity(machine: &Machine) -> Result<(), CvassError> {
    for (id, t) in machine.transitions.iter().enumerate() {
        if !t.matrix().is_some_and(|m| m.is_identity()) {
            return Err(CvassError::NotIdentity(id));
        }
    }
    Ok(())
}

/// Shape of a candidate support: its components in visiting order.
#[derive(Clone, Debug)]
struct Shape {
    /// (entry, exit, internal transitions)
    parts: Vec<(usize, usize, Vec<usize>)>,
    bridges: Vec<usize>,
}

/// Splits `set` into strongly connected components and checks that they
/// form a chain from `from` to `to` joined by exactly one transition each.
fn chain_shape(machine: &Machine, set: &[usize], from: usize, to: usize) -> Option<Shape> {
    let allowed = |t: usize| set.contains(&t);
    let mut vertices = vec![from, to];
    for &t in set {
        vertices.push(machine.transitions[t].from);
        vertices.push(machine.transitions[t].to);
    }
    vertices.sort_unstable();
    vertices.dedup();
    let reach: HashMap<usize, Vec<bool>> = vertices.iter().map(|&v| (v, machine.graph_reachable(v, allowed))).collect();
    let same = |a: usize, b: usize| reach[&a][b] && reach[&b][a];
    let mut parts = Vec::new();
    let mut bridges = Vec::new();
    let mut entry = from;
    let mut used = 0;
    loop {
        let internal: Vec<usize> = set.iter().copied().filter(|&t| {
            let tr = &machine.transitions[t];
            same(tr.from, entry) && same(tr.to, entry)
        }).collect();
        used += internal.len();
        let leaving: Vec<usize> = set.iter().copied().filter(|&t| {
            let tr = &machine.transitions[t];
            same(tr.from, entry) && !same(tr.to, entry)
        }).collect();
        if same(entry, to) {
            if !leaving.is_empty() {
                return None;
            }
            parts.push((entry, to, internal));
            break;
        }
        let [bridge] = leaving[..] else {
            return None;
        };
        parts.push((entry, machine.transitions[bridge].from, internal));
        bridges.push(bridge);
        used += 1;
        entry = machine.transitions[bridge].to;
    }
    let covered = vertices.iter().all(|&v| parts.iter().any(|(e, _, _)| same(*e, v)));
    (used == set.len() && covered).then_some(Shape { parts, bridges })
}

/// Transitions that lie on some path from `from` to `to`.
fn useful_transitions(machine: &Machine, from: usize, to: usize) -> Vec<usize> {
    let fwd = machine.graph_reachable(from, |_| true);
    (0..machine.transitions.len())
        .filter(|&t| {
            let tr = &machine.transitions[t];
            fwd[tr.from] && machine.graph_reachable(tr.to, |_| true)[to]
        })
        .collect()
}

type SupportCache = HashMap<(usize, Vec<usize>), Vec<CounterSet>>;

fn cached_minimal(cache: &mut SupportCache, machine: &Machine, anchor: usize, set: &[usize]) -> Vec<CounterSet> {
    cache
        .entry((anchor, set.to_vec()))
        .or_insert_with(|| minimal_initial_supports(machine, anchor, set, CounterSet::EMPTY, anchor))
        .clone()
}

struct Encoded {
    system: LinearSystem,
    flow_vars: Vec<Vec<(usize, usize)>>,
    bridge_vars: Vec<usize>,
    starts: Vec<Vec<LinExpr>>,
    ends: Vec<Vec<LinExpr>>,
}

fn encode(machine: &Machine, from: &Config, to: &Config, shape: &Shape, supports: &[(CounterSet, CounterSet)]) -> Encoded {
    let mut system = LinearSystem::new();
    let zero = LinExpr::zero();
    let mut cur: Vec<LinExpr> = from.values.iter().map(|x| LinExpr::constant(x.clone())).collect();
    let mut flow_vars = Vec::new();
    let mut bridge_vars = Vec::new();
    let mut starts = Vec::new();
    let mut ends = Vec::new();
    for (i, (_, _, internal)) in shape.parts.iter().enumerate() {
        let (entry_support, exit_support) = supports[i];
        for x in entry_support.iter() {
            system.assert(&cur[x], Cmp::Gt, &zero);
        }
        starts.push(cur.clone());
        let mut vars = Vec::new();
        for &t in internal {
            let v = system.add_positive_var(format!("flow_t{t}"));
            vars.push((t, v));
            for (e, d) in cur.iter_mut().zip(machine.transitions[t].delta().unwrap()) {
                e.add_term(v, d);
            }
        }
        if !internal.is_empty() {
            for e in &cur {
                if !e.is_constant() {
                    system.assert(e, Cmp::Ge, &zero);
                }
            }
        }
        for x in exit_support.iter() {
            system.assert(&cur[x], Cmp::Gt, &zero);
        }
        ends.push(cur.clone());
        flow_vars.push(vars);
        if let Some(&b) = shape.bridges.get(i) {
            let a = system.add_fraction_var(format!("bridge_t{b}"));
            bridge_vars.push(a);
            for (e, d) in cur.iter_mut().zip(machine.transitions[b].delta().unwrap()) {
                e.add_term(a, d);
            }
            for e in &cur {
                system.assert(e, Cmp::Ge, &zero);
            }
        }
    }
    for (e, x) in cur.iter().zip(&to.values) {
        system.assert_const(e, Cmp::Eq, x.clone());
    }
    Encoded { system, flow_vars, bridge_vars, starts, ends }
}

/// Decides `from ->* to`. A `Yes` carries a witness that has been replayed
/// exactly.
pub fn reach(machine: &Machine, from: &Config, to: &Config, opts: CvassOptions) -> Result<ReachOutcome, CvassError> {
    machine.validate()?;
    machine.check_config(from)?;
    machine.check_config(to)?;
    check_identity(machine)?;
    let reversed = machine.reversed();
    let useful = useful_transitions(machine, from.state, to.state);
    let mut fwd_cache = SupportCache::new();
    let mut bwd_cache = SupportCache::new();
    for size in 0..=useful.len().min(opts.support_cap) {
        for set in useful.iter().copied().combinations(size) {
            let Some(shape) = chain_shape(machine, &set, from.state, to.state) else {
                continue;
            };
            let mut options = Vec::new();
            for (entry, exit, internal) in &shape.parts {
                let fwd = cached_minimal(&mut fwd_cache, machine, *entry, internal);
                let bwd = cached_minimal(&mut bwd_cache, &reversed, *exit, internal);
                options.push(fwd.into_iter().cartesian_product(bwd).collect::<Vec<_>>());
            }
            for choice in choices(&options) {
                let enc = encode(machine, from, to, &shape, &choice);
                if let LraResult::Sat(model) = solve(&enc.system) {
                    let witness = extract_witness(machine, &reversed, from, &shape, &enc, &model)?;
                    let end = run(machine, from, &witness).map_err(|e| CvassError::Internal(format!("witness replay failed: {e}")))?;
                    if end != *to {
                        return Err(CvassError::Internal("witness ends in the wrong configuration".into()));
                    }
                    let segments = shape
                        .parts
                        .iter()
                        .zip(&choice)
                        .map(|((entry, exit, internal), (es, xs))| Segment {
                            entry: *entry,
                            exit: *exit,
                            transitions: internal.clone(),
                            entry_support: *es,
                            exit_support: *xs,
                        })
                        .collect();
                    let certificate = Certificate { states: machine.states.clone(), support: set, segments, bridges: shape.bridges.clone(), system: enc.system, model };
                    return Ok(ReachOutcome::Yes { witness, certificate: Some(Box::new(certificate)) });
                }
            }
        }
    }
    Ok(if useful.len() > opts.support_cap { ReachOutcome::Unknown } else { ReachOutcome::No })
}

/// All ways of picking one element from each list.
fn choices<T: Clone>(lists: &[Vec<T>]) -> Vec<Vec<T>> {
    lists.iter().fold(vec![Vec::new()], |acc, list| {
        acc.iter()
            .flat_map(|prefix| {
                list.iter().map(move |x| {
                    let mut p = prefix.clone();
                    p.push(x.clone());
                    p
                })
            })
            .collect()
    })
}

fn eval_vec(exprs: &[LinExpr], model: &[Rational]) -> Vec<Rational> {
    exprs.iter().map(|e| e.eval(model)).collect()
}

fn extract_witness(machine: &Machine, reversed: &Machine, from: &Config, shape: &Shape, enc: &Encoded, model: &[Rational]) -> Result<FiringSequence, CvassError> {
    let mut witness = Vec::new();
    for (i, (entry, exit, internal)) in shape.parts.iter().enumerate() {
        let start = eval_vec(&enc.starts[i], model);
        let end = eval_vec(&enc.ends[i], model);
        if !internal.is_empty() {
            let flow: Vec<(usize, Rational)> = enc.flow_vars[i].iter().map(|&(t, v)| (t, model[v].clone())).collect();
            witness.extend(segment_run(machine, reversed, *entry, *exit, internal, &start, &end, &flow)?);
        }
        if let Some(&b) = shape.bridges.get(i) {
            witness.push(Step::new(b, model[enc.bridge_vars[i]].clone()));
        }
    }
    debug_assert_eq!(from.values.len(), machine.dim);
    Ok(witness)
}

/// A run inside one strongly connected support from `entry(start)` to
/// `exit(end)` whose total fraction per transition is `flow`.
#[allow(clippy::too_many_arguments)]
pub fn segment_run(
    machine: &Machine,
    reversed: &Machine,
    entry: usize,
    exit: usize,
    set: &[usize],
    start: &[Rational],
    end: &[Rational],
    flow: &[(usize, Rational)],
) -> Result<FiringSequence, CvassError> {
    let internal = |msg: &str| CvassError::Internal(msg.to_string());
    let order_f = admissible(machine, entry, CounterSet::support(start), set, CounterSet::EMPTY, entry).ok_or_else(|| internal("no forward order"))?;
    let opening = build_admissible_run(machine, entry, &order_f, start, CounterSet::EMPTY, entry).ok_or_else(|| internal("opening walk failed"))?;
    let order_b = admissible(reversed, exit, CounterSet::support(end), set, CounterSet::EMPTY, entry).ok_or_else(|| internal("no backward order"))?;
    let closing_rev = build_admissible_run(reversed, exit, &order_b, end, CounterSet::EMPTY, entry).ok_or_else(|| internal("closing walk failed"))?;
    let closing: FiringSequence = closing_rev.into_iter().rev().collect();

    let n = machine.transitions.len();
    let m_open = masses(n, &opening);
    let m_close = masses(n, &closing);
    let two = Rational::from_integer(2.into());
    let mut lambda = Rational::one();
    for (t, x) in flow {
        let used = &m_open[*t] + &m_close[*t];
        let bound = x / (&two * &used);
        if bound < lambda {
            lambda = bound;
        }
    }
    let opening = scale_seq(&opening, &lambda);
    let closing = scale_seq(&closing, &lambda);
    let after_open = run(machine, &Config::new(entry, start.to_vec()), &opening).map_err(|e| internal(&e.to_string()))?.values;
    let mut before_close = end.to_vec();
    for s in &closing {
        for (v, d) in before_close.iter_mut().zip(machine.transitions[s.transition].delta().unwrap()) {
            *v -= d * &s.fraction;
        }
    }

    // Remaining flow, carried by copies of the opening walk (a closed walk
    // at `entry` through every transition of `set`).
    let remaining: HashMap<usize, Rational> = flow
        .iter()
        .map(|(t, x)| (*t, x - &lambda * (&m_open[*t] + &m_close[*t])))
        .collect();
    let cycle = path_of(&opening);
    let mut count: HashMap<usize, usize> = HashMap::new();
    for &t in &cycle {
        *count.entry(t).or_default() += 1;
    }
    let mut copies = Rational::one();
    for (t, y) in &remaining {
        let need = y / Rational::from_integer(count[t].into());
        if need > copies {
            copies = need;
        }
    }
    let mut touched = CounterSet::EMPTY;
    for &t in set {
        touched = touched.union(machine.transitions[t].incremented()).union(machine.transitions[t].decremented());
    }
    for x in touched.iter() {
        let low = after_open[x].clone().min(before_close[x].clone());
        if !low.is_positive() {
            return Err(internal("a touched counter is zero around the bulk phase"));
        }
        let swing: Rational = remaining.iter().map(|(t, y)| machine.transitions[*t].delta().unwrap()[x].abs() * y).sum();
        let need = swing / low;
        if need >= copies {
            copies = need;
        }
    }
    let copies = floor_plus_one(&copies);
    let copies_q = Rational::from_integer(copies.clone());
    let one_copy: Vec<Step> = cycle
        .iter()
        .map(|t| Step::new(*t, &remaining[t] / (&copies_q * Rational::from_integer(count[t].into()))))
        .collect();
    let copies: usize = copies.try_into().map_err(|_| internal("too many copies"))?;
    let mut seq = opening;
    for _ in 0..copies {
        seq.extend(one_copy.iter().cloned());
    }
    seq.extend(closing);
    Ok(seq)
}

/// Decides whether `from` can reach a configuration in `to.state` that is at
/// least `to.values`.
pub fn cover(machine: &Machine, from: &Config, to: &Config, opts: CvassOptions) -> Result<ReachOutcome, CvassError> {
    machine.validate()?;
    machine.check_config(from)?;
    machine.check_config(to)?;
    check_identity(machine)?;
    if to.values.iter().all(Zero::is_zero) {
        return Ok(match state_reach(machine, from, to.state).map_err(|e| CvassError::Internal(e.to_string()))? {
            StateReachOutcome::Reachable { witness, .. } => ReachOutcome::Yes { witness, certificate: None },
            StateReachOutcome::Unreachable => ReachOutcome::No,
        });
    }
    let compiled = compile_cover_to_reach(machine, to.state);
    let target = Config::new(compiled.sink, to.values.clone());
    Ok(match reach(&compiled.machine, from, &target, opts)? {
        ReachOutcome::Yes { witness, certificate } => {
            let cut = witness.iter().position(|s| s.transition == compiled.entry).expect("compiled witness enters the sink");
            let witness: FiringSequence = witness[..cut].to_vec();
            let configs = replay(machine, from, &witness).map_err(|e| CvassError::Internal(e.to_string()))?;
            let end = configs.last().unwrap();
            if end.state != to.state || !crate::num::vec_ge(&end.values, &to.values) {
                return Err(CvassError::Internal("cover witness does not dominate the target".into()));
            }
            ReachOutcome::Yes { witness, certificate }
        }
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{int, rat};

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn single_bridge_bounds_the_mass() {
        let mut m = Machine::with_states(1, 2);
        m.add_additive(0, &[1], 1);
        let from = Config::from_ints(0, &[0]);
        let yes = reach(&m, &from, &Config::new(1, vec![rat(1, 2)]), CvassOptions::default()).unwrap();
        assert_eq!(yes.witness().unwrap(), &vec![Step::new(0, rat(1, 2))]);
        assert_eq!(reach(&m, &from, &Config::from_ints(1, &[2]), CvassOptions::default()).unwrap(), ReachOutcome::No);
        assert_eq!(reach(&m, &from, &Config::from_ints(0, &[0]), CvassOptions::default()).unwrap().witness(), Some(&vec![]));
    }

    #[test]
    fn loops_carry_unbounded_mass() {
        // q0: +x, then move to q1 with -x
        let mut m = Machine::with_states(2, 2);
        m.add_additive(0, &[1, 0], 0);
        m.add_additive(0, &[-1, 1], 1);
        let from = Config::from_ints(0, &[0, 0]);
        let to = Config::new(1, vec![int(5), rat(1, 3)]);
        let out = reach(&m, &from, &to, CvassOptions::default()).unwrap();
        assert_eq!(run(&m, &from, out.witness().unwrap()).unwrap(), to);
        // y can only grow by one fraction
        assert_eq!(reach(&m, &from, &Config::new(1, ints(&[0, 2])), CvassOptions::default()).unwrap(), ReachOutcome::No);
    }

    #[test]
    fn cycle_needs_opening_order() {
        // a cycle q0 -> q1 -> q0 where q1 -> q0 consumes x0 and produces x1,
        // and a self-loop on q0 consuming x1.
        let mut m = Machine::with_states(2, 2);
        m.add_additive(0, &[1, 0], 1);
        m.add_additive(1, &[-1, 1], 0);
        m.add_additive(0, &[0, -1], 0);
        let from = Config::from_ints(0, &[0, 0]);
        for target in [ints(&[0, 0]), ints(&[3, 0]), ints(&[0, 7]), vec![rat(1, 5), rat(9, 2)]] {
            let to = Config::new(0, target);
            let out = reach(&m, &from, &to, CvassOptions::default()).unwrap();
            assert_eq!(run(&m, &from, out.witness().unwrap()).unwrap(), to);
        }
    }

    #[test]
    fn backward_condition_matters() {
        // q0 --(-1)--> q0 from x=1: can reach any value in [0, 1) ... and 0
        let mut m = Machine::with_states(1, 1);
        m.add_additive(0, &[-1], 0);
        let from = Config::from_ints(0, &[1]);
        let zero = reach(&m, &from, &Config::from_ints(0, &[0]), CvassOptions::default()).unwrap();
        assert_eq!(run(&m, &from, zero.witness().unwrap()).unwrap(), Config::from_ints(0, &[0]));
        let half = reach(&m, &from, &Config::new(0, vec![rat(1, 2)]), CvassOptions::default()).unwrap();
        assert!(half.witness().is_some());
        assert_eq!(reach(&m, &from, &Config::from_ints(0, &[2]), CvassOptions::default()).unwrap(), ReachOutcome::No);
    }

    #[test]
    fn transfers_between_counters() {
        let mut m = Machine::with_states(2, 1);
        m.add_additive(0, &[1, 0], 0);
        m.add_additive(0, &[-1, 1], 0);
        let from = Config::from_ints(0, &[0, 0]);
        for target in [ints(&[0, 4]), ints(&[1, 0]), vec![rat(7, 3), rat(1, 9)]] {
            let to = Config::new(0, target);
            let out = reach(&m, &from, &to, CvassOptions::default()).unwrap();
            assert_eq!(run(&m, &from, out.witness().unwrap()).unwrap(), to);
        }
    }

    #[test]
    fn cover_uses_the_sink_construction() {
        let mut m = Machine::with_states(2, 2);
        m.add_additive(0, &[1, 0], 0);
        m.add_additive(0, &[-1, 1], 1);
        let from = Config::from_ints(0, &[0, 0]);
        let out = cover(&m, &from, &Config::new(1, vec![int(3), rat(1, 2)]), CvassOptions::default()).unwrap();
        let end = run(&m, &from, out.witness().unwrap()).unwrap();
        assert!(end.state == 1 && end.values[0] >= int(3) && end.values[1] >= rat(1, 2));
        assert_eq!(cover(&m, &from, &Config::from_ints(1, &[0, 2]), CvassOptions::default()).unwrap(), ReachOutcome::No);
        assert!(cover(&m, &from, &Config::from_ints(1, &[0, 0]), CvassOptions::default()).unwrap().witness().is_some());
    }

    #[test]
    fn rejects_other_matrices() {
        let mut m = Machine::with_states(1, 1);
        m.add_affine(0, crate::matrix::Matrix::from_rows(&[vec![2]]).unwrap(), vec![int(0)], 0);
        let c = Config::from_ints(0, &[0]);
        assert_eq!(reach(&m, &c, &c, CvassOptions::default()), Err(CvassError::NotIdentity(0)));
    }
}
