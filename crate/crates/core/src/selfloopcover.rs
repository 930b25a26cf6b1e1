//! Coverability when every matrix is non-negative with a non-zero diagonal.
//!
//! Under such matrices a counter that is non-zero stays non-zero, so the
//! set of non-zero counters only grows along a run fired with small enough
//! fractions. A cycle at a state either pumps a counter (makes it as large
//! as wanted) or moves it additively; the additive part is a plain
//! continuous VASS problem. A covering run is split at the last visit of
//! each state into cycles at pairwise distinct states joined by single
//! steps, and each combination of cycle supports becomes one linear system.

use std::collections::{HashMap, VecDeque};

use num_traits::{One, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::cvass::{admissible, minimal_initial_supports, support_pump};
use crate::io::rational_to_json;
use crate::lra::{solve, Cmp, LinExpr, LinearSystem, LraResult};
use crate::model::{replay, scale_seq, Action, Config, CounterSet, FiringSequence, Machine, ModelError, ReplayError};
use crate::num::{floor_plus_one, min_positive, vec_ge, Rational};
use crate::statereach::max_successor;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelfLoopError {
    #[error("transition {0} is not a non-negative self-loop matrix")]
    NotSelfLoop(usize),
    #[error("machines with more than 64 counters are not supported")]
    TooManyCounters,
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub fn check_self_loop(machine: &Machine) -> Result<(), SelfLoopError> {
    if machine.dim > 64 {
        return Err(SelfLoopError::TooManyCounters);
    }
    for (id, t) in machine.transitions.iter().enumerate() {
        let ok = match &t.action {
            Action::ZeroTest { .. } => false,
            Action::Affine { matrix, .. } => {
                let n = matrix.dim();
                (0..n).all(|i| matrix.get(i, i) > 0 && (0..n).all(|j| matrix.get(i, j) >= 0))
            }
        };
        if !ok {
            return Err(SelfLoopError::NotSelfLoop(id));
        }
    }
    Ok(())
}

/// The continuous VASS on the counters of `kept`: identity matrices and the
/// deltas restricted to those counters, in increasing counter order.
pub fn project(machine: &Machine, kept: CounterSet) -> Machine {
    let counters: Vec<usize> = kept.iter().collect();
    let mut m = Machine::new(counters.len());
    m.states = machine.states.clone();
    for t in &machine.transitions {
        let delta: Vec<Rational> = match t.delta() {
            Some(d) => counters.iter().map(|&x| d[x].clone()).collect(),
            None => vec![Rational::zero(); counters.len()],
        };
        m.add_affine(t.from, crate::matrix::Matrix::identity(counters.len()), delta, t.to);
    }
    m
}

/// Re-indexes a set of original counters into the numbering of
/// [`project`], dropping those outside `kept`.
fn to_projected(kept: CounterSet, set: CounterSet) -> CounterSet {
    let mut out = CounterSet::EMPTY;
    for (i, x) in kept.iter().enumerate() {
        if set.contains(x) {
            out.insert(i);
        }
    }
    out
}

fn from_projected(kept: CounterSet, set: CounterSet) -> CounterSet {
    let mut out = CounterSet::EMPTY;
    for (i, x) in kept.iter().enumerate() {
        if set.contains(i) {
            out.insert(x);
        }
    }
    out
}

/// Counters pumped somewhere in a run: a step of `t` from `u` pumps `x` if
/// some `y` with `u(y) > 0` is in the pump support of `x` for `t`. Returns
/// per step the pumped counters.
pub fn pumped_per_step(machine: &Machine, start: &Config, seq: &FiringSequence) -> Result<Vec<CounterSet>, ReplayError> {
    let configs = replay(machine, start, seq)?;
    Ok(seq
        .iter()
        .zip(&configs)
        .map(|(s, before)| {
            let t = &machine.transitions[s.transition];
            let support = before.support();
            CounterSet::from_pred(machine.dim, |x| !support_pump(t, x).intersect(support).is_empty())
        })
        .collect())
}

/// The counters the pumping construction can raise for a cyclic run: pumped
/// by some step whose pump support meets the support of the final vector.
pub fn pumpable_targets(machine: &Machine, start: &Config, seq: &FiringSequence) -> Result<CounterSet, ReplayError> {
    let configs = replay(machine, start, seq)?;
    let end = configs.last().unwrap().support();
    let per_step = pumped_per_step(machine, start, seq)?;
    let mut out = CounterSet::EMPTY;
    for (s, pumped) in seq.iter().zip(per_step) {
        let t = &machine.transitions[s.transition];
        for x in pumped.iter() {
            if !support_pump(t, x).intersect(end).is_empty() {
                out.insert(x);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PumpError {
    #[error("the run does not return to its start state")]
    NotCyclic,
    #[error("counter {0} cannot be pumped by this run")]
    NotPumpable(usize),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

/// Half of `seq`, followed by `n` copies of `seq` scaled by `1/(2n)`. Every
/// such sequence ends at least at the end of `seq`; `n` is the first power
/// of two for which each counter of `pumped` ends above `bound`, and never
/// exceeds the first `n` with `n * m / 2 > bound`, where `m` is the least
/// non-zero final value of `seq`.
pub fn pump_sequence(machine: &Machine, start: &Config, seq: &FiringSequence, pumped: CounterSet, bound: &Rational) -> Result<FiringSequence, PumpError> {
    let configs = replay(machine, start, seq)?;
    let end = configs.last().unwrap();
    if end.state != start.state {
        return Err(PumpError::NotCyclic);
    }
    if pumped.is_empty() {
        return Ok(seq.clone());
    }
    let allowed = pumpable_targets(machine, start, seq)?;
    if let Some(x) = pumped.minus(allowed).iter().next() {
        return Err(PumpError::NotPumpable(x));
    }
    let least = min_positive(&end.values).expect("a pumpable counter implies a non-zero end value");
    let two = Rational::from_integer(2.into());
    let cap = floor_plus_one(&(&two * bound / &least));
    let half = scale_seq(seq, &Rational::new(1.into(), 2.into()));
    let mut n = num_bigint::BigInt::one();
    loop {
        if n > cap {
            n = cap.clone();
        }
        let mut candidate = half.clone();
        let part = scale_seq(seq, &Rational::new(1.into(), &n * 2));
        let copies: usize = (&n).try_into().expect("pumping count fits in memory");
        for _ in 0..copies {
            candidate.extend(part.iter().cloned());
        }
        let reached = replay(machine, start, &candidate)?;
        let w = &reached.last().unwrap().values;
        debug_assert!(vec_ge(w, &end.values));
        if pumped.iter().all(|x| &w[x] > bound) {
            return Ok(candidate);
        }
        assert!(n < cap, "pumping bound did not suffice");
        n *= 2;
    }
}

/// Largest set of counters that can become non-zero by repeatedly firing
/// the transitions of `set` from support `initial`.
pub fn support_closure(machine: &Machine, initial: CounterSet, set: &[usize]) -> CounterSet {
    let mut cur = initial;
    loop {
        let mut next = cur;
        for &t in set {
            let tr = &machine.transitions[t];
            let m = tr.matrix().unwrap();
            next = next.union(tr.incremented());
            next = next.union(CounterSet::from_pred(machine.dim, |x| cur.iter().any(|y| m.get(x, y) > 0)));
        }
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

/// A closed walk at a state that uses exactly a given transition set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CyclicWalk {
    pub walk: Vec<usize>,
    /// Counters that repeated firing can make non-zero.
    pub closure: CounterSet,
    /// Counters pumped once the closure is reached.
    pub pumped: CounterSet,
}

/// Searches a closed walk at `anchor` using every transition of `set` that
/// can be fired from a vector with support `initial`. Exact for
/// non-negative self-loop matrices, where the largest support reachable
/// along a fixed walk is obtained with small fractions and only grows.
pub fn cyclic_walk(machine: &Machine, anchor: usize, initial: CounterSet, set: &[usize]) -> Option<CyclicWalk> {
    assert!(set.len() <= 64);
    if set.is_empty() {
        return None;
    }
    let full: u64 = if set.len() == 64 { u64::MAX } else { (1 << set.len()) - 1 };
    type Node = (usize, CounterSet, u64);
    let origin: Node = (anchor, initial, 0);
    let mut parent: HashMap<Node, Option<(Node, usize)>> = HashMap::from([(origin, None)]);
    let mut queue = VecDeque::from([origin]);
    while let Some(node) = queue.pop_front() {
        let (state, support, used) = node;
        if state == anchor && used == full {
            let mut walk = Vec::new();
            let mut cur = node;
            while let Some((prev, t)) = parent[&cur] {
                walk.push(t);
                cur = prev;
            }
            walk.reverse();
            let closure = support_closure(machine, initial, set);
            let pumped = CounterSet::from_pred(machine.dim, |x| set.iter().any(|&t| !support_pump(&machine.transitions[t], x).intersect(closure).is_empty()));
            return Some(CyclicWalk { walk, closure, pumped });
        }
        for (i, &t) in set.iter().enumerate() {
            let tr = &machine.transitions[t];
            if tr.from != state {
                continue;
            }
            let Some(next_support) = max_successor(machine, t, support) else { continue };
            let succ = (tr.to, next_support, used | 1 << i);
            if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(succ) {
                e.insert(Some((node, t)));
                queue.push_back(succ);
            }
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoverOptions {
    /// Largest number of transitions in a strongly connected part that is
    /// searched for cycle supports.
    pub support_cap: usize,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions { support_cap: 12 }
    }
}

/// The cycle taken at one state of the decomposition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleCertificate {
    pub state: usize,
    /// Counters assumed non-zero on arrival.
    pub initial_support: CounterSet,
    /// Transitions of the cycle; empty if the run does not loop here.
    pub transitions: Vec<usize>,
    pub walk: Vec<usize>,
    /// Counters that move additively in the cycle.
    pub additive: CounterSet,
    /// Additive counters required non-zero after the cycle.
    pub exit_support: CounterSet,
    /// Total fraction per cycle transition in the additive projection.
    pub flows: Vec<(usize, Rational)>,
    pub arrival: Vec<Rational>,
    /// Values reached after the cycle; pumped counters may be replaced by
    /// any value.
    pub departure: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverCertificate {
    pub cycles: Vec<CycleCertificate>,
    /// Transition and fraction of each single step between cycles.
    pub steps: Vec<(usize, Rational)>,
    pub system: LinearSystem,
}

impl CoverCertificate {
    pub fn to_json(&self, machine: &Machine) -> Value {
        let vec_json = |v: &[Rational]| Value::Array(v.iter().map(rational_to_json).collect());
        let cycles: Vec<Value> = self
            .cycles
            .iter()
            .map(|c| {
                json!({
                    "state": machine.states[c.state],
                    "initial_support": c.initial_support.iter().collect::<Vec<_>>(),
                    "transitions": c.transitions,
                    "walk": c.walk,
                    "additive_counters": c.additive.iter().collect::<Vec<_>>(),
                    "exit_support": c.exit_support.iter().collect::<Vec<_>>(),
                    "flows": c.flows.iter().map(|(t, x)| json!({"transition": t, "mass": rational_to_json(x)})).collect::<Vec<_>>(),
                    "arrival": vec_json(&c.arrival),
                    "departure": vec_json(&c.departure),
                })
            })
            .collect();
        let steps: Vec<Value> = self.steps.iter().map(|(t, a)| json!({"transition": t, "fraction": rational_to_json(a)})).collect();
        json!({ "cycles": cycles, "steps": steps })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CoverOutcome {
    Yes(Box<CoverCertificate>),
    No,
    /// Some strongly connected part exceeded the support cap.
    Unknown,
}

impl CoverOutcome {
    pub fn is_yes(&self) -> bool {
        matches!(self, CoverOutcome::Yes(_))
    }
}

/// One way to loop at a state: the cycle's transitions, what it pumps, and
/// which additive exit supports make its projection feasible.
#[derive(Clone, Debug)]
struct CycleOption {
    set: Vec<usize>,
    walk: Vec<usize>,
    additive: CounterSet,
    exit_supports: Vec<CounterSet>,
}

struct Planner<'a> {
    machine: &'a Machine,
    opts: CoverOptions,
    /// Transitions with both ends in the strongly connected part of a state.
    local: Vec<Vec<usize>>,
    cache: HashMap<(usize, CounterSet), Vec<CycleOption>>,
    capped: bool,
}

impl<'a> Planner<'a> {
    fn new(machine: &'a Machine, opts: CoverOptions) -> Self {
        let reach: Vec<Vec<bool>> = (0..machine.states.len()).map(|s| machine.graph_reachable(s, |_| true)).collect();
        let local = (0..machine.states.len())
            .map(|p| {
                let same = |q: usize| reach[p][q] && reach[q][p];
                (0..machine.transitions.len()).filter(|&t| same(machine.transitions[t].from) && same(machine.transitions[t].to)).collect()
            })
            .collect();
        Planner { machine, opts, local, cache: HashMap::new(), capped: false }
    }

    fn options(&mut self, state: usize, initial: CounterSet) -> Vec<CycleOption> {
        if let Some(o) = self.cache.get(&(state, initial)) {
            return o.clone();
        }
        let machine = self.machine;
        let mut out = vec![CycleOption { set: Vec::new(), walk: Vec::new(), additive: CounterSet::full(machine.dim), exit_supports: vec![CounterSet::EMPTY] }];
        let local = self.local[state].clone();
        if local.len() > self.opts.support_cap {
            self.capped = true;
        } else {
            for mask in 1u64..1 << local.len() {
                let set: Vec<usize> = local.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &t)| t).collect();
                let Some(cw) = cyclic_walk(machine, state, initial, &set) else { continue };
                let additive = CounterSet::full(machine.dim).minus(cw.pumped);
                let projected = project(machine, additive);
                if admissible(&projected, state, to_projected(additive, initial), &set, CounterSet::EMPTY, state).is_none() {
                    continue;
                }
                let exit_supports = minimal_initial_supports(&projected.reversed(), state, &set, CounterSet::EMPTY, state)
                    .into_iter()
                    .map(|s| from_projected(additive, s))
                    .collect();
                out.push(CycleOption { set, walk: cw.walk, additive, exit_supports });
            }
        }
        out.sort_by_key(|o| o.set.len());
        self.cache.insert((state, initial), out.clone());
        out
    }
}

/// Simple state sequences from `from` to `to` joined by transitions, shortest
/// first: each is a list of states and the transitions between them.
fn state_chains(machine: &Machine, from: usize, to: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    let mut stack = vec![(vec![from], Vec::new())];
    while let Some((states, steps)) = stack.pop() {
        let last = *states.last().unwrap();
        if last == to {
            out.push((states, steps));
            continue;
        }
        for t in machine.outgoing(last) {
            let next = machine.transitions[t].to;
            if !states.contains(&next) {
                let mut s = states.clone();
                s.push(next);
                let mut st: Vec<usize> = steps.clone();
                st.push(t);
                stack.push((s, st));
            }
        }
    }
    out.sort_by(|a, b| (a.0.len(), &a.1).cmp(&(b.0.len(), &b.1)));
    out
}

struct Choice {
    initial: CounterSet,
    cycle: CycleOption,
    exit_support: CounterSet,
}

/// Decides whether `from` covers `to`.
pub fn cover(machine: &Machine, from: &Config, to: &Config, opts: CoverOptions) -> Result<CoverOutcome, SelfLoopError> {
    machine.validate()?;
    machine.check_config(from)?;
    machine.check_config(to)?;
    check_self_loop(machine)?;
    let mut planner = Planner::new(machine, opts);
    for (states, steps) in state_chains(machine, from.state, to.state) {
        if let Some(cert) = search_chain(&mut planner, from, to, &states, &steps) {
            return Ok(CoverOutcome::Yes(Box::new(cert)));
        }
    }
    Ok(if planner.capped { CoverOutcome::Unknown } else { CoverOutcome::No })
}

/// Whether `state(start)` covers `state(target)` using only cycles at
/// `state`.
pub fn cyclic_cover(machine: &Machine, state: usize, start: &[Rational], target: &[Rational], opts: CoverOptions) -> Result<CoverOutcome, SelfLoopError> {
    let from = Config::new(state, start.to_vec());
    let to = Config::new(state, target.to_vec());
    machine.validate()?;
    machine.check_config(&from)?;
    machine.check_config(&to)?;
    check_self_loop(machine)?;
    let mut planner = Planner::new(machine, opts);
    Ok(match search_chain(&mut planner, &from, &to, &[state], &[]) {
        Some(cert) => CoverOutcome::Yes(Box::new(cert)),
        None if planner.capped => CoverOutcome::Unknown,
        None => CoverOutcome::No,
    })
}

fn search_chain(planner: &mut Planner, from: &Config, to: &Config, states: &[usize], steps: &[usize]) -> Option<CoverCertificate> {
    let dim = planner.machine.dim;
    let mut picked: Vec<Choice> = Vec::new();
    search_segment(planner, from, to, states, steps, &mut picked, dim)
}

fn search_segment(planner: &mut Planner, from: &Config, to: &Config, states: &[usize], steps: &[usize], picked: &mut Vec<Choice>, dim: usize) -> Option<CoverCertificate> {
    let i = picked.len();
    if i == states.len() {
        return solve_chain(planner.machine, from, to, states, steps, picked);
    }
    let initials: Vec<CounterSet> = if i == 0 {
        vec![from.support()]
    } else {
        let mut all: Vec<CounterSet> = (0u64..1 << dim).map(CounterSet).collect();
        all.sort_by_key(|s| (s.len(), s.0));
        all
    };
    for initial in initials {
        for cycle in planner.options(states[i], initial) {
            for &exit_support in &cycle.exit_supports {
                picked.push(Choice { initial, cycle: cycle.clone(), exit_support });
                if let Some(c) = search_segment(planner, from, to, states, steps, picked, dim) {
                    return Some(c);
                }
                picked.pop();
            }
        }
    }
    None
}

fn solve_chain(machine: &Machine, from: &Config, to: &Config, states: &[usize], steps: &[usize], picked: &[Choice]) -> Option<CoverCertificate> {
    let dim = machine.dim;
    let mut system = LinearSystem::new();
    let zero = LinExpr::zero();
    let mut arrival: Vec<LinExpr> = from.values.iter().map(|x| LinExpr::constant(x.clone())).collect();
    let mut arrivals = Vec::new();
    let mut departures = Vec::new();
    let mut flow_vars = Vec::new();
    let mut step_vars = Vec::new();
    for (i, choice) in picked.iter().enumerate() {
        for x in choice.initial.iter() {
            system.assert(&arrival[x], Cmp::Gt, &zero);
        }
        let mut after = arrival.clone();
        let mut flows = Vec::new();
        for &t in &choice.cycle.set {
            let v = system.add_positive_var(format!("flow{i}_t{t}"));
            flows.push((t, v));
            for x in choice.cycle.additive.iter() {
                after[x].add_term(v, &machine.transitions[t].delta().unwrap()[x]);
            }
        }
        let departure: Vec<LinExpr> = (0..dim)
            .map(|x| {
                if choice.cycle.additive.contains(x) {
                    after[x].clone()
                } else {
                    LinExpr::var(system.add_nonneg_var(format!("pumped{i}_x{x}")))
                }
            })
            .collect();
        for x in choice.cycle.additive.iter() {
            let cmp = if choice.exit_support.contains(x) { Cmp::Gt } else { Cmp::Ge };
            system.assert(&departure[x], cmp, &zero);
        }
        arrivals.push(arrival.clone());
        departures.push(departure.clone());
        flow_vars.push(flows);
        if i + 1 < states.len() {
            let t = &machine.transitions[steps[i]];
            let alpha = system.add_fraction_var(format!("step{i}"));
            step_vars.push(alpha);
            let matrix = t.matrix().unwrap();
            arrival = (0..dim)
                .map(|r| {
                    let mut e = LinExpr::zero();
                    for (k, c) in matrix.row(r).iter().enumerate() {
                        if *c != 0 {
                            e.add_scaled(&departure[k], &Rational::from_integer((*c).into()));
                        }
                    }
                    e.add_term(alpha, &t.delta().unwrap()[r]);
                    e
                })
                .collect();
            for e in &arrival {
                system.assert(e, Cmp::Ge, &zero);
            }
        }
    }
    for (e, x) in departures.last().unwrap().iter().zip(&to.values) {
        system.assert_const(e, Cmp::Ge, x.clone());
    }
    let LraResult::Sat(model) = solve(&system) else { return None };
    let eval = |v: &[LinExpr]| v.iter().map(|e| e.eval(&model)).collect::<Vec<_>>();
    let cycles = picked
        .iter()
        .enumerate()
        .map(|(i, c)| CycleCertificate {
            state: states[i],
            initial_support: c.initial,
            transitions: c.cycle.set.clone(),
            walk: c.cycle.walk.clone(),
            additive: c.cycle.additive,
            exit_support: c.exit_support,
            flows: flow_vars[i].iter().map(|&(t, v)| (t, model[v].clone())).collect(),
            arrival: eval(&arrivals[i]),
            departure: eval(&departures[i]),
        })
        .collect();
    let steps = steps.iter().zip(&step_vars).map(|(&t, &v)| (t, model[v].clone())).collect();
    Some(CoverCertificate { cycles, steps, system })
}
