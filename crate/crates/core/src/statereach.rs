//! State reachability for non-negative matrices through the support
//! abstraction: a graph over (state, set of non-zero counters).

use std::collections::{HashMap, VecDeque};

use num_traits::{One, Signed};
use thiserror::Error;

use crate::model::{step, Action, Config, CounterSet, FiringSequence, Machine, Step};
use crate::num::Rational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StateReachError {
    #[error("transition {0} has a negative matrix entry")]
    NegativeMatrix(usize),
    #[error("transition {0} is a zero test")]
    ZeroTest(usize),
    #[error("machines with more than 64 counters are not supported")]
    TooManyCounters,
}

/// Counters `y` with `A(x, y) > 0`: the ones whose value flows into `x`.
pub fn support_minus(t: &crate::model::Transition, x: usize) -> CounterSet {
    let m = t.matrix().expect("affine transition");
    CounterSet::from_pred(m.dim(), |y| m.get(x, y) > 0)
}

/// Whether `(state, from) --t--> (t.to, to)` is an edge of the abstraction.
pub fn abstract_edge(machine: &Machine, t: usize, from: CounterSet, to: CounterSet) -> bool {
    let tr = &machine.transitions[t];
    let inc = tr.incremented();
    let dec = tr.decremented();
    let fed = |x: usize| !support_minus(tr, x).intersect(from).is_empty();
    dec.iter().all(fed) && inc.is_subset(to) && to.iter().all(|x| inc.contains(x) || fed(x))
}

/// The largest support reachable through `t` from support `from`, or `None`
/// if `t` has no abstract edge from it. Every other successor is a subset.
pub fn max_successor(machine: &Machine, t: usize, from: CounterSet) -> Option<CounterSet> {
    let tr = &machine.transitions[t];
    let fed = CounterSet::from_pred(machine.dim, |x| !support_minus(tr, x).intersect(from).is_empty());
    if !tr.decremented().is_subset(fed) {
        return None;
    }
    Some(fed.union(tr.incremented()))
}

pub fn check_non_negative(machine: &Machine) -> Result<(), StateReachError> {
    if machine.dim > 64 {
        return Err(StateReachError::TooManyCounters);
    }
    for (id, t) in machine.transitions.iter().enumerate() {
        match &t.action {
            Action::ZeroTest { .. } => return Err(StateReachError::ZeroTest(id)),
            Action::Affine { matrix, .. } => {
                if (0..matrix.dim()).any(|i| (0..matrix.dim()).any(|j| matrix.get(i, j) < 0)) {
                    return Err(StateReachError::NegativeMatrix(id));
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StateReachOutcome {
    Reachable {
        /// Transitions taken and the support after each.
        abstract_path: Vec<(usize, CounterSet)>,
        witness: FiringSequence,
    },
    Unreachable,
}

/// Breadth-first search from `(start.state, supp(start))`; transitions are
/// expanded in id order, so the abstract path found is a shortest one.
pub fn abstract_search(machine: &Machine, start: &Config, to_state: usize) -> Result<Option<Vec<(usize, CounterSet)>>, StateReachError> {
    check_non_negative(machine)?;
    let origin = (start.state, start.support());
    let mut parent: HashMap<(usize, CounterSet), Option<((usize, CounterSet), usize)>> = HashMap::new();
    parent.insert(origin, None);
    let mut queue = VecDeque::from([origin]);
    while let Some(node) = queue.pop_front() {
        if node.0 == to_state {
            let mut path = Vec::new();
            let mut cur = node;
            while let Some((prev, t)) = parent[&cur] {
                path.push((t, cur.1));
                cur = prev;
            }
            path.reverse();
            return Ok(Some(path));
        }
        for t in machine.outgoing(node.0) {
            if let Some(s) = max_successor(machine, t, node.1) {
                let succ = (machine.transitions[t].to, s);
                if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(succ) {
                    e.insert(Some((node, t)));
                    queue.push_back(succ);
                }
            }
        }
    }
    Ok(None)
}

/// Largest fraction below which firing `t` keeps every counter it feeds
/// positive: half of `min (A u)(x) / |b(x)|` over decremented `x`, capped at
/// one.
pub fn safe_fraction(machine: &Machine, t: usize, values: &[Rational]) -> Rational {
    let tr = &machine.transitions[t];
    let delta = tr.delta().expect("affine transition");
    let image = tr.matrix().unwrap().apply(values);
    let mut alpha = Rational::one();
    for (x, d) in delta.iter().enumerate() {
        if d.is_negative() {
            let half = &image[x] / (d.abs() * Rational::from_integer(2.into()));
            if half < alpha {
                alpha = half;
            }
        }
    }
    alpha
}

/// Turns an abstract path into a concrete firing sequence whose supports
/// contain the abstract ones.
pub fn concretize(machine: &Machine, start: &Config, abstract_path: &[(usize, CounterSet)]) -> FiringSequence {
    let mut cfg = start.clone();
    let mut seq = Vec::with_capacity(abstract_path.len());
    for (t, support) in abstract_path {
        let alpha = safe_fraction(machine, *t, &cfg.values);
        let s = Step::new(*t, alpha);
        cfg = step(machine, &cfg, &s).expect("abstract edge must be concretizable");
        assert!(support.is_subset(cfg.support()), "concrete support lost a counter");
        seq.push(s);
    }
    seq
}

pub fn state_reach(machine: &Machine, start: &Config, to_state: usize) -> Result<StateReachOutcome, StateReachError> {
    Ok(match abstract_search(machine, start, to_state)? {
        Some(abstract_path) => {
            let witness = concretize(machine, start, &abstract_path);
            StateReachOutcome::Reachable { abstract_path, witness }
        }
        None => StateReachOutcome::Unreachable,
    })
}
