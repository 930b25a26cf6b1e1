//! Bounded search for witnesses: enumerate transition paths up to a length
//! bound and ask the LRA solver for fractions along each. Works for any
//! machine, including negative matrices and zero tests, and is used as the
//! reference the decision procedures are checked against.

use std::collections::HashMap;

use num_traits::{One, Zero};

use crate::lra::{solve, Cmp, LinExpr, LinearSystem, LraResult};
use crate::model::{Action, Config, CounterSet, FiringSequence, Machine, Step};
use crate::num::Rational;
use crate::statereach::{check_non_negative, max_successor};

/// What the final configuration has to satisfy besides its state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Exact(Vec<Rational>),
    Cover(Vec<Rational>),
    StateOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleOptions {
    pub max_len: usize,
    /// Require every visited configuration to lie in `[0, 1]^d`.
    pub one_bounded: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { max_len: 8, one_bounded: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleOutcome {
    Witness(FiringSequence),
    NoWitnessWithin(usize),
}

impl OracleOutcome {
    pub fn witness(&self) -> Option<&FiringSequence> {
        match self {
            OracleOutcome::Witness(w) => Some(w),
            OracleOutcome::NoWitnessWithin(_) => None,
        }
    }

    pub fn is_witness(&self) -> bool {
        self.witness().is_some()
    }
}

/// The constraint system for firing `path` from `start`: one fraction
/// variable per affine step, non-negativity of every intermediate vector,
/// zero tests as equalities, and optionally the target.
pub struct PathSystem {
    pub system: LinearSystem,
    /// Fraction variable of each step, `None` for zero tests.
    pub fraction_vars: Vec<Option<usize>>,
}

/// Builds the system, or `None` if `path` is not a path of the state graph
/// starting at `start.state`.
pub fn path_system(machine: &Machine, start: &Config, path: &[usize], target: Option<&Target>, one_bounded: bool) -> Option<PathSystem> {
    let mut system = LinearSystem::new();
    let mut fraction_vars = Vec::with_capacity(path.len());
    let mut cur: Vec<LinExpr> = start.values.iter().map(|x| LinExpr::constant(x.clone())).collect();
    let one = LinExpr::constant(Rational::one());
    let zero = LinExpr::zero();
    if one_bounded {
        for e in &cur {
            system.assert(e, Cmp::Le, &one);
        }
    }
    let mut state = start.state;
    for (i, &tid) in path.iter().enumerate() {
        let t = machine.transitions.get(tid)?;
        if t.from != state {
            return None;
        }
        state = t.to;
        match &t.action {
            Action::Affine { matrix, delta } => {
                let alpha = system.add_fraction_var(format!("alpha_{i}"));
                fraction_vars.push(Some(alpha));
                let mut next: Vec<LinExpr> = if matrix.is_identity() {
                    cur
                } else {
                    (0..machine.dim)
                        .map(|r| {
                            let mut e = LinExpr::zero();
                            for (k, c) in matrix.row(r).iter().enumerate() {
                                if *c != 0 {
                                    e.add_scaled(&cur[k], &Rational::from_integer((*c).into()));
                                }
                            }
                            e
                        })
                        .collect()
                };
                for (e, d) in next.iter_mut().zip(delta) {
                    e.add_term(alpha, d);
                }
                for (r, e) in next.iter().enumerate() {
                    if !delta[r].is_zero() || !matrix.is_identity() {
                        system.assert(e, Cmp::Ge, &zero);
                        if one_bounded {
                            system.assert(e, Cmp::Le, &one);
                        }
                    }
                }
                cur = next;
            }
            Action::ZeroTest { counter } => {
                fraction_vars.push(None);
                system.assert(&cur[*counter], Cmp::Eq, &zero);
            }
        }
    }
    match target {
        Some(Target::Exact(v)) => {
            for (e, x) in cur.iter().zip(v) {
                system.assert_const(e, Cmp::Eq, x.clone());
            }
        }
        Some(Target::Cover(v)) => {
            for (e, x) in cur.iter().zip(v) {
                system.assert_const(e, Cmp::Ge, x.clone());
            }
        }
        Some(Target::StateOnly) | None => {}
    }
    Some(PathSystem { system, fraction_vars })
}

fn sequence_from_model(path: &[usize], vars: &[Option<usize>], model: &[Rational]) -> FiringSequence {
    path.iter()
        .zip(vars)
        .map(|(&t, v)| Step::new(t, v.map_or_else(Rational::one, |v| model[v].clone())))
        .collect()
}

/// Fractions for `path` reaching the target, if any exist.
pub fn seq_feasible(machine: &Machine, start: &Config, path: &[usize], target: &Target, one_bounded: bool) -> Option<FiringSequence> {
    let ps = path_system(machine, start, path, Some(target), one_bounded)?;
    match solve(&ps.system) {
        LraResult::Sat(model) => Some(sequence_from_model(path, &ps.fraction_vars, &model)),
        LraResult::Unsat => None,
    }
}

/// Whether firing a path with some fractions can be decided from counter
/// supports alone: true for non-negative matrices without zero tests, where
/// small enough fractions realise the largest support at every step.
fn support_check_applies(machine: &Machine, opts: &OracleOptions) -> bool {
    !opts.one_bounded && check_non_negative(machine).is_ok()
}

/// For identity matrices the final vector depends only on how much mass
/// each transition gets, so a transition multiset whose totals cannot meet
/// the target rules out every ordering of it.
fn multiset_feasible(machine: &Machine, start: &Config, counts: &[usize], target: &Target) -> bool {
    let cmp = match target {
        Target::Exact(_) => Cmp::Eq,
        Target::Cover(_) => Cmp::Ge,
        Target::StateOnly => return true,
    };
    let (Target::Exact(goal) | Target::Cover(goal)) = target else { unreachable!() };
    let mut system = LinearSystem::new();
    let mut end: Vec<LinExpr> = start.values.iter().map(|x| LinExpr::constant(x.clone())).collect();
    for (t, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let mass = system.add_positive_var(format!("mass_t{t}"));
        system.assert_const(&LinExpr::var(mass), Cmp::Le, Rational::from_integer(c.into()));
        for (e, d) in end.iter_mut().zip(machine.transitions[t].delta().unwrap()) {
            e.add_term(mass, d);
        }
    }
    for (e, x) in end.iter().zip(goal) {
        system.assert_const(e, cmp, x.clone());
    }
    solve(&system).is_sat()
}

struct Node {
    path: Vec<usize>,
    state: usize,
    /// Largest support after the path, when supports decide fireability.
    support: Option<CounterSet>,
}

/// Shortest-first search; paths of equal length are tried in lexicographic
/// order of transition ids. Prefixes that cannot be fired at all, or cannot
/// reach `to_state` within the remaining length, are not extended.
pub fn bounded_decide(machine: &Machine, start: &Config, to_state: usize, target: &Target, opts: OracleOptions) -> OracleOutcome {
    let by_support = support_check_applies(machine, &opts);
    let commutative = !opts.one_bounded && machine.all_identity();
    let mut multisets: HashMap<Vec<usize>, bool> = HashMap::new();
    let dist = distances_to(machine, to_state);
    let mut frontier = vec![Node { path: Vec::new(), state: start.state, support: by_support.then(|| start.support()) }];
    for len in 0..=opts.max_len {
        let mut next = Vec::new();
        for node in frontier {
            let reached = node.state == to_state;
            if reached {
                let plausible = !commutative || {
                    let mut counts = vec![0; machine.transitions.len()];
                    for &t in &node.path {
                        counts[t] += 1;
                    }
                    *multisets.entry(counts).or_insert_with_key(|c| multiset_feasible(machine, start, c, target))
                };
                if plausible {
                    if let Some(w) = seq_feasible(machine, start, &node.path, target, opts.one_bounded) {
                        return OracleOutcome::Witness(w);
                    }
                }
            }
            if len == opts.max_len || (reached && *target == Target::StateOnly) {
                continue;
            }
            if node.support.is_none() {
                let ps = path_system(machine, start, &node.path, None, opts.one_bounded).expect("frontier paths are valid");
                if !solve(&ps.system).is_sat() {
                    continue;
                }
            }
            for t in machine.outgoing(node.state) {
                let to = machine.transitions[t].to;
                if dist[to].is_none_or(|d| len + 1 + d > opts.max_len) {
                    continue;
                }
                let support = match node.support {
                    Some(s) => match max_successor(machine, t, s) {
                        Some(s) => Some(s),
                        None => continue,
                    },
                    None => None,
                };
                let mut path = node.path.clone();
                path.push(t);
                next.push(Node { path, state: to, support });
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    OracleOutcome::NoWitnessWithin(opts.max_len)
}

/// Length of a shortest state-graph path from each state to `to`.
fn distances_to(machine: &Machine, to: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; machine.states.len()];
    dist[to] = Some(0);
    let mut queue = std::collections::VecDeque::from([to]);
    while let Some(s) = queue.pop_front() {
        let d = dist[s].unwrap();
        for t in &machine.transitions {
            if t.to == s && dist[t.from].is_none() {
                dist[t.from] = Some(d + 1);
                queue.push_back(t.from);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::model::run;
    use crate::num::{int, rat};

    #[test]
    fn fractions_are_found_for_a_fixed_path() {
        // q0 --(+1, 0)--> q0, q0 --(-1, +2)--> q1
        let mut m = Machine::with_states(2, 2);
        m.add_additive(0, &[1, 0], 0);
        m.add_additive(0, &[-1, 2], 1);
        let start = Config::from_ints(0, &[0, 0]);
        let target = Target::Exact(vec![rat(1, 2), int(1)]);
        let w = seq_feasible(&m, &start, &[0, 0, 1], &target, false).unwrap();
        assert_eq!(run(&m, &start, &w).unwrap(), Config::new(1, vec![rat(1, 2), int(1)]));
        // one firing of t0 can add at most 1, and t1 then needs 1/2 of it
        assert!(seq_feasible(&m, &start, &[0, 1], &Target::Exact(vec![int(1), int(1)]), false).is_none());
        assert!(seq_feasible(&m, &start, &[1], &target, false).is_none());
    }

    #[test]
    fn shortest_witness_wins() {
        let mut m = Machine::with_states(1, 2);
        m.add_additive(0, &[1], 0);
        m.add_additive(0, &[-1], 1);
        let start = Config::from_ints(0, &[0]);
        let out = bounded_decide(&m, &start, 1, &Target::StateOnly, OracleOptions::default());
        let w = out.witness().unwrap();
        assert_eq!(crate::model::path_of(w), vec![0, 1]);
        let out = bounded_decide(&m, &start, 1, &Target::Exact(vec![int(3)]), OracleOptions { max_len: 8, one_bounded: false });
        // three units need at least four t0 firings plus the final t1
        assert_eq!(crate::model::path_of(out.witness().unwrap()), vec![0, 0, 0, 0, 1]);
        let out = bounded_decide(&m, &start, 1, &Target::Exact(vec![int(3)]), OracleOptions { max_len: 4, one_bounded: false });
        assert_eq!(out, OracleOutcome::NoWitnessWithin(4));
    }

    #[test]
    fn zero_tests_and_one_boundedness() {
        let mut m = Machine::with_states(1, 3);
        m.add_zero_test(0, 0, 1);
        m.add_additive(1, &[1], 1);
        m.add_zero_test(1, 0, 2);
        let start = Config::from_ints(0, &[0]);
        let w = bounded_decide(&m, &start, 2, &Target::StateOnly, OracleOptions::default());
        assert_eq!(crate::model::path_of(w.witness().unwrap()), vec![0, 2]);
        let out = bounded_decide(&m, &start, 1, &Target::Cover(vec![rat(3, 2)]), OracleOptions { max_len: 6, one_bounded: true });
        assert_eq!(out, OracleOutcome::NoWitnessWithin(6));
        let out = bounded_decide(&m, &start, 1, &Target::Cover(vec![rat(3, 2)]), OracleOptions { max_len: 6, one_bounded: false });
        assert!(out.witness().is_some());
    }

    #[test]
    fn matrices_are_applied_symbolically() {
        // doubling then subtracting: x -> 2x - alpha
        let mut m = Machine::with_states(1, 1);
        m.add_affine(0, Matrix::from_rows(&[vec![2]]).unwrap(), vec![int(-1)], 0);
        let start = Config::from_ints(0, &[1]);
        let w = seq_feasible(&m, &start, &[0, 0], &Target::Exact(vec![int(2)]), false).unwrap();
        assert_eq!(run(&m, &start, &w).unwrap().values, vec![int(2)]);
        assert!(seq_feasible(&m, &start, &[0, 0], &Target::Exact(vec![int(4)]), false).is_none());
    }

    #[test]
    fn invalid_paths_are_rejected() {
        let mut m = Machine::with_states(1, 2);
        m.add_additive(1, &[1], 0);
        assert!(path_system(&m, &Config::from_ints(0, &[0]), &[0], None, false).is_none());
        assert!(path_system(&m, &Config::from_ints(0, &[0]), &[5], None, false).is_none());
    }
}
