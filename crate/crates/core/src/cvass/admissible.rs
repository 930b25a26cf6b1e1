//! Admissible orderings of a transition set: an order in which the
//! transitions can be introduced along a walk from an anchor state so that
//! every decrement is backed by a counter that is already non-zero.

use std::collections::HashSet;

use num_traits::{One, Signed, Zero};

use crate::model::{step, Config, CounterSet, FiringSequence, Machine, Step, Transition};
use crate::num::Rational;
use crate::statereach::{safe_fraction, support_minus};

/// Counters `y` through which `t` can raise `x` above its own value: an
/// off-diagonal positive entry `A(x, y)` or a diagonal entry above one.
pub fn support_pump(t: &Transition, x: usize) -> CounterSet {
    let m = t.matrix().expect("affine transition");
    CounterSet::from_pred(m.dim(), |y| if y == x { m.get(x, y) > 1 } else { m.get(x, y) > 0 })
}

/// Counters that some transition of `set` can pump, given that the counters
/// in `available` are non-zero.
pub fn pumpable(machine: &Machine, set: &[usize], available: CounterSet) -> CounterSet {
    CounterSet::from_pred(machine.dim, |y| set.iter().any(|&r| !support_pump(&machine.transitions[r], y).intersect(available).is_empty()))
}

fn increments(machine: &Machine, set: &[usize]) -> CounterSet {
    set.iter().fold(CounterSet::EMPTY, |acc, &t| acc.union(machine.transitions[t].incremented()))
}

/// Searches an order of `set` (transition ids) such that
/// - the first transition leaves `anchor`,
/// - every later transition is reachable from the target of each earlier one
///   using only transitions placed before it,
/// - the target of the last one reaches `end` within `set`,
/// - each decremented counter is fed by `initial` or an earlier increment,
/// - every counter in `pumped` can be pumped by some transition of `set`.
///
/// An empty set is admissible iff `anchor == end` and nothing is pumped.
pub fn admissible(machine: &Machine, anchor: usize, initial: CounterSet, set: &[usize], pumped: CounterSet, end: usize) -> Option<Vec<usize>> {
    assert!(set.len() <= 64, "transition sets are limited to 64 elements");
    if set.is_empty() {
        return (anchor == end && pumped.is_empty()).then(Vec::new);
    }
    let available = initial.union(increments(machine, set));
    if !pumped.is_subset(pumpable(machine, set, available)) {
        return None;
    }
    let mut search = OrderSearch { machine, set, anchor, initial, end, failed: HashSet::new(), order: Vec::new() };
    search.extend(0).then_some(search.order)
}

struct OrderSearch<'a> {
    machine: &'a Machine,
    set: &'a [usize],
    anchor: usize,
    initial: CounterSet,
    end: usize,
    failed: HashSet<u64>,
    order: Vec<usize>,
}

impl OrderSearch<'_> {
    fn allowed(&self, mask: u64) -> impl Fn(usize) -> bool + '_ {
        move |t| self.set.iter().position(|&s| s == t).is_some_and(|i| mask >> i & 1 == 1)
    }

    fn extend(&mut self, mask: u64) -> bool {
        let full = if self.set.len() == 64 { u64::MAX } else { (1u64 << self.set.len()) - 1 };
        if mask == full {
            let last = self.machine.transitions[*self.order.last().unwrap()].to;
            return self.machine.graph_reachable(last, self.allowed(mask))[self.end];
        }
        if self.failed.contains(&mask) {
            return false;
        }
        let fed = self.order.iter().fold(self.initial, |acc, &t| acc.union(self.machine.transitions[t].incremented()));
        let reach_from_chosen: Vec<Vec<bool>> = self
            .order
            .iter()
            .map(|&t| self.machine.graph_reachable(self.machine.transitions[t].to, self.allowed(mask)))
            .collect();
        for (i, &t) in self.set.iter().enumerate() {
            if mask >> i & 1 == 1 {
                continue;
            }
            let tr = &self.machine.transitions[t];
            let placed_ok = if self.order.is_empty() { tr.from == self.anchor } else { reach_from_chosen.iter().all(|r| r[tr.from]) };
            if !placed_ok {
                continue;
            }
            if !tr.decremented().iter().all(|x| !support_minus(tr, x).intersect(fed).is_empty()) {
                continue;
            }
            self.order.push(t);
            if self.extend(mask | 1 << i) {
                return true;
            }
            self.order.pop();
        }
        self.failed.insert(mask);
        false
    }
}

/// The walk that introduces the transitions of `order` one by one: from
/// `anchor`, shortest connecting paths over already introduced transitions,
/// then a shortest path to `end` over the whole set.
pub fn admissible_walk(machine: &Machine, anchor: usize, order: &[usize], end: usize) -> Vec<usize> {
    let mut walk = Vec::new();
    let mut cur = anchor;
    let mut introduced: Vec<usize> = Vec::new();
    for &t in order {
        let tr = &machine.transitions[t];
        let link = machine.graph_path(cur, tr.from, |s| introduced.contains(&s)).expect("order is admissible");
        walk.extend(link);
        walk.push(t);
        introduced.push(t);
        cur = tr.to;
    }
    walk.extend(machine.graph_path(cur, end, |s| order.contains(&s)).expect("order is admissible"));
    walk
}

/// Fires the admissible walk from `start`: first with fractions small enough
/// to keep every counter that becomes non-zero non-zero, then, if counters
/// are to be pumped, a second pass with a uniform tiny fraction. Returns
/// `None` if some step cannot be fired, which does not happen for
/// non-negative self-loop matrices and admissible orders.
pub fn build_admissible_run(machine: &Machine, anchor: usize, order: &[usize], start: &[Rational], pumped: CounterSet, end: usize) -> Option<FiringSequence> {
    let walk = admissible_walk(machine, anchor, order, end);
    let mut cfg = Config::new(anchor, start.to_vec());
    let mut seq = Vec::new();
    for &t in &walk {
        let s = Step::new(t, safe_fraction(machine, t, &cfg.values));
        if !s.fraction.is_positive() {
            return None;
        }
        cfg = step(machine, &cfg, &s).ok()?;
        seq.push(s);
    }
    if !pumped.is_empty() && !walk.is_empty() {
        let max_dec = walk
            .iter()
            .flat_map(|&t| machine.transitions[t].delta().unwrap().iter().filter(|d| d.is_negative()).map(|d| d.abs()))
            .max()
            .unwrap_or_else(Rational::zero);
        let mut eps = Rational::one();
        if !max_dec.is_zero() {
            let len = Rational::from_integer((2 * walk.len()).into());
            for x in cfg.values.iter().filter(|x| x.is_positive()) {
                let bound = x / (&len * &max_dec);
                if bound < eps {
                    eps = bound;
                }
            }
        }
        for &t in &walk {
            let s = Step::new(t, eps.clone());
            cfg = step(machine, &cfg, &s).ok()?;
            seq.push(s);
        }
    }
    Some(seq)
}

/// Minimal sets `U` of initially non-zero counters for which
/// [`admissible`] succeeds, in order of size then bitmask.
pub fn minimal_initial_supports(machine: &Machine, anchor: usize, set: &[usize], pumped: CounterSet, end: usize) -> Vec<CounterSet> {
    let mut relevant = CounterSet::EMPTY;
    for &t in set {
        let tr = &machine.transitions[t];
        for x in tr.decremented().iter() {
            relevant = relevant.union(support_minus(tr, x));
        }
        for y in pumped.iter() {
            relevant = relevant.union(support_pump(tr, y));
        }
    }
    let members: Vec<usize> = relevant.iter().collect();
    let mut subsets: Vec<CounterSet> = (0u64..1 << members.len())
        .map(|bits| CounterSet::from_pred(machine.dim, |x| members.iter().position(|&m| m == x).is_some_and(|i| bits >> i & 1 == 1)))
        .collect();
    subsets.sort_by_key(|s| (s.len(), s.0));
    let mut found: Vec<CounterSet> = Vec::new();
    for u in subsets {
        if found.iter().any(|f| f.is_subset(u)) {
            continue;
        }
        if admissible(machine, anchor, u, set, pumped, end).is_some() {
            found.push(u);
        }
    }
    found
}
