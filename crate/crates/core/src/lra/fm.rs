//! Fourier–Motzkin elimination. Exponential, so it is only used as an
//! independent cross-check on small systems.
//!
//! Equalities are substituted away first. Each strict inequality
//! `a.x < b` becomes `a.x + e <= b` for one shared slack `e` that must end
//! up positive, so elimination only sees non-strict rows. Rows carry the
//! set of input rows they were combined from; after eliminating `k`
//! variables, a row built from more than `k + 1` inputs is redundant
//! (Chernikov's rule) and is dropped. Among rows with the same left-hand
//! side only the tightest is kept.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use super::{LinearSystem, Relation};
use crate::num::Rational;

/// Largest intermediate system before giving up.
const MAX_INEQUALITIES: usize = 4096;

/// `coeffs . (x, e) <= rhs`, built from the inputs in `history`.
#[derive(Clone, Debug)]
struct Ineq {
    coeffs: Vec<Rational>,
    rhs: Rational,
    history: u128,
}

/// Rows keyed by left-hand side. Rows without variables other than the
/// slack are set aside as bounds on it.
struct Pool {
    slack: usize,
    rows: BTreeMap<Vec<Rational>, Ineq>,
    /// `(c, d)` for `c * e <= d`.
    bounds: Vec<(Rational, Rational)>,
}

impl Pool {
    fn new(slack: usize) -> Self {
        Pool { slack, rows: BTreeMap::new(), bounds: Vec::new() }
    }

    fn insert(&mut self, mut ineq: Ineq) {
        let Some(lead) = ineq.coeffs[..self.slack].iter().find(|c| !c.is_zero()).map(|c| c.abs()) else {
            self.bounds.push((ineq.coeffs[self.slack].clone(), ineq.rhs));
            return;
        };
        for c in &mut ineq.coeffs {
            *c /= &lead;
        }
        ineq.rhs /= &lead;
        match self.rows.get(&ineq.coeffs) {
            Some(old) if old.rhs <= ineq.rhs => {}
            _ => {
                self.rows.insert(ineq.coeffs.clone(), ineq);
            }
        }
    }

    /// Whether some `e > 0` meets every bound.
    fn slack_feasible(&self) -> bool {
        let mut lower: Option<Rational> = None;
        let mut upper: Option<Rational> = None;
        for (c, d) in &self.bounds {
            if c.is_zero() {
                if d.is_negative() {
                    return false;
                }
            } else if c.is_positive() {
                let u = d / c;
                if upper.as_ref().map_or(true, |x| u < *x) {
                    upper = Some(u);
                }
            } else {
                let l = d / c;
                if lower.as_ref().map_or(true, |x| l > *x) {
                    lower = Some(l);
                }
            }
        }
        match (lower, upper) {
            (_, Some(u)) if !u.is_positive() => false,
            (Some(l), Some(u)) => l <= u,
            _ => true,
        }
    }
}

/// `row - (row[var] / pivot[var]) * pivot`, which clears `var`.
fn eliminate_with(row: &mut [Rational], rhs: &mut Rational, pivot: &[Rational], pivot_rhs: &Rational, var: usize) {
    if row[var].is_zero() {
        return;
    }
    let factor = &row[var] / &pivot[var];
    for (x, p) in row.iter_mut().zip(pivot) {
        *x -= &factor * p;
    }
    *rhs -= &factor * pivot_rhs;
}

/// Decides satisfiability by eliminating every variable. Returns `None` when
/// the intermediate system grows beyond the size limit or there are more
/// than 128 input inequalities.
pub fn fourier_motzkin(system: &LinearSystem) -> Option<bool> {
    let n = system.num_vars();
    let mut equalities: Vec<(Vec<Rational>, Rational)> = Vec::new();
    let mut inequalities: Vec<(Vec<Rational>, Rational)> = Vec::new();
    for c in system.constraints() {
        let mut row = vec![Rational::zero(); n + 1];
        for (x, k) in &c.coeffs {
            row[*x] = k.clone();
        }
        match c.relation {
            Relation::Eq => equalities.push((row, c.rhs.clone())),
            Relation::Le => inequalities.push((row, c.rhs.clone())),
            Relation::Lt => {
                row[n] = Rational::from_integer(1.into());
                inequalities.push((row, c.rhs.clone()));
            }
        }
    }
    if inequalities.len() > 128 {
        return None;
    }

    // Gaussian substitution of the equalities.
    while let Some((pivot, pivot_rhs)) = equalities.pop() {
        let Some(var) = pivot[..n].iter().position(|x| !x.is_zero()) else {
            if !pivot_rhs.is_zero() {
                return Some(false);
            }
            continue;
        };
        for (row, rhs) in &mut equalities {
            eliminate_with(row, rhs, &pivot, &pivot_rhs, var);
        }
        for (row, rhs) in &mut inequalities {
            eliminate_with(row, rhs, &pivot, &pivot_rhs, var);
        }
    }

    let mut pool = Pool::new(n);
    for (i, (coeffs, rhs)) in inequalities.into_iter().enumerate() {
        pool.insert(Ineq { coeffs, rhs, history: 1 << i });
    }
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut eliminated = 0u32;
    while !pool.rows.is_empty() {
        // the variable producing the fewest new rows
        let count = |var: usize| {
            let pos = pool.rows.values().filter(|r| r.coeffs[var].is_positive()).count();
            let neg = pool.rows.values().filter(|r| r.coeffs[var].is_negative()).count();
            pos * neg
        };
        let pick = (0..remaining.len()).min_by_key(|&i| count(remaining[i])).expect("rows mention a variable");
        let var = remaining.swap_remove(pick);
        eliminated += 1;
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        let mut next = Pool::new(n);
        next.bounds = std::mem::take(&mut pool.bounds);
        for ineq in std::mem::take(&mut pool.rows).into_values() {
            if ineq.coeffs[var].is_positive() {
                pos.push(ineq);
            } else if ineq.coeffs[var].is_negative() {
                neg.push(ineq);
            } else {
                next.insert(ineq);
            }
        }
        for p in &pos {
            for q in &neg {
                let history = p.history | q.history;
                if history.count_ones() > eliminated + 1 {
                    continue;
                }
                let a = p.coeffs[var].clone();
                let b = -q.coeffs[var].clone();
                let coeffs = p.coeffs.iter().zip(&q.coeffs).map(|(x, y)| x * &b + y * &a).collect();
                next.insert(Ineq { coeffs, rhs: &p.rhs * &b + &q.rhs * &a, history });
            }
        }
        if next.rows.len() > MAX_INEQUALITIES {
            return None;
        }
        pool = next;
    }
    Some(pool.slack_feasible())
}
