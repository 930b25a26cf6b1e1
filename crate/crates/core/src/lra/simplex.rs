//! General simplex over delta-rationals with Bland's rule. Strict bounds
//! `x < c` are represented as `x <= c - delta` for a symbolic infinitesimal
//! `delta`, which is instantiated once a feasible assignment is found.

use std::ops::{Add, Mul, Sub};

use num_traits::{One, Signed, Zero};

use super::{check_model, ground_constraints_hold, LinearSystem, LraResult, Relation};
use crate::num::Rational;

/// `real + delta * eps` for an infinitesimal `eps > 0`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct DeltaRat {
    real: Rational,
    delta: Rational,
}

impl DeltaRat {
    fn zero() -> Self {
        DeltaRat { real: Rational::zero(), delta: Rational::zero() }
    }

    fn new(real: Rational, delta: Rational) -> Self {
        DeltaRat { real, delta }
    }

    fn scale(&self, k: &Rational) -> DeltaRat {
        DeltaRat { real: &self.real * k, delta: &self.delta * k }
    }
}

impl Add for &DeltaRat {
    type Output = DeltaRat;
    fn add(self, o: &DeltaRat) -> DeltaRat {
        DeltaRat { real: &self.real + &o.real, delta: &self.delta + &o.delta }
    }
}

impl Sub for &DeltaRat {
    type Output = DeltaRat;
    fn sub(self, o: &DeltaRat) -> DeltaRat {
        DeltaRat { real: &self.real - &o.real, delta: &self.delta - &o.delta }
    }
}

impl Mul<&Rational> for &DeltaRat {
    type Output = DeltaRat;
    fn mul(self, k: &Rational) -> DeltaRat {
        self.scale(k)
    }
}

struct Tableau {
    /// `rows[r]` expresses basic variable `basic[r]` as a combination of the
    /// non-basic variables (dense over all variables).
    rows: Vec<Vec<Rational>>,
    basic: Vec<usize>,
    row_of: Vec<Option<usize>>,
    lower: Vec<Option<DeltaRat>>,
    upper: Vec<Option<DeltaRat>>,
    value: Vec<DeltaRat>,
}

enum Bound {
    Lower(DeltaRat),
    Upper(DeltaRat),
}

impl Tableau {
    /// Tightens a bound; returns false on an immediate conflict.
    fn tighten(&mut self, var: usize, bound: Bound) -> bool {
        match bound {
            Bound::Lower(b) => {
                if self.lower[var].as_ref().map_or(true, |l| b > *l) {
                    self.lower[var] = Some(b);
                }
            }
            Bound::Upper(b) => {
                if self.upper[var].as_ref().map_or(true, |u| b < *u) {
                    self.upper[var] = Some(b);
                }
            }
        }
        match (&self.lower[var], &self.upper[var]) {
            (Some(l), Some(u)) => l <= u,
            _ => true,
        }
    }

    fn below_lower(&self, var: usize) -> bool {
        self.lower[var].as_ref().is_some_and(|l| self.value[var] < *l)
    }

    fn above_upper(&self, var: usize) -> bool {
        self.upper[var].as_ref().is_some_and(|u| self.value[var] > *u)
    }

    fn can_increase(&self, var: usize) -> bool {
        self.upper[var].as_ref().map_or(true, |u| self.value[var] < *u)
    }

    fn can_decrease(&self, var: usize) -> bool {
        self.lower[var].as_ref().map_or(true, |l| self.value[var] > *l)
    }

    /// Sets basic variable in `row` to `target` by moving non-basic `entering`,
    /// then swaps their roles.
    fn pivot_and_update(&mut self, row: usize, entering: usize, target: DeltaRat) {
        let leaving = self.basic[row];
        let coeff = self.rows[row][entering].clone();
        let theta = (&target - &self.value[leaving]).scale(&(Rational::one() / &coeff));
        self.value[leaving] = target;
        self.value[entering] = &self.value[entering] + &theta;
        for r in 0..self.rows.len() {
            if r != row {
                let a = &self.rows[r][entering];
                if !a.is_zero() {
                    let b = self.basic[r];
                    self.value[b] = &self.value[b] + &(&theta * a);
                }
            }
        }
        self.pivot(row, entering);
    }

    fn pivot(&mut self, row: usize, entering: usize) {
        let leaving = self.basic[row];
        let n = self.value.len();
        // leaving = sum a_j x_j  =>  entering = (leaving - sum_{j != e} a_j x_j) / a_e
        let a_e = self.rows[row][entering].clone();
        let inv = Rational::one() / &a_e;
        let mut new_row = vec![Rational::zero(); n];
        for j in 0..n {
            if j != entering && !self.rows[row][j].is_zero() {
                new_row[j] = -(&self.rows[row][j] * &inv);
            }
        }
        new_row[leaving] = inv;
        for r in 0..self.rows.len() {
            if r == row {
                continue;
            }
            let factor = std::mem::take(&mut self.rows[r][entering]);
            if factor.is_zero() {
                continue;
            }
            for j in 0..n {
                if !new_row[j].is_zero() {
                    let add = &new_row[j] * &factor;
                    self.rows[r][j] += add;
                }
            }
        }
        self.rows[row] = new_row;
        self.basic[row] = entering;
        self.row_of[leaving] = None;
        self.row_of[entering] = Some(row);
    }

    /// Runs the simplex loop; returns true when a feasible assignment exists.
    fn check(&mut self) -> bool {
        loop {
            // Bland's rule: smallest violating basic variable.
            let mut candidate: Option<(usize, usize)> = None;
            for (r, &b) in self.basic.iter().enumerate() {
                if (self.below_lower(b) || self.above_upper(b)) && candidate.map_or(true, |(_, cb)| b < cb) {
                    candidate = Some((r, b));
                }
            }
            let Some((row, var)) = candidate else {
                return true;
            };
            let increase = self.below_lower(var);
            let mut entering = None;
            for j in 0..self.value.len() {
                if self.row_of[j].is_some() {
                    continue;
                }
                let a = &self.rows[row][j];
                if a.is_zero() {
                    continue;
                }
                let ok = if increase == a.is_positive() { self.can_increase(j) } else { self.can_decrease(j) };
                if ok {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return false;
            };
            let target = if increase { self.lower[var].clone().unwrap() } else { self.upper[var].clone().unwrap() };
            self.pivot_and_update(row, j, target);
        }
    }

    /// Picks a concrete positive value for the infinitesimal that keeps every
    /// bound satisfied.
    fn concrete_delta(&self) -> Rational {
        let mut eps = Rational::one();
        let mut restrict = |lo: &DeltaRat, hi: &DeltaRat| {
            // need lo.real + lo.delta*eps <= hi.real + hi.delta*eps
            if lo.real < hi.real && lo.delta > hi.delta {
                let bound = (&hi.real - &lo.real) / (&lo.delta - &hi.delta);
                if bound < eps {
                    eps = bound;
                }
            }
        };
        for v in 0..self.value.len() {
            if let Some(l) = &self.lower[v] {
                restrict(l, &self.value[v]);
            }
            if let Some(u) = &self.upper[v] {
                restrict(&self.value[v], u);
            }
        }
        eps
    }
}

/// Decides satisfiability; a returned model is always verified by exact
/// substitution.
pub fn solve(system: &LinearSystem) -> LraResult {
    if !ground_constraints_hold(system) {
        return LraResult::Unsat;
    }
    let n_orig = system.num_vars();
    let multi: Vec<_> = system.constraints().iter().filter(|c| c.coeffs.len() > 1).collect();
    let n = n_orig + multi.len();
    let mut t = Tableau {
        rows: Vec::with_capacity(multi.len()),
        basic: Vec::with_capacity(multi.len()),
        row_of: vec![None; n],
        lower: vec![None; n],
        upper: vec![None; n],
        value: vec![DeltaRat::zero(); n],
    };
    let bounds_for = |relation: Relation, rhs: &Rational, positive: bool| -> Vec<Bound> {
        let strict = DeltaRat::new(rhs.clone(), if positive { -Rational::one() } else { Rational::one() });
        let exact = DeltaRat::new(rhs.clone(), Rational::zero());
        match (relation, positive) {
            (Relation::Eq, _) => vec![Bound::Lower(exact.clone()), Bound::Upper(exact)],
            (Relation::Le, true) => vec![Bound::Upper(exact)],
            (Relation::Le, false) => vec![Bound::Lower(exact)],
            (Relation::Lt, true) => vec![Bound::Upper(strict)],
            (Relation::Lt, false) => vec![Bound::Lower(strict)],
        }
    };
    for c in system.constraints().iter().filter(|c| c.coeffs.len() == 1) {
        let (v, coeff) = &c.coeffs[0];
        let rhs = &c.rhs / coeff;
        for b in bounds_for(c.relation, &rhs, coeff.is_positive()) {
            if !t.tighten(*v, b) {
                return LraResult::Unsat;
            }
        }
    }
    for (r, c) in multi.iter().enumerate() {
        let slack = n_orig + r;
        let mut row = vec![Rational::zero(); n];
        for (v, coeff) in &c.coeffs {
            row[*v] = coeff.clone();
        }
        t.rows.push(row);
        t.basic.push(slack);
        t.row_of[slack] = Some(r);
        for b in bounds_for(c.relation, &c.rhs, true) {
            if !t.tighten(slack, b) {
                return LraResult::Unsat;
            }
        }
    }
    for v in 0..n_orig {
        t.value[v] = t.lower[v].clone().or_else(|| t.upper[v].clone()).unwrap_or_else(DeltaRat::zero);
    }
    for r in 0..t.rows.len() {
        let mut acc = DeltaRat::zero();
        for v in 0..n_orig {
            if !t.rows[r][v].is_zero() {
                acc = &acc + &(&t.value[v] * &t.rows[r][v]);
            }
        }
        let b = t.basic[r];
        t.value[b] = acc;
    }
    if !t.check() {
        return LraResult::Unsat;
    }
    let eps = t.concrete_delta();
    let model: Vec<Rational> = t.value[..n_orig].iter().map(|v| &v.real + &v.delta * &eps).collect();
    assert!(check_model(system, &model), "simplex produced a model that fails substitution");
    LraResult::Sat(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_rationals_order_lexicographically() {
        let a = DeltaRat::new(Rational::one(), -Rational::one());
        let b = DeltaRat::new(Rational::one(), Rational::zero());
        let c = DeltaRat::new(Rational::zero(), Rational::from_integer(100.into()));
        assert!(a < b);
        assert!(c < a);
    }
}
