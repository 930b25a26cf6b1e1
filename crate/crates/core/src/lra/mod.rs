//! Linear real arithmetic: systems of linear constraints over rational
//! variables with `<=`, `<` and `=`, decided exactly.

mod fm;
mod simplex;
mod smt;

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use crate::num::Rational;

pub use fm::fourier_motzkin;
pub use simplex::solve;
pub use smt::to_smtlib;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Lt,
    Eq,
}

/// `sum(coeff * var) relation rhs`, with coefficients sorted by variable
/// and no zero coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub coeffs: Vec<(usize, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

impl Constraint {
    pub fn holds(&self, model: &[Rational]) -> bool {
        let lhs: Rational = self.coeffs.iter().map(|(v, c)| c * &model[*v]).sum();
        match self.relation {
            Relation::Le => lhs <= self.rhs,
            Relation::Lt => lhs < self.rhs,
            Relation::Eq => lhs == self.rhs,
        }
    }
}

/// Comparison used when asserting `lhs cmp rhs` between two expressions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Lt,
    Eq,
    Ge,
    Gt,
}

/// An affine expression `constant + sum(coeff * var)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinExpr {
    pub terms: BTreeMap<usize, Rational>,
    pub constant: Rational,
}

impl LinExpr {
    pub fn zero() -> Self {
        LinExpr::default()
    }

    pub fn constant(c: Rational) -> Self {
        LinExpr { terms: BTreeMap::new(), constant: c }
    }

    pub fn var(v: usize) -> Self {
        LinExpr::term(v, Rational::from_integer(1.into()))
    }

    pub fn term(v: usize, coeff: Rational) -> Self {
        let mut e = LinExpr::zero();
        e.add_term(v, &coeff);
        e
    }

    pub fn add_term(&mut self, v: usize, coeff: &Rational) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(v).or_insert_with(Rational::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(&v);
        }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, factor: &Rational) {
        if factor.is_zero() {
            return;
        }
        for (v, c) in &other.terms {
            self.add_term(*v, &(c * factor));
        }
        self.constant += &other.constant * factor;
    }

    pub fn plus(mut self, other: &LinExpr) -> LinExpr {
        self.add_scaled(other, &Rational::from_integer(1.into()));
        self
    }

    pub fn minus(mut self, other: &LinExpr) -> LinExpr {
        self.add_scaled(other, &Rational::from_integer((-1).into()));
        self
    }

    pub fn scaled(&self, factor: &Rational) -> LinExpr {
        let mut e = LinExpr::zero();
        e.add_scaled(self, factor);
        e
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, model: &[Rational]) -> Rational {
        let mut acc = self.constant.clone();
        for (v, c) in &self.terms {
            acc += c * &model[*v];
        }
        acc
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinearSystem {
    names: Vec<String>,
    constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LraResult {
    Sat(Vec<Rational>),
    Unsat,
}

impl LraResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, LraResult::Sat(_))
    }

    pub fn model(self) -> Option<Vec<Rational>> {
        match self {
            LraResult::Sat(m) => Some(m),
            LraResult::Unsat => None,
        }
    }
}

impl LinearSystem {
    pub fn new() -> Self {
        LinearSystem::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn push(&mut self, c: Constraint) {
        assert!(c.coeffs.iter().all(|(v, _)| *v < self.names.len()), "constraint mentions an undeclared variable");
        self.constraints.push(c);
    }

    /// Asserts `lhs cmp rhs`.
    pub fn assert(&mut self, lhs: &LinExpr, cmp: Cmp, rhs: &LinExpr) {
        let diff = lhs.clone().minus(rhs);
        let (expr, relation) = match cmp {
            Cmp::Le => (diff, Relation::Le),
            Cmp::Lt => (diff, Relation::Lt),
            Cmp::Eq => (diff, Relation::Eq),
            Cmp::Ge => (diff.scaled(&Rational::from_integer((-1).into())), Relation::Le),
            Cmp::Gt => (diff.scaled(&Rational::from_integer((-1).into())), Relation::Lt),
        };
        let coeffs = expr.terms.into_iter().collect();
        self.push(Constraint { coeffs, relation, rhs: -expr.constant });
    }

    pub fn assert_const(&mut self, lhs: &LinExpr, cmp: Cmp, rhs: Rational) {
        self.assert(lhs, cmp, &LinExpr::constant(rhs));
    }

    /// Adds a variable constrained to the fraction interval `(0, 1]`.
    pub fn add_fraction_var(&mut self, name: impl Into<String>) -> usize {
        let v = self.add_var(name);
        let e = LinExpr::var(v);
        self.assert_const(&e, Cmp::Gt, Rational::zero());
        self.assert_const(&e, Cmp::Le, Rational::from_integer(1.into()));
        v
    }

    /// Adds a strictly positive variable.
    pub fn add_positive_var(&mut self, name: impl Into<String>) -> usize {
        let v = self.add_var(name);
        self.assert_const(&LinExpr::var(v), Cmp::Gt, Rational::zero());
        v
    }

    pub fn add_nonneg_var(&mut self, name: impl Into<String>) -> usize {
        let v = self.add_var(name);
        self.assert_const(&LinExpr::var(v), Cmp::Ge, Rational::zero());
        v
    }
}

/// Exact substitution check of a candidate model.
pub fn check_model(system: &LinearSystem, model: &[Rational]) -> bool {
    model.len() == system.num_vars() && system.constraints.iter().all(|c| c.holds(model))
}

/// True when every constraint without variables holds.
pub(crate) fn ground_constraints_hold(system: &LinearSystem) -> bool {
    system.constraints.iter().filter(|c| c.coeffs.is_empty()).all(|c| match c.relation {
        Relation::Le => !c.rhs.is_negative(),
        Relation::Lt => c.rhs.is_positive(),
        Relation::Eq => c.rhs.is_zero(),
    })
}
