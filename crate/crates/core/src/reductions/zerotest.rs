//! Compilers whose source is a continuous VASS with zero tests.

use num_traits::{One, Signed, Zero};

use super::{padded, CompileError, Compiled, Layout};
use crate::matrix::Matrix;
use crate::model::{Action, Config, Machine};
use crate::num::{int, Rational};

/// Checks that every transition is additive or a zero test.
pub fn check_zero_test_machine(machine: &Machine) -> Result<(), CompileError> {
    machine.validate()?;
    for (id, t) in machine.transitions.iter().enumerate() {
        if let Action::Affine { matrix, .. } = &t.action {
            if !matrix.is_identity() {
                return Err(CompileError::NotZeroTest(id));
            }
        }
    }
    Ok(())
}

fn unit(dim: usize, pairs: &[(usize, i64)]) -> Vec<Rational> {
    let mut v = vec![Rational::zero(); dim];
    for &(x, c) in pairs {
        v[x] = int(c);
    }
    v
}

/// Counter positions added by [`compile_zero_test_to_one_bounded`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BudgetCounters {
    /// Remaining room for fractions.
    pub budget: usize,
    /// Fraction borrowed by a transition in flight.
    pub borrowed: usize,
    /// One minus the guessed scale.
    pub start: usize,
}

/// Makes every run 1-bounded. A fresh initial state guesses a scale `b`,
/// loads `b` times the start values and a budget of `b`; every additive
/// transition borrows its fraction from the budget and gives it back in a
/// second step, so no fraction exceeds `b`; a fresh final state removes `b`
/// times the target values and checks that the full budget came back.
/// Both compiled configurations are zero except for the start counter,
/// which is one. `from` reaches (covers) `to` in the source iff the
/// compiled start reaches (covers) the compiled goal by a 1-bounded run.
pub fn compile_zero_test_to_one_bounded(machine: &Machine, from: &Config, to: &Config) -> Result<(Compiled, BudgetCounters), CompileError> {
    check_zero_test_machine(machine)?;
    machine.check_config(from)?;
    machine.check_config(to)?;
    let d = machine.dim;
    let n = d + 3;
    let counters = BudgetCounters { budget: d, borrowed: d + 1, start: d + 2 };
    let mut m = Machine::new(n);
    m.states = machine.states.clone();
    for (id, t) in machine.transitions.iter().enumerate() {
        match &t.action {
            Action::ZeroTest { counter } => {
                m.add_zero_test(t.from, *counter, t.to);
            }
            Action::Affine { delta, .. } => {
                let mid = m.fresh_state(&format!("s_t{id}"));
                let mut first = padded(delta, n);
                first[counters.budget] = int(-1);
                first[counters.borrowed] = int(1);
                m.add_affine(t.from, Matrix::identity(n), first, mid);
                m.add_affine(mid, Matrix::identity(n), unit(n, &[(counters.budget, 1), (counters.borrowed, -1)]), t.to);
            }
        }
    }
    let init = m.fresh_state("init");
    let fin = m.fresh_state("final");
    let mut load = padded(&from.values, n);
    load[counters.budget] = int(1);
    load[counters.start] = int(-1);
    m.add_affine(init, Matrix::identity(n), load, from.state);
    let mut unload: Vec<Rational> = padded(&to.values, n).into_iter().map(|x| -x).collect();
    unload[counters.budget] = int(-1);
    unload[counters.start] = int(1);
    m.add_affine(to.state, Matrix::identity(n), unload, fin);
    let mut goal = vec![Rational::zero(); n];
    goal[counters.start] = Rational::one();
    let compiled = Compiled {
        layout: Layout::plain(n, (0..d).collect()),
        states: (0..machine.states.len()).collect(),
        from: Some(Config::new(init, goal.clone())),
        to: Some(Config::new(fin, goal)),
        machine: m,
    };
    Ok((compiled, counters))
}

fn check_one_bounded(cfg: &Config) -> Result<(), CompileError> {
    if cfg.values.iter().all(|x| !x.is_negative() && *x <= Rational::one()) {
        Ok(())
    } else {
        Err(CompileError::NotOneBounded)
    }
}

/// Replaces zero tests by resets. Each counter gets a complement so that
/// the pair sums to one; resetting a non-zero counter loses mass for good,
/// so only runs that reset zero counters can cover the compiled goal.
pub fn compile_one_bounded_to_reset(machine: &Machine, from: &Config, to: &Config) -> Result<Compiled, CompileError> {
    check_zero_test_machine(machine)?;
    machine.check_config(from)?;
    machine.check_config(to)?;
    check_one_bounded(from)?;
    check_one_bounded(to)?;
    let d = machine.dim;
    let layout = Layout { dim: 2 * d, primary: (0..d).collect(), complement: (d..2 * d).map(Some).collect() };
    let mut m = Machine::new(2 * d);
    m.states = machine.states.clone();
    for t in &machine.transitions {
        match &t.action {
            Action::ZeroTest { counter } => m.add_affine(t.from, Matrix::reset(2 * d, *counter), vec![Rational::zero(); 2 * d], t.to),
            Action::Affine { delta, .. } => m.add_affine(t.from, Matrix::identity(2 * d), layout.delta(delta), t.to),
        };
    }
    let states = (0..machine.states.len()).collect();
    let mut c = Compiled { machine: m, layout, states, from: None, to: None };
    c.from = Some(c.config(from));
    c.to = Some(c.config(to));
    Ok(c)
}

/// A position `(row, col)` with a negative entry.
pub fn negative_entry(a: &Matrix) -> Option<(usize, usize)> {
    (0..a.dim()).flat_map(|i| (0..a.dim()).map(move |j| (i, j))).find(|&(i, j)| a.get(i, j) < 0)
}

/// Simulates zero tests with a matrix that has a negative entry in column
/// `col`: each source counter gets a block of the matrix's size, holding the
/// counter at position `col` and zeros elsewhere. Multiplying a block by the
/// matrix keeps it non-negative only if the counter is zero. State
/// reachability is preserved.
pub fn compile_zero_test_to_negative(machine: &Machine, gadget: &Matrix) -> Result<Compiled, CompileError> {
    check_zero_test_machine(machine)?;
    let (_, col) = negative_entry(gadget).ok_or(CompileError::BadGadget("has no negative entry"))?;
    let k = gadget.dim();
    let d = machine.dim;
    let n = d * k;
    let layout = Layout::plain(n, (0..d).map(|i| i * k + col).collect());
    let mut m = Machine::new(n);
    m.states = machine.states.clone();
    for t in &machine.transitions {
        match &t.action {
            Action::ZeroTest { counter } => m.add_affine(t.from, Matrix::embed_at(n, gadget, counter * k), vec![Rational::zero(); n], t.to),
            Action::Affine { delta, .. } => m.add_affine(t.from, Matrix::identity(n), layout.delta(delta), t.to),
        };
    }
    Ok(Compiled { machine: m, layout, states: (0..machine.states.len()).collect(), from: None, to: None })
}

/// A column whose entries sum to more than one.
pub fn heavy_column(a: &Matrix) -> Option<usize> {
    (0..a.dim()).find(|&j| (0..a.dim()).map(|i| a.get(i, j)).sum::<i64>() > 1)
}

/// Simulates zero tests with a non-negative matrix that has a column
/// summing to more than one. Each source counter gets a block of the
/// matrix's size plus a complement counter; additive steps keep each block
/// summing to one, and multiplying a block whose counter is non-zero makes
/// the sum exceed one for good. 1-bounded reachability is preserved.
pub fn compile_one_bounded_to_weighted(machine: &Machine, from: &Config, to: &Config, gadget: &Matrix) -> Result<Compiled, CompileError> {
    check_zero_test_machine(machine)?;
    machine.check_config(from)?;
    machine.check_config(to)?;
    check_one_bounded(from)?;
    check_one_bounded(to)?;
    let k = gadget.dim();
    if (0..k).any(|i| (0..k).any(|j| gadget.get(i, j) < 0)) {
        return Err(CompileError::BadGadget("has a negative entry"));
    }
    let z = heavy_column(gadget).ok_or(CompileError::BadGadget("has no column summing above one"))?;
    let d = machine.dim;
    let n = d * (k + 1);
    let layout = Layout {
        dim: n,
        primary: (0..d).map(|i| i * (k + 1) + z).collect(),
        complement: (0..d).map(|i| Some(i * (k + 1) + k)).collect(),
    };
    let mut m = Machine::new(n);
    m.states = machine.states.clone();
    for t in &machine.transitions {
        match &t.action {
            Action::ZeroTest { counter } => m.add_affine(t.from, Matrix::embed_at(n, gadget, counter * (k + 1)), vec![Rational::zero(); n], t.to),
            Action::Affine { delta, .. } => m.add_affine(t.from, Matrix::identity(n), layout.delta(delta), t.to),
        };
    }
    let states = (0..machine.states.len()).collect();
    let mut c = Compiled { machine: m, layout, states, from: None, to: None };
    c.from = Some(c.config(from));
    c.to = Some(c.config(to));
    Ok(c)
}

/// Sum of the block of source counter `i` in the weighted layout.
pub fn block_sum(values: &[Rational], block: usize, i: usize) -> Rational {
    values[i * block..(i + 1) * block].iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{run, step, Step, StepError};
    use crate::num::rat;
    use crate::oracle::{bounded_decide, OracleOptions, Target};

    /// q0 --(+1)--> q1 --zero?--> q2, q1 --(-1)--> q1
    fn tester() -> Machine {
        let mut m = Machine::with_states(1, 3);
        m.add_additive(0, &[1], 1);
        m.add_zero_test(1, 0, 2);
        m.add_additive(1, &[-1], 1);
        m
    }

    #[test]
    fn one_bounded_layout() {
        let m = tester();
        let from = Config::from_ints(0, &[0]);
        let to = Config::from_ints(2, &[0]);
        let (c, k) = compile_zero_test_to_one_bounded(&m, &from, &to).unwrap();
        // two transitions per additive transition, zero tests kept, plus load and unload
        assert_eq!(c.machine.transitions.len(), 2 * 2 + 1 + 2);
        assert_eq!(c.machine.dim, 4);
        assert_eq!(c.from.as_ref().unwrap().values, vec![int(0), int(0), int(0), int(1)]);
        assert_eq!(c.to.as_ref().unwrap().values, c.from.as_ref().unwrap().values);
        // a faithful run at scale 1/2: load, +1 at half, zero test is blocked, -1 at half, zero test
        let cm = &c.machine;
        let load = cm.transitions.len() - 2;
        let seq = vec![
            Step::new(load, rat(1, 2)),
            Step::new(0, rat(1, 2)),
            Step::new(1, rat(1, 2)),
            Step::new(3, rat(1, 2)),
            Step::new(4, rat(1, 2)),
            Step::new(2, int(1)),
            Step::new(load + 1, rat(1, 2)),
        ];
        assert_eq!(run(cm, c.from.as_ref().unwrap(), &seq).unwrap(), *c.to.as_ref().unwrap());
        assert_eq!(k.start, 3);
        // fractions above the guessed scale cannot be borrowed
        let after_load = step(cm, c.from.as_ref().unwrap(), &Step::new(load, rat(1, 2))).unwrap();
        assert!(matches!(step(cm, &after_load, &Step::new(0, int(1))), Err(StepError::Negative { .. })));
    }

    #[test]
    fn one_bounded_answers_match() {
        let m = tester();
        let from = Config::from_ints(0, &[0]);
        let opts = OracleOptions { max_len: 4, ..OracleOptions::default() };
        let one = OracleOptions { max_len: 9, one_bounded: true };
        for (to, expect) in [(Config::from_ints(2, &[0]), true), (Config::from_ints(2, &[1]), false)] {
            let src = bounded_decide(&m, &from, to.state, &Target::Cover(to.values.clone()), opts).is_witness();
            assert_eq!(src, expect);
            let (c, _) = compile_zero_test_to_one_bounded(&m, &from, &to).unwrap();
            let goal = c.to.clone().unwrap();
            assert_eq!(bounded_decide(&c.machine, c.from.as_ref().unwrap(), goal.state, &Target::Cover(goal.values), one).is_witness(), expect);
        }
    }

    #[test]
    fn resets_with_complements() {
        let m = tester();
        let c = compile_one_bounded_to_reset(&m, &Config::from_ints(0, &[0]), &Config::from_ints(2, &[0])).unwrap();
        assert_eq!(c.machine.dim, 2);
        assert_eq!(c.from.as_ref().unwrap().values, vec![int(0), int(1)]);
        assert_eq!(*c.machine.transitions[1].matrix().unwrap(), Matrix::reset(2, 0));
        // resetting a non-zero counter breaks the sum
        let mid = step(&c.machine, c.from.as_ref().unwrap(), &Step::new(0, rat(1, 2))).unwrap();
        let after = step(&c.machine, &mid, &Step::new(1, int(1))).unwrap();
        assert!(!c.layout.is_encoding(&after.values));
        assert_eq!(compile_one_bounded_to_reset(&m, &Config::from_ints(0, &[2]), &Config::from_ints(2, &[0])), Err(CompileError::NotOneBounded));
    }

    #[test]
    fn negative_entry_blocks_positive_tests() {
        let m = tester();
        let a = Matrix::from_rows(&[vec![-1]]).unwrap();
        let c = compile_zero_test_to_negative(&m, &a).unwrap();
        assert_eq!(c.machine.dim, 1);
        let positive = Config::new(1, vec![rat(1, 2)]);
        assert!(matches!(step(&c.machine, &positive, &Step::new(1, int(1))), Err(StepError::Negative { .. })));
        assert!(step(&c.machine, &Config::from_ints(1, &[0]), &Step::new(1, int(1))).is_ok());
        let b = Matrix::from_rows(&[vec![1, 0], vec![-1, 1]]).unwrap();
        let c = compile_zero_test_to_negative(&m, &b).unwrap();
        assert_eq!(c.layout.primary, vec![0]);
        let opts = OracleOptions { max_len: 4, ..OracleOptions::default() };
        for target in [2, 1] {
            let src = bounded_decide(&m, &Config::from_ints(0, &[0]), target, &Target::StateOnly, opts).is_witness();
            let dst = bounded_decide(&c.machine, &c.config(&Config::from_ints(0, &[0])), target, &Target::StateOnly, opts).is_witness();
            assert_eq!(src, dst);
        }
    }

    #[test]
    fn weighted_gadget_detects_non_zero() {
        let m = tester();
        let a = Matrix::from_rows(&[vec![2]]).unwrap();
        let from = Config::from_ints(0, &[0]);
        let to = Config::from_ints(2, &[0]);
        let c = compile_one_bounded_to_weighted(&m, &from, &to, &a).unwrap();
        assert_eq!(c.machine.dim, 2);
        assert_eq!(c.layout.delta(&[int(1)]), vec![int(1), int(-1)]);
        let good = Config::new(1, c.layout.encode(&[rat(1, 4)]));
        let bad = step(&c.machine, &good, &Step::new(1, int(1))).unwrap();
        assert!(block_sum(&bad.values, 2, 0) > Rational::one());
        let opts = OracleOptions { max_len: 4, ..OracleOptions::default() };
        let goal = c.to.clone().unwrap();
        assert!(bounded_decide(&c.machine, c.from.as_ref().unwrap(), goal.state, &Target::Exact(goal.values), opts).is_witness());
        assert_eq!(heavy_column(&Matrix::identity(2)), None);
    }
}
