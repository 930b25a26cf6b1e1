//! Simulating resets with a non-negative matrix that has a zero row or a
//! zero column.

use num_traits::Zero;

use super::{CompileError, Compiled, Layout};
use crate::matrix::Matrix;
use crate::model::{Action, Machine};
use crate::num::Rational;

/// Counters reset by a diagonal 0/1 matrix, or `None` for other matrices.
pub fn reset_counters(a: &Matrix) -> Option<Vec<usize>> {
    let n = a.dim();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || a.get(i, j) == 0));
    (diagonal && (0..n).all(|i| matches!(a.get(i, i), 0 | 1))).then(|| (0..n).filter(|&i| a.get(i, i) == 0).collect())
}

/// Rewrites a reset machine so that each transition resets at most one
/// counter, and transitions that reset have a zero delta. Transitions are
/// split through fresh states; original states keep their indices.
pub fn normalize_resets(machine: &Machine) -> Result<Machine, CompileError> {
    machine.validate()?;
    let d = machine.dim;
    let mut m = Machine::new(d);
    m.states = machine.states.clone();
    for (id, t) in machine.transitions.iter().enumerate() {
        let (Some(matrix), Some(delta)) = (t.matrix(), t.delta()) else {
            return Err(CompileError::NotReset(id));
        };
        let resets = reset_counters(matrix).ok_or(CompileError::NotReset(id))?;
        let additive = delta.iter().any(|x| !x.is_zero());
        if resets.len() + usize::from(additive) <= 1 {
            m.add_transition(t.from, t.action.clone(), t.to);
            continue;
        }
        let mut cur = t.from;
        for (i, &x) in resets.iter().enumerate() {
            let last = i + 1 == resets.len() && !additive;
            let next = if last { t.to } else { m.fresh_state(&format!("{}_t{id}_{i}", machine.states[t.from])) };
            m.add_affine(cur, Matrix::reset(d, x), vec![Rational::zero(); d], next);
            cur = next;
        }
        if additive {
            m.add_affine(cur, Matrix::identity(d), delta.to_vec(), t.to);
        }
    }
    Ok(m)
}

/// Which part of the gadget matrix is zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZeroLine {
    Row(usize),
    Column(usize),
}

/// A zero row if there is one, else a zero column.
pub fn zero_line(a: &Matrix) -> Option<ZeroLine> {
    let n = a.dim();
    if let Some(r) = (0..n).find(|&i| (0..n).all(|j| a.get(i, j) == 0)) {
        return Some(ZeroLine::Row(r));
    }
    (0..n).find(|&j| (0..n).all(|i| a.get(i, j) == 0)).map(ZeroLine::Column)
}

/// Each source counter gets a block of the gadget's size and lives at the
/// zero line's position; a reset multiplies the block by the gadget. With a
/// zero row the product always clears the counter and the other block
/// entries never flow back into it; with a zero column the block stays
/// zero apart from the counter, and the product clears it. Coverability
/// and state reachability are preserved for encoded configurations.
pub fn compile_reset_to_zero_row_col(machine: &Machine, gadget: &Matrix) -> Result<(Compiled, ZeroLine), CompileError> {
    let k = gadget.dim();
    if (0..k).any(|i| (0..k).any(|j| gadget.get(i, j) < 0)) {
        return Err(CompileError::BadGadget("has a negative entry"));
    }
    let line = zero_line(gadget).ok_or(CompileError::BadGadget("has no zero row or column"))?;
    let (ZeroLine::Row(j) | ZeroLine::Column(j)) = line;
    let source = normalize_resets(machine)?;
    let d = source.dim;
    let n = d * k;
    let layout = Layout::plain(n, (0..d).map(|i| i * k + j).collect());
    let mut m = Machine::new(n);
    m.states = source.states.clone();
    for t in &source.transitions {
        let Action::Affine { matrix, delta } = &t.action else { unreachable!("normalized machines have no zero tests") };
        let resets = reset_counters(matrix).expect("normalized");
        match resets.first() {
            Some(&x) => m.add_affine(t.from, Matrix::embed_at(n, gadget, x * k), vec![Rational::zero(); n], t.to),
            None => m.add_affine(t.from, Matrix::identity(n), layout.delta(delta), t.to),
        };
    }
    let states = (0..machine.states.len()).collect();
    Ok((Compiled { machine: m, layout, states, from: None, to: None }, line))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{run, Config, Step};
    use crate::num::{int, rat};

    #[test]
    fn normalization_splits_multi_resets() {
        let mut m = Machine::with_states(3, 2);
        let mut r = Matrix::identity(3);
        r.set(0, 0, 0);
        r.set(2, 2, 0);
        m.add_affine(0, r, vec![int(0), int(1), int(0)], 1);
        m.add_affine(1, Matrix::reset(3, 1), vec![int(0); 3], 0);
        let n = normalize_resets(&m).unwrap();
        assert_eq!(n.transitions.len(), 4);
        assert_eq!(n.states.len(), 4);
        let from = Config::new(0, vec![int(1), int(1), rat(1, 2)]);
        let steps: Vec<Step> = [0, 1, 2].iter().map(|&t| Step::new(t, rat(1, 2))).collect();
        let direct = run(&m, &from, &[Step::new(0, rat(1, 2))]).unwrap();
        assert_eq!(run(&n, &from, &steps).unwrap(), direct);
        let mut bad = Machine::with_states(1, 1);
        bad.add_affine(0, Matrix::from_rows(&[vec![2]]).unwrap(), vec![int(0)], 0);
        assert_eq!(normalize_resets(&bad), Err(CompileError::NotReset(0)));
    }

    #[test]
    fn plain_reset_gadget_is_a_renaming() {
        let mut m = Machine::with_states(2, 1);
        m.add_affine(0, Matrix::reset(2, 1), vec![int(0); 2], 0);
        m.add_additive(0, &[1, 1], 0);
        let a = Matrix::from_rows(&[vec![0, 0], vec![0, 1]]).unwrap();
        let (c, line) = compile_reset_to_zero_row_col(&m, &a).unwrap();
        assert_eq!(line, ZeroLine::Row(0));
        assert_eq!(c.layout.primary, vec![0, 2]);
        assert_eq!(*c.machine.transitions[0].matrix().unwrap(), Matrix::embed_at(4, &a, 2));
        let from = c.config(&Config::from_ints(0, &[1, 1]));
        let after = run(&c.machine, &from, &[Step::new(0, int(1))]).unwrap();
        assert_eq!(c.layout.decode(&after.values), vec![int(1), int(0)]);
    }

    #[test]
    fn zero_column_keeps_dummies_zero() {
        let mut m = Machine::with_states(1, 1);
        m.add_affine(0, Matrix::reset(1, 0), vec![int(0)], 0);
        m.add_additive(0, &[1], 0);
        // column 0 is zero, row sums are not
        let a = Matrix::from_rows(&[vec![0, 1], vec![0, 1]]).unwrap();
        let (c, line) = compile_reset_to_zero_row_col(&m, &a).unwrap();
        assert_eq!(line, ZeroLine::Column(0));
        let from = c.config(&Config::from_ints(0, &[0]));
        let seq = vec![Step::new(1, rat(1, 2)), Step::new(0, int(1)), Step::new(1, int(1))];
        let end = run(&c.machine, &from, &seq).unwrap();
        assert!(c.layout.is_encoding(&end.values));
        assert_eq!(c.layout.decode(&end.values), vec![int(1)]);
    }
}
