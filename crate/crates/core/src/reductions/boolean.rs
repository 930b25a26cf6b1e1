//! Boolean programs and their simulation by reset machines and by
//! permutation machines. Each variable is held by two counters, exactly one
//! of which is non-zero.

use std::collections::{HashSet, VecDeque};

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{perm, Matrix};
use crate::model::{Config, Machine};
use crate::num::{int, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoolOp {
    Test,
    Set,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoolTransition {
    pub from: usize,
    pub op: BoolOp,
    pub var: usize,
    pub value: bool,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanProgram {
    pub vars: usize,
    pub states: Vec<String>,
    pub transitions: Vec<BoolTransition>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProgramError {
    #[error("transition {0} refers to an unknown state or variable")]
    BadTransition(usize),
    #[error("at most 64 variables are supported")]
    TooManyVariables,
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("invalid JSON: {0}")]
    Json(String),
}

impl BooleanProgram {
    pub fn validate(&self) -> Result<(), ProgramError> {
        if self.vars > 64 {
            return Err(ProgramError::TooManyVariables);
        }
        for (i, t) in self.transitions.iter().enumerate() {
            if t.from >= self.states.len() || t.to >= self.states.len() || t.var >= self.vars {
                return Err(ProgramError::BadTransition(i));
            }
        }
        Ok(())
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }
}

#[derive(Serialize, Deserialize)]
struct ProgramJson {
    variables: usize,
    states: Vec<String>,
    transitions: Vec<TransitionJson>,
}

#[derive(Serialize, Deserialize)]
struct TransitionJson {
    from: String,
    op: BoolOp,
    var: usize,
    value: u8,
    to: String,
}

/// `{"variables": d, "states": [..], "transitions": [{"from", "op": "test" |
/// "set", "var", "value": 0 | 1, "to"}]}`.
pub fn program_from_str(text: &str) -> Result<BooleanProgram, ProgramError> {
    let pj: ProgramJson = serde_json::from_str(text).map_err(|e| ProgramError::Json(e.to_string()))?;
    let index = |name: &str| pj.states.iter().position(|s| s == name).ok_or_else(|| ProgramError::UnknownState(name.to_string()));
    let mut transitions = Vec::new();
    for (i, t) in pj.transitions.iter().enumerate() {
        if t.value > 1 {
            return Err(ProgramError::BadTransition(i));
        }
        transitions.push(BoolTransition { from: index(&t.from)?, op: t.op, var: t.var, value: t.value == 1, to: index(&t.to)? });
    }
    let bp = BooleanProgram { vars: pj.variables, states: pj.states, transitions };
    bp.validate()?;
    Ok(bp)
}

pub fn program_to_string(bp: &BooleanProgram) -> String {
    let pj = ProgramJson {
        variables: bp.vars,
        states: bp.states.clone(),
        transitions: bp
            .transitions
            .iter()
            .map(|t| TransitionJson { from: bp.states[t.from].clone(), op: t.op, var: t.var, value: u8::from(t.value), to: bp.states[t.to].clone() })
            .collect(),
    };
    serde_json::to_string_pretty(&pj).expect("program serializes")
}

fn bits_of(values: &[bool]) -> u64 {
    values.iter().enumerate().fold(0, |acc, (i, &b)| acc | u64::from(b) << i)
}

/// Exhaustive search over states and valuations.
pub fn bp_solve(bp: &BooleanProgram, from: usize, values: &[bool], to: usize) -> bool {
    let start = (from, bits_of(values));
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some((state, bits)) = queue.pop_front() {
        if state == to {
            return true;
        }
        for t in bp.transitions.iter().filter(|t| t.from == state) {
            let current = bits >> t.var & 1 == 1;
            let next = match t.op {
                BoolOp::Test if current != t.value => continue,
                BoolOp::Test => bits,
                BoolOp::Set if t.value => bits | 1 << t.var,
                BoolOp::Set => bits & !(1 << t.var),
            };
            if seen.insert((t.to, next)) {
                queue.push_back((t.to, next));
            }
        }
    }
    false
}

/// A compiled Boolean program: the counter holding each variable when it
/// is true and when it is false.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompiledProgram {
    pub machine: Machine,
    pub true_counter: Vec<usize>,
    pub false_counter: Vec<usize>,
}

impl CompiledProgram {
    /// The configuration with value one in the counter of each variable's
    /// current value; program states keep their indices.
    pub fn encode(&self, state: usize, values: &[bool]) -> Config {
        let mut v = vec![Rational::zero(); self.machine.dim];
        for (i, &b) in values.iter().enumerate() {
            v[if b { self.true_counter[i] } else { self.false_counter[i] }] = int(1);
        }
        Config::new(state, v)
    }

    /// The valuation of a configuration in which exactly one counter of each
    /// pair is non-zero and every other counter is zero.
    pub fn decode(&self, values: &[Rational]) -> Option<Vec<bool>> {
        let used: HashSet<usize> = self.true_counter.iter().chain(&self.false_counter).copied().collect();
        if (0..values.len()).any(|x| !used.contains(&x) && !values[x].is_zero()) {
            return None;
        }
        self.true_counter
            .iter()
            .zip(&self.false_counter)
            .map(|(&t, &f)| match (values[t].is_zero(), values[f].is_zero()) {
                (false, true) => Some(true),
                (true, false) => Some(false),
                _ => None,
            })
            .collect()
    }
}

fn unit(dim: usize, x: usize, c: i64) -> Vec<Rational> {
    let mut v = vec![Rational::zero(); dim];
    v[x] = int(c);
    v
}

/// Variable `i` with value `j` is held by counter `vars * j + i`. A test
/// decrements and restores that counter; a set resets the other counter
/// and increments this one.
pub fn compile_boolean_to_reset(bp: &BooleanProgram) -> CompiledProgram {
    let d = bp.vars;
    let n = 2 * d;
    let counter = |i: usize, j: bool| d * usize::from(j) + i;
    let mut m = Machine::new(n);
    m.states = bp.states.clone();
    for (id, t) in bp.transitions.iter().enumerate() {
        let mid = m.fresh_state(&format!("q_t{id}"));
        let c = counter(t.var, t.value);
        match t.op {
            BoolOp::Test => {
                m.add_affine(t.from, Matrix::identity(n), unit(n, c, -1), mid);
                m.add_affine(mid, Matrix::identity(n), unit(n, c, 1), t.to);
            }
            BoolOp::Set => {
                m.add_affine(t.from, Matrix::reset(n, counter(t.var, !t.value)), unit(n, c, 1), mid);
                m.add_affine(mid, Matrix::identity(n), vec![Rational::zero(); n], t.to);
            }
        }
    }
    CompiledProgram { machine: m, true_counter: (0..d).map(|i| counter(i, true)).collect(), false_counter: (0..d).map(|i| counter(i, false)).collect() }
}

/// Each variable gets a block of the permutation's size. The true counter
/// sits at the first moved index `z` and the false counter at its image;
/// the permutation moves a lone value from `z` to its image, and its
/// inverse power moves it back. A set first finds out which counter is
/// non-zero by decrementing and restoring it, then moves the value if
/// needed.
pub fn compile_boolean_to_perm(bp: &BooleanProgram, sigma: &[usize]) -> Result<CompiledProgram, super::CompileError> {
    let mut seen = vec![false; sigma.len()];
    for &a in sigma {
        if a >= sigma.len() || std::mem::replace(&mut seen[a], true) {
            return Err(super::CompileError::BadGadget("is not a permutation"));
        }
    }
    let z = (0..sigma.len()).find(|&a| sigma[a] != a).ok_or(super::CompileError::BadGadget("is the identity"))?;
    let k = sigma.len();
    let order = perm::order(sigma);
    let forward = Matrix::permutation(sigma);
    let backward = forward.pow(order - 1);
    let d = bp.vars;
    let n = d * k;
    let pos = |i: usize| i * k + z;
    let neg = |i: usize| i * k + sigma[z];
    let mut m = Machine::new(n);
    m.states = bp.states.clone();
    let zero = vec![Rational::zero(); n];
    for (id, t) in bp.transitions.iter().enumerate() {
        let i = t.var;
        match t.op {
            BoolOp::Test => {
                let x = if t.value { pos(i) } else { neg(i) };
                let mid = m.fresh_state(&format!("q_t{id}"));
                m.add_affine(t.from, Matrix::identity(n), unit(n, x, -1), mid);
                m.add_affine(mid, Matrix::identity(n), unit(n, x, 1), t.to);
            }
            BoolOp::Set => {
                let (when_true, when_false) = if t.value {
                    (Matrix::identity(n), Matrix::embed_at(n, &backward, i * k))
                } else {
                    (Matrix::embed_at(n, &forward, i * k), Matrix::identity(n))
                };
                for (x, fix, tag) in [(pos(i), when_true, "true"), (neg(i), when_false, "false")] {
                    let dec = m.fresh_state(&format!("q_t{id}_was_{tag}"));
                    let inc = m.fresh_state(&format!("q_t{id}_kept_{tag}"));
                    m.add_affine(t.from, Matrix::identity(n), unit(n, x, -1), dec);
                    m.add_affine(dec, Matrix::identity(n), unit(n, x, 1), inc);
                    m.add_affine(inc, fix, zero.clone(), t.to);
                }
            }
        }
    }
    Ok(CompiledProgram { machine: m, true_counter: (0..d).map(pos).collect(), false_counter: (0..d).map(neg).collect() })
}
