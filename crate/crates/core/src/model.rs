//! Machines, configurations, firing sequences and their exact semantics.

use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::matrix::{BigMatrix, Matrix};
use crate::num::{format_rational, int, Rational};

/// What a transition does to the counter vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    /// `v = matrix * u + fraction * delta`.
    Affine { matrix: Matrix, delta: Vec<Rational> },
    /// Enabled only when the counter is zero; leaves the vector unchanged.
    ZeroTest { counter: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub action: Action,
}

impl Transition {
    pub fn matrix(&self) -> Option<&Matrix> {
        match &self.action {
            Action::Affine { matrix, .. } => Some(matrix),
            Action::ZeroTest { .. } => None,
        }
    }

    pub fn delta(&self) -> Option<&[Rational]> {
        match &self.action {
            Action::Affine { delta, .. } => Some(delta),
            Action::ZeroTest { .. } => None,
        }
    }

    /// Counters with a positive additive update.
    pub fn incremented(&self) -> CounterSet {
        self.delta().map(|d| CounterSet::from_pred(d.len(), |i| d[i].is_positive())).unwrap_or_default()
    }

    /// Counters with a negative additive update.
    pub fn decremented(&self) -> CounterSet {
        self.delta().map(|d| CounterSet::from_pred(d.len(), |i| d[i].is_negative())).unwrap_or_default()
    }
}

/// A machine over `dim` counters. Transition ids are indices into
/// `transitions`; state ids are indices into `states`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Machine {
    pub dim: usize,
    pub states: Vec<String>,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("state id {0} out of range")]
    UnknownState(usize),
    #[error("transition {transition}: expected dimension {expected}, found {found}")]
    Dimension { transition: usize, expected: usize, found: usize },
    #[error("transition {transition}: zero test on missing counter {counter}")]
    BadCounter { transition: usize, counter: usize },
    #[error("duplicate state name {0:?}")]
    DuplicateState(String),
    #[error("configuration has dimension {found}, expected {expected}")]
    ConfigDimension { expected: usize, found: usize },
    #[error("configuration has a negative entry")]
    NegativeConfig,
}

impl Machine {
    pub fn new(dim: usize) -> Self {
        Machine { dim, states: Vec::new(), transitions: Vec::new() }
    }

    pub fn add_state(&mut self, name: impl Into<String>) -> usize {
        self.states.push(name.into());
        self.states.len() - 1
    }

    /// Adds a state named `base`, or `base_1`, `base_2`, ... if taken.
    pub fn fresh_state(&mut self, base: &str) -> usize {
        let mut name = base.to_string();
        let mut k = 0;
        while self.state_index(&name).is_some() {
            k += 1;
            name = format!("{base}_{k}");
        }
        self.add_state(name)
    }

    /// A machine with `count` states named `q0`, `q1`, ...
    pub fn with_states(dim: usize, count: usize) -> Self {
        let mut m = Machine::new(dim);
        for i in 0..count {
            m.add_state(format!("q{i}"));
        }
        m
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn add_transition(&mut self, from: usize, action: Action, to: usize) -> usize {
        self.transitions.push(Transition { from, to, action });
        self.transitions.len() - 1
    }

    pub fn add_affine(&mut self, from: usize, matrix: Matrix, delta: Vec<Rational>, to: usize) -> usize {
        self.add_transition(from, Action::Affine { matrix, delta }, to)
    }

    /// Identity matrix with an integer delta.
    pub fn add_additive(&mut self, from: usize, delta: &[i64], to: usize) -> usize {
        let dim = self.dim;
        self.add_affine(from, Matrix::identity(dim), delta.iter().map(|&x| int(x)).collect(), to)
    }

    pub fn add_zero_test(&mut self, from: usize, counter: usize, to: usize) -> usize {
        self.add_transition(from, Action::ZeroTest { counter }, to)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, a) in self.states.iter().enumerate() {
            if self.states[..i].contains(a) {
                return Err(ModelError::DuplicateState(a.clone()));
            }
        }
        for (id, t) in self.transitions.iter().enumerate() {
            for s in [t.from, t.to] {
                if s >= self.states.len() {
                    return Err(ModelError::UnknownState(s));
                }
            }
            match &t.action {
                Action::Affine { matrix, delta } => {
                    for found in [matrix.dim(), delta.len()] {
                        if found != self.dim {
                            return Err(ModelError::Dimension { transition: id, expected: self.dim, found });
                        }
                    }
                }
                Action::ZeroTest { counter } => {
                    if *counter >= self.dim {
                        return Err(ModelError::BadCounter { transition: id, counter: *counter });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn check_config(&self, cfg: &Config) -> Result<(), ModelError> {
        if cfg.state >= self.states.len() {
            return Err(ModelError::UnknownState(cfg.state));
        }
        if cfg.values.len() != self.dim {
            return Err(ModelError::ConfigDimension { expected: self.dim, found: cfg.values.len() });
        }
        if cfg.values.iter().any(|x| x.is_negative()) {
            return Err(ModelError::NegativeConfig);
        }
        Ok(())
    }

    pub fn outgoing(&self, state: usize) -> impl Iterator<Item = usize> + '_ {
        self.transitions.iter().enumerate().filter(move |(_, t)| t.from == state).map(|(i, _)| i)
    }

    pub fn has_zero_tests(&self) -> bool {
        self.transitions.iter().any(|t| matches!(t.action, Action::ZeroTest { .. }))
    }

    pub fn matrices(&self) -> impl Iterator<Item = &Matrix> {
        self.transitions.iter().filter_map(|t| t.matrix())
    }

    pub fn all_identity(&self) -> bool {
        !self.has_zero_tests() && self.matrices().all(Matrix::is_identity)
    }

    /// The machine with every transition reversed and every delta negated.
    /// Only meaningful when all matrices are the identity.
    pub fn reversed(&self) -> Machine {
        assert!(self.all_identity(), "only identity-matrix machines can be reversed");
        let transitions = self
            .transitions
            .iter()
            .map(|t| {
                let delta = t.delta().unwrap().iter().map(|x| -x).collect();
                Transition { from: t.to, to: t.from, action: Action::Affine { matrix: Matrix::identity(self.dim), delta } }
            })
            .collect();
        Machine { dim: self.dim, states: self.states.clone(), transitions }
    }

    /// States reachable from `start` in the underlying graph, restricted to
    /// the transitions accepted by `allowed`.
    pub fn graph_reachable(&self, start: usize, allowed: impl Fn(usize) -> bool) -> Vec<bool> {
        let mut seen = vec![false; self.states.len()];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(s) = stack.pop() {
            for (id, t) in self.transitions.iter().enumerate() {
                if t.from == s && allowed(id) && !seen[t.to] {
                    seen[t.to] = true;
                    stack.push(t.to);
                }
            }
        }
        seen
    }

    /// A shortest transition path from `from` to `to` using only allowed
    /// transitions; ties broken by transition id.
    pub fn graph_path(&self, from: usize, to: usize, allowed: impl Fn(usize) -> bool) -> Option<Vec<usize>> {
        let mut parent: Vec<Option<usize>> = vec![None; self.states.len()];
        let mut seen = vec![false; self.states.len()];
        seen[from] = true;
        let mut queue = std::collections::VecDeque::from([from]);
        while let Some(s) = queue.pop_front() {
            if s == to {
                let mut path = Vec::new();
                let mut cur = to;
                while cur != from {
                    let t = parent[cur].unwrap();
                    path.push(t);
                    cur = self.transitions[t].from;
                }
                path.reverse();
                return Some(path);
            }
            for (id, t) in self.transitions.iter().enumerate() {
                if t.from == s && allowed(id) && !seen[t.to] {
                    seen[t.to] = true;
                    parent[t.to] = Some(id);
                    queue.push_back(t.to);
                }
            }
        }
        None
    }
}

/// A set of counters, as a bitmask. Machines handled here have at most 64
/// counters.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CounterSet(pub u64);

impl CounterSet {
    pub const EMPTY: CounterSet = CounterSet(0);

    pub fn full(dim: usize) -> Self {
        assert!(dim <= 64, "at most 64 counters are supported");
        if dim == 64 {
            CounterSet(u64::MAX)
        } else {
            CounterSet((1u64 << dim) - 1)
        }
    }

    pub fn from_pred(dim: usize, pred: impl Fn(usize) -> bool) -> Self {
        assert!(dim <= 64, "at most 64 counters are supported");
        let mut bits = 0u64;
        for i in 0..dim {
            if pred(i) {
                bits |= 1 << i;
            }
        }
        CounterSet(bits)
    }

    pub fn of(items: &[usize]) -> Self {
        CounterSet(items.iter().fold(0, |acc, &i| acc | (1 << i)))
    }

    pub fn support(v: &[Rational]) -> Self {
        CounterSet::from_pred(v.len(), |i| !v[i].is_zero())
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1 << i;
    }

    pub fn union(self, other: CounterSet) -> CounterSet {
        CounterSet(self.0 | other.0)
    }

    pub fn intersect(self, other: CounterSet) -> CounterSet {
        CounterSet(self.0 & other.0)
    }

    pub fn minus(self, other: CounterSet) -> CounterSet {
        CounterSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: CounterSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&i| self.contains(i))
    }
}

impl fmt::Debug for CounterSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Config {
    pub state: usize,
    pub values: Vec<Rational>,
}

impl Config {
    pub fn new(state: usize, values: Vec<Rational>) -> Self {
        Config { state, values }
    }

    pub fn from_ints(state: usize, values: &[i64]) -> Self {
        Config { state, values: values.iter().map(|&x| int(x)).collect() }
    }

    pub fn support(&self) -> CounterSet {
        CounterSet::support(&self.values)
    }

    pub fn display(&self, machine: &Machine) -> String {
        format!("{}{}", machine.states[self.state], crate::num::format_vector(&self.values))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Step {
    pub transition: usize,
    pub fraction: Rational,
}

impl Step {
    pub fn new(transition: usize, fraction: Rational) -> Self {
        Step { transition, fraction }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*t{}", format_rational(&self.fraction), self.transition)
    }
}

pub type FiringSequence = Vec<Step>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StepError {
    #[error("transition {0} does not exist")]
    UnknownTransition(usize),
    #[error("transition {transition} starts in state {expected}, but the run is in state {actual}")]
    WrongState { transition: usize, expected: usize, actual: usize },
    #[error("fraction {0} is outside (0, 1]")]
    FractionOutOfRange(String),
    #[error("counter {counter} would become negative")]
    Negative { counter: usize },
    #[error("zero test on counter {counter} failed")]
    ZeroTestFailed { counter: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("step {index} ({step}) is not enabled: {error}")]
pub struct ReplayError {
    pub index: usize,
    pub step: String,
    pub error: StepError,
}

fn fraction_ok(f: &Rational) -> bool {
    f.is_positive() && *f <= Rational::one()
}

/// Fires one step.
pub fn step(machine: &Machine, cfg: &Config, s: &Step) -> Result<Config, StepError> {
    let t = machine.transitions.get(s.transition).ok_or(StepError::UnknownTransition(s.transition))?;
    if t.from != cfg.state {
        return Err(StepError::WrongState { transition: s.transition, expected: t.from, actual: cfg.state });
    }
    if !fraction_ok(&s.fraction) {
        return Err(StepError::FractionOutOfRange(format_rational(&s.fraction)));
    }
    match &t.action {
        Action::Affine { matrix, delta } => {
            let mut v = if matrix.is_identity() { cfg.values.clone() } else { matrix.apply(&cfg.values) };
            for (i, x) in v.iter_mut().enumerate() {
                if !delta[i].is_zero() {
                    *x += &delta[i] * &s.fraction;
                }
                if x.is_negative() {
                    return Err(StepError::Negative { counter: i });
                }
            }
            Ok(Config { state: t.to, values: v })
        }
        Action::ZeroTest { counter } => {
            if !cfg.values[*counter].is_zero() {
                return Err(StepError::ZeroTestFailed { counter: *counter });
            }
            Ok(Config { state: t.to, values: cfg.values.clone() })
        }
    }
}

/// Fires a whole sequence and returns every visited configuration, the
/// start included.
pub fn replay(machine: &Machine, start: &Config, seq: &[Step]) -> Result<Vec<Config>, ReplayError> {
    let mut configs = Vec::with_capacity(seq.len() + 1);
    configs.push(start.clone());
    for (index, s) in seq.iter().enumerate() {
        let next = step(machine, configs.last().unwrap(), s)
            .map_err(|error| ReplayError { index, step: s.to_string(), error })?;
        configs.push(next);
    }
    Ok(configs)
}

/// Final configuration of a replay.
pub fn run(machine: &Machine, start: &Config, seq: &[Step]) -> Result<Config, ReplayError> {
    replay(machine, start, seq).map(|mut c| c.pop().unwrap())
}

pub fn is_one_bounded(configs: &[Config]) -> bool {
    configs.iter().all(|c| c.values.iter().all(|x| *x <= Rational::one()))
}

/// Closed form of the final vector of an affine run: the product of all
/// matrices applied to the start, plus each scaled delta pushed through the
/// matrices that follow it. Does not check non-negativity.
pub fn marking_equation(machine: &Machine, start: &[Rational], seq: &[Step]) -> Vec<Rational> {
    let dim = machine.dim;
    // suffix[j] = A_l ... A_j, the matrices of step j and later.
    let mut suffix = vec![BigMatrix::identity(dim); seq.len() + 1];
    for j in (0..seq.len()).rev() {
        let m = machine.transitions[seq[j].transition].matrix().expect("marking equation needs affine steps");
        suffix[j] = suffix[j + 1].right_mul(m);
    }
    let mut v = suffix[0].apply(start);
    for (j, s) in seq.iter().enumerate() {
        let delta = machine.transitions[s.transition].delta().unwrap();
        let scaled: Vec<Rational> = delta.iter().map(|x| x * &s.fraction).collect();
        for (acc, x) in v.iter_mut().zip(suffix[j + 1].apply(&scaled)) {
            *acc += x;
        }
    }
    v
}

/// Divides the `i`-th fraction (1-based) by `2^i`.
pub fn rep_half(seq: &[Step]) -> FiringSequence {
    let mut scale = Rational::one();
    let half = Rational::new(1.into(), 2.into());
    seq.iter()
        .map(|s| {
            scale = &scale * &half;
            Step { transition: s.transition, fraction: &s.fraction * &scale }
        })
        .collect()
}

/// Multiplies every fraction by `factor`.
pub fn scale_seq(seq: &[Step], factor: &Rational) -> FiringSequence {
    seq.iter().map(|s| Step { transition: s.transition, fraction: &s.fraction * factor }).collect()
}

pub fn path_of(seq: &[Step]) -> Vec<usize> {
    seq.iter().map(|s| s.transition).collect()
}

/// Total fraction spent on each transition.
pub fn masses(num_transitions: usize, seq: &[Step]) -> Vec<Rational> {
    let mut m = vec![Rational::zero(); num_transitions];
    for s in seq {
        m[s.transition] += &s.fraction;
    }
    m
}

pub fn format_sequence(seq: &[Step]) -> String {
    let parts: Vec<String> = seq.iter().map(Step::to_string).collect();
    parts.join(" ")
}
