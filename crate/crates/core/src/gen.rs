//! Seeded random machines, configurations and runs.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classify::profile;
use crate::matrix::Matrix;
use crate::model::{step, Action, Config, FiringSequence, Machine, Step};
use crate::num::{int, rat, Rational};
use crate::reductions::boolean::{BoolOp, BoolTransition, BooleanProgram};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Family {
    Identity,
    /// The identity and one fixed permutation matrix per machine.
    Permutation,
    /// Diagonal 0/1 matrices.
    Reset,
    SelfLoop,
    NonNegative,
    Arbitrary,
}

impl Family {
    pub const ALL: [Family; 6] = [Family::Identity, Family::Permutation, Family::Reset, Family::SelfLoop, Family::NonNegative, Family::Arbitrary];

    pub fn name(self) -> &'static str {
        match self {
            Family::Identity => "identity",
            Family::Permutation => "permutation",
            Family::Reset => "reset",
            Family::SelfLoop => "self-loop",
            Family::NonNegative => "non-negative",
            Family::Arbitrary => "arbitrary",
        }
    }

    pub fn contains(self, m: &Matrix) -> bool {
        let p = profile(m);
        match self {
            Family::Identity => p.is_identity,
            Family::Permutation => p.is_permutation,
            Family::Reset => p.is_reset_diagonal,
            Family::SelfLoop => p.non_negative && p.is_self_loop,
            Family::NonNegative => p.non_negative,
            Family::Arbitrary => true,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| format!("unknown family `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenConfig {
    pub seed: u64,
    pub family: Family,
    pub dims: RangeInclusive<usize>,
    pub states: RangeInclusive<usize>,
    pub transitions: RangeInclusive<usize>,
    /// Largest absolute matrix entry.
    pub entry_max: i64,
    pub deltas: RangeInclusive<i64>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { seed: 0, family: Family::Identity, dims: 1..=3, states: 1..=3, transitions: 1..=4, entry_max: 2, deltas: -2..=2 }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_permutation(rng: &mut impl Rng, dim: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..dim).collect();
    if dim < 2 {
        return p;
    }
    while p.iter().enumerate().all(|(i, &x)| i == x) {
        p.shuffle(rng);
    }
    p
}

/// A matrix of the family. `perm` is the machine's fixed permutation for
/// [`Family::Permutation`].
pub fn random_matrix(rng: &mut impl Rng, family: Family, dim: usize, entry_max: i64, perm: &[usize]) -> Matrix {
    let keep_identity = rng.gen_bool(1.0 / 3.0);
    let top = entry_max.max(1);
    match family {
        Family::Identity => Matrix::identity(dim),
        Family::Permutation => {
            if rng.gen_bool(0.5) {
                Matrix::identity(dim)
            } else {
                Matrix::permutation(perm)
            }
        }
        Family::Reset => {
            let mut m = Matrix::identity(dim);
            for i in 0..dim {
                if rng.gen_bool(1.0 / 3.0) {
                    m.set(i, i, 0);
                }
            }
            m
        }
        _ if keep_identity => Matrix::identity(dim),
        Family::SelfLoop => {
            let mut m = Matrix::zero(dim);
            for i in 0..dim {
                for j in 0..dim {
                    let v = if i == j {
                        rng.gen_range(1..=top)
                    } else if rng.gen_bool(0.25) {
                        rng.gen_range(1..=top)
                    } else {
                        0
                    };
                    m.set(i, j, v);
                }
            }
            m
        }
        Family::NonNegative | Family::Arbitrary => {
            let low = if family == Family::Arbitrary { -entry_max } else { 0 };
            let mut m = Matrix::zero(dim);
            for i in 0..dim {
                for j in 0..dim {
                    let dense = if i == j { 0.7 } else { 0.3 };
                    if rng.gen_bool(dense) {
                        m.set(i, j, rng.gen_range(low..=entry_max));
                    }
                }
            }
            m
        }
    }
}

pub fn random_machine(rng: &mut impl Rng, cfg: &GenConfig) -> Machine {
    let dim = rng.gen_range(cfg.dims.clone());
    let states = rng.gen_range(cfg.states.clone());
    let count = rng.gen_range(cfg.transitions.clone());
    let perm = random_permutation(rng, dim);
    let mut m = Machine::with_states(dim, states);
    for _ in 0..count {
        let from = rng.gen_range(0..states);
        let to = rng.gen_range(0..states);
        let matrix = random_matrix(rng, cfg.family, dim, cfg.entry_max, &perm);
        let delta = (0..dim).map(|_| int(rng.gen_range(cfg.deltas.clone()))).collect();
        m.add_affine(from, matrix, delta, to);
    }
    debug_assert!(m.matrices().all(|a| cfg.family.contains(a)));
    m
}

/// Values drawn from {0, 1/2, 1, 3/2, 2}.
pub fn random_values(rng: &mut impl Rng, dim: usize) -> Vec<Rational> {
    (0..dim).map(|_| rat(rng.gen_range(0..=4), 2)).collect()
}

const FRACTIONS: [(i64, i64); 4] = [(1, 1), (1, 2), (1, 3), (1, 4)];

/// A feasible run of at most `max_len` steps: each step takes a random
/// outgoing transition and fraction that keep the configuration valid, and
/// the run stops early when nothing can fire.
pub fn random_run(rng: &mut impl Rng, machine: &Machine, start: &Config, max_len: usize) -> FiringSequence {
    let mut cfg = start.clone();
    let mut seq = Vec::new();
    for _ in 0..max_len {
        let mut candidates: Vec<usize> = machine.outgoing(cfg.state).collect();
        candidates.shuffle(rng);
        let mut fired = false;
        'search: for t in candidates {
            let mut fractions = FRACTIONS;
            fractions.shuffle(rng);
            if matches!(machine.transitions[t].action, Action::ZeroTest { .. }) {
                fractions = [(1, 1); 4];
            }
            for (n, d) in fractions {
                let s = Step::new(t, rat(n, d));
                if let Ok(next) = step(machine, &cfg, &s) {
                    cfg = next;
                    seq.push(s);
                    fired = true;
                    break 'search;
                }
            }
        }
        if !fired {
            break;
        }
    }
    seq
}

/// A machine with additive transitions and, with probability one third per
/// transition, zero tests.
pub fn random_zero_test_machine(rng: &mut impl Rng, cfg: &GenConfig) -> Machine {
    let dim = rng.gen_range(cfg.dims.clone());
    let states = rng.gen_range(cfg.states.clone());
    let count = rng.gen_range(cfg.transitions.clone());
    let mut m = Machine::with_states(dim, states);
    for _ in 0..count {
        let from = rng.gen_range(0..states);
        let to = rng.gen_range(0..states);
        if rng.gen_bool(1.0 / 3.0) {
            m.add_zero_test(from, rng.gen_range(0..dim), to);
        } else {
            let delta: Vec<i64> = (0..dim).map(|_| rng.gen_range(cfg.deltas.clone())).collect();
            m.add_additive(from, &delta, to);
        }
    }
    m
}

pub fn random_boolean_program(rng: &mut impl Rng, vars: RangeInclusive<usize>, states: RangeInclusive<usize>, transitions: RangeInclusive<usize>) -> BooleanProgram {
    let vars = rng.gen_range(vars);
    let states = rng.gen_range(states);
    let count = rng.gen_range(transitions);
    let transitions = (0..count)
        .map(|_| BoolTransition {
            from: rng.gen_range(0..states),
            op: if rng.gen_bool(0.5) { BoolOp::Test } else { BoolOp::Set },
            var: rng.gen_range(0..vars),
            value: rng.gen_bool(0.5),
            to: rng.gen_range(0..states),
        })
        .collect();
    BooleanProgram { vars, states: (0..states).map(|i| format!("b{i}")).collect(), transitions }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub machine: Machine,
    pub start: Config,
    /// Endpoints of random runs from `start`, then random configurations.
    pub samples: Vec<Config>,
}

pub fn gen_random(cfg: &GenConfig) -> Instance {
    let mut r = rng(cfg.seed);
    let machine = random_machine(&mut r, cfg);
    let start = Config::new(0, random_values(&mut r, machine.dim));
    let mut samples = Vec::new();
    for _ in 0..2 {
        let len = r.gen_range(0..=4);
        let seq = random_run(&mut r, &machine, &start, len);
        samples.push(crate::model::run(&machine, &start, &seq).expect("random runs are feasible"));
    }
    for _ in 0..2 {
        let state = r.gen_range(0..machine.states.len());
        samples.push(Config::new(state, random_values(&mut r, machine.dim)));
    }
    Instance { machine, start, samples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::run;

    #[test]
    fn families_are_respected() {
        for family in Family::ALL {
            for seed in 0..30 {
                let inst = gen_random(&GenConfig { seed, family, ..GenConfig::default() });
                assert!(inst.machine.matrices().all(|m| family.contains(m)), "{family} seed {seed}");
                assert!(inst.machine.validate().is_ok());
            }
        }
        assert_eq!("self-loop".parse::<Family>(), Ok(Family::SelfLoop));
    }

    #[test]
    fn same_seed_same_instance() {
        let cfg = GenConfig { seed: 7, family: Family::Arbitrary, ..GenConfig::default() };
        assert_eq!(gen_random(&cfg), gen_random(&cfg));
    }

    #[test]
    fn random_runs_replay() {
        let mut r = rng(3);
        for _ in 0..50 {
            let m = random_machine(&mut r, &GenConfig { family: Family::Arbitrary, ..GenConfig::default() });
            let start = Config::new(0, random_values(&mut r, m.dim));
            let seq = random_run(&mut r, &m, &start, 6);
            assert!(run(&m, &start, &seq).is_ok());
        }
    }
}
