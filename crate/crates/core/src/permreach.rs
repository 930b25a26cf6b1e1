//! Reachability and coverability when every matrix is a permutation matrix.
//!
//! Applying a permutation only renames counters, so the renaming can be
//! moved into the control state: the product machine tracks the composite
//! permutation applied so far and keeps the counters in their original
//! positions. It has identity matrices only and is decided by [`crate::cvass`].
//! Only composite permutations reachable in the state graph are generated.

use std::collections::{HashMap, VecDeque};

use num_traits::Zero;
use thiserror::Error;

use crate::cvass::{self, CvassError, CvassOptions, ReachOutcome};
use crate::matrix::{perm, Matrix};
use crate::model::{run, Config, FiringSequence, Machine, ModelError, Step};
use crate::num::{int, Rational};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PermError {
    #[error("transition {0} is not a permutation matrix")]
    NotPermutation(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cvass(#[from] CvassError),
}

pub fn check_permutation(machine: &Machine) -> Result<(), PermError> {
    for (id, t) in machine.transitions.iter().enumerate() {
        if t.matrix().and_then(Matrix::as_permutation).is_none() {
            return Err(PermError::NotPermutation(id));
        }
    }
    Ok(())
}

/// A machine whose transitions each have an identity matrix or a zero
/// delta, with the origin of every transition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Normalized {
    pub machine: Machine,
    /// Original transition of each new transition.
    pub origin: Vec<usize>,
    /// Whether the new transition carries the delta of its origin; the
    /// other half of a split transition only applies the matrix.
    pub carries_delta: Vec<bool>,
}

/// Splits every transition with both a non-identity matrix and a non-zero
/// delta into a matrix step and an additive step through a fresh state.
pub fn normalize(machine: &Machine) -> Normalized {
    let mut m = Machine::new(machine.dim);
    m.states = machine.states.clone();
    let mut origin = Vec::new();
    let mut carries_delta = Vec::new();
    for (id, t) in machine.transitions.iter().enumerate() {
        let mixed = matches!((t.matrix(), t.delta()), (Some(a), Some(b)) if !a.is_identity() && b.iter().any(|x| !x.is_zero()));
        if mixed {
            let mid = m.fresh_state(&format!("{}_t{id}", machine.states[t.from]));
            m.add_affine(t.from, t.matrix().unwrap().clone(), vec![Rational::zero(); machine.dim], mid);
            m.add_affine(mid, Matrix::identity(machine.dim), t.delta().unwrap().to_vec(), t.to);
            origin.extend([id, id]);
            carries_delta.extend([false, true]);
        } else {
            m.add_transition(t.from, t.action.clone(), t.to);
            origin.push(id);
            carries_delta.push(true);
        }
    }
    Normalized { machine: m, origin, carries_delta }
}

/// A state of the normalized machine together with the composite
/// permutation applied so far: the real counter vector is the stored one
/// moved by `perm`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductState {
    pub state: usize,
    pub perm: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Product {
    pub normalized: Normalized,
    pub machine: Machine,
    pub states: Vec<ProductState>,
    /// Normalized transition behind each product transition.
    pub origin: Vec<usize>,
}

impl Product {
    pub fn index(&self, s: &ProductState) -> Option<usize> {
        self.states.iter().position(|p| p == s)
    }

    /// Product states over `state`, in discovery order.
    pub fn copies_of(&self, state: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.states.len()).filter(move |&i| self.states[i].state == state)
    }

    /// Distinct composite permutations that occur.
    pub fn group_size(&self) -> usize {
        let mut perms: Vec<&Vec<usize>> = self.states.iter().map(|s| &s.perm).collect();
        perms.sort();
        perms.dedup();
        perms.len()
    }

    /// Maps a product run back to the original machine: matrix halves of
    /// split transitions are dropped, everything else fires with the same
    /// fraction, and matrix steps without a delta fire with fraction one.
    pub fn pull_back(&self, seq: &FiringSequence) -> FiringSequence {
        let n = &self.normalized;
        seq.iter()
            .filter_map(|s| {
                let t = self.origin[s.transition];
                let original = n.origin[t];
                let split = n.origin.iter().filter(|&&o| o == original).count() == 2;
                if split && !n.carries_delta[t] {
                    return None;
                }
                let is_perm_step = !n.machine.transitions[t].matrix().unwrap().is_identity();
                Some(Step::new(original, if is_perm_step { int(1) } else { s.fraction.clone() }))
            })
            .collect()
    }
}

/// Builds the product reachable from `(start, identity)`.
pub fn build_product(machine: &Machine, start: usize) -> Result<Product, PermError> {
    machine.validate()?;
    check_permutation(machine)?;
    let normalized = normalize(machine);
    let nm = &normalized.machine;
    let dim = machine.dim;
    let origin_state = ProductState { state: start, perm: perm::identity(dim) };
    let mut index: HashMap<ProductState, usize> = HashMap::from([(origin_state.clone(), 0)]);
    let mut states = vec![origin_state];
    let mut product = Machine::new(dim);
    let mut edges: Vec<(usize, Vec<Rational>, ProductState, usize)> = Vec::new();
    let mut queue = VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        let here = states[i].clone();
        for t in nm.outgoing(here.state) {
            let tr = &nm.transitions[t];
            let sigma = tr.matrix().unwrap().as_permutation().unwrap();
            let composite = perm::compose(&sigma, &here.perm);
            // the stored vector lives in original positions: move the delta back
            let delta = Matrix::permutation(&perm::inverse(&here.perm)).apply(tr.delta().unwrap());
            let next = ProductState { state: tr.to, perm: composite };
            if !index.contains_key(&next) {
                index.insert(next.clone(), states.len());
                queue.push_back(states.len());
                states.push(next.clone());
            }
            edges.push((i, delta, next, t));
        }
    }
    for s in &states {
        product.add_state(format!("{}{:?}", nm.states[s.state], s.perm));
    }
    let mut origin = Vec::new();
    for (from, delta, next, t) in edges {
        product.add_affine(from, Matrix::identity(dim), delta, index[&next]);
        origin.push(t);
    }
    Ok(Product { normalized, machine: product, states, origin })
}

/// Stored product values for the real `values` once `perm_applied` has
/// been applied.
fn stored_values(perm_applied: &[usize], values: &[Rational]) -> Vec<Rational> {
    Matrix::permutation(&perm::inverse(perm_applied)).apply(values)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Goal {
    Reach,
    Cover,
}

fn decide(machine: &Machine, from: &Config, to: &Config, opts: CvassOptions, goal: Goal) -> Result<ReachOutcome, PermError> {
    machine.check_config(from)?;
    machine.check_config(to)?;
    let product = build_product(machine, from.state)?;
    let start = Config::new(0, from.values.clone());
    let mut unknown = false;
    for i in product.copies_of(to.state) {
        let target = Config::new(i, stored_values(&product.states[i].perm, &to.values));
        let outcome = match goal {
            Goal::Reach => cvass::reach(&product.machine, &start, &target, opts)?,
            Goal::Cover => cvass::cover(&product.machine, &start, &target, opts)?,
        };
        match outcome {
            ReachOutcome::Yes { witness, certificate } => {
                let pulled = product.pull_back(&witness);
                let end = run(machine, from, &pulled).map_err(|e| CvassError::Internal(format!("pulled-back witness fails: {e}")))?;
                let ok = end.state == to.state
                    && match goal {
                        Goal::Reach => end.values == to.values,
                        Goal::Cover => crate::num::vec_ge(&end.values, &to.values),
                    };
                if !ok {
                    return Err(CvassError::Internal("pulled-back witness misses the target".into()).into());
                }
                return Ok(ReachOutcome::Yes { witness: pulled, certificate });
            }
            ReachOutcome::Unknown => unknown = true,
            ReachOutcome::No => {}
        }
    }
    Ok(if unknown { ReachOutcome::Unknown } else { ReachOutcome::No })
}

pub fn reach(machine: &Machine, from: &Config, to: &Config, opts: CvassOptions) -> Result<ReachOutcome, PermError> {
    decide(machine, from, to, opts, Goal::Reach)
}

/// Coverability; a zero target asks whether the state is reachable at all.
pub fn cover(machine: &Machine, from: &Config, to: &Config, opts: CvassOptions) -> Result<ReachOutcome, PermError> {
    decide(machine, from, to, opts, Goal::Cover)
}
