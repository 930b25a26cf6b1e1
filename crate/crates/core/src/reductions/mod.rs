//! Compilers between problems and machine classes. Each one is checked
//! differentially: the source is decided independently and compared with
//! the compiled instance.

pub mod boolean;
pub mod cover;
pub mod resets;
pub mod zerotest;

use num_traits::{One, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::io::{config_to_json, machine_to_json};
use crate::model::{Config, Machine, ModelError};
use crate::num::Rational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("the source must use identity matrices and zero tests only (transition {0})")]
    NotZeroTest(usize),
    #[error("the source must use diagonal 0/1 matrices only (transition {0})")]
    NotReset(usize),
    #[error("configuration values must lie in [0, 1]")]
    NotOneBounded,
    #[error("the gadget matrix {0}")]
    BadGadget(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Where the counters of a source machine live in a compiled machine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub dim: usize,
    /// Target counter simulating each source counter.
    pub primary: Vec<usize>,
    /// Counter holding one minus the source value, if any.
    pub complement: Vec<Option<usize>>,
}

impl Layout {
    pub fn plain(dim: usize, primary: Vec<usize>) -> Self {
        let complement = vec![None; primary.len()];
        Layout { dim, primary, complement }
    }

    /// Source values in their primary counters, complements filled up to
    /// one, every other counter zero.
    pub fn encode(&self, values: &[Rational]) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.dim];
        for (i, v) in values.iter().enumerate() {
            out[self.primary[i]] = v.clone();
            if let Some(c) = self.complement[i] {
                out[c] = Rational::one() - v;
            }
        }
        out
    }

    pub fn decode(&self, values: &[Rational]) -> Vec<Rational> {
        self.primary.iter().map(|&x| values[x].clone()).collect()
    }

    /// Whether `values` is the encoding of some source vector.
    pub fn is_encoding(&self, values: &[Rational]) -> bool {
        self.encode(&self.decode(values)) == values
    }

    /// Places a source delta: on primaries, and negated on complements.
    pub fn delta(&self, delta: &[Rational]) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.dim];
        for (i, v) in delta.iter().enumerate() {
            out[self.primary[i]] = v.clone();
            if let Some(c) = self.complement[i] {
                out[c] = -v;
            }
        }
        out
    }

    fn to_json(&self) -> Value {
        json!({ "dimension": self.dim, "primary": self.primary, "complement": self.complement })
    }
}

/// A compiled machine with the translation of configurations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Compiled {
    pub machine: Machine,
    pub layout: Layout,
    /// Target state of each source state.
    pub states: Vec<usize>,
    /// Start and goal of the compiled question, when the compiler fixes
    /// them.
    pub from: Option<Config>,
    pub to: Option<Config>,
}

impl Compiled {
    /// The compiled configuration standing for a source configuration.
    pub fn config(&self, source: &Config) -> Config {
        Config::new(self.states[source.state], self.layout.encode(&source.values))
    }

    pub fn to_json(&self) -> Value {
        let cfg = |c: &Option<Config>| c.as_ref().map(|c| config_to_json(&self.machine, c)).unwrap_or(Value::Null);
        json!({
            "machine": machine_to_json(&self.machine),
            "layout": self.layout.to_json(),
            "states": self.states.iter().map(|&s| self.machine.states[s].clone()).collect::<Vec<_>>(),
            "from": cfg(&self.from),
            "to": cfg(&self.to),
        })
    }
}

/// Extends a source delta with zeros for the extra counters.
pub(crate) fn padded(delta: &[Rational], dim: usize) -> Vec<Rational> {
    let mut out = delta.to_vec();
    out.resize(dim, Rational::zero());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{int, rat};

    #[test]
    fn complements_fill_up_to_one() {
        let l = Layout { dim: 3, primary: vec![0], complement: vec![Some(2)] };
        let e = l.encode(&[rat(1, 3)]);
        assert_eq!(e, vec![rat(1, 3), int(0), rat(2, 3)]);
        assert!(l.is_encoding(&e));
        assert!(!l.is_encoding(&[rat(1, 3), int(1), rat(2, 3)]));
        assert_eq!(l.delta(&[int(2)]), vec![int(2), int(0), int(-2)]);
    }
}
