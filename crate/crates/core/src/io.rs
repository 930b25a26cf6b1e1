//! JSON formats for machines, configurations and firing sequences.
//!
//! Machines refer to states by name. Matrices are written as a list of rows
//! or the string `"identity"`; a transition with a `zero_test` field instead
//! of a matrix is a zero test. Rationals are strings (`"3/4"`) or integers.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::matrix::Matrix;
use crate::model::{Action, Config, FiringSequence, Machine, ModelError, Step};
use crate::num::{format_rational, parse_rational, Rational};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("invalid rational `{0}`")]
    BadRational(String),
    #[error("matrix must be square with {0} rows")]
    BadMatrix(usize),
    #[error("transition {0} needs either a matrix or delta, or a zero_test")]
    BadTransition(usize),
    #[error("cannot parse configuration `{0}`; expected state(v1, ..., vd)")]
    BadConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Serialize, Deserialize)]
struct MachineJson {
    dimension: usize,
    states: Vec<String>,
    transitions: Vec<TransitionJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixJson {
    Named(String),
    Rows(Vec<Vec<i64>>),
}

#[derive(Serialize, Deserialize)]
struct TransitionJson {
    from: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    zero_test: Option<usize>,
    to: String,
}

#[derive(Serialize, Deserialize)]
struct ConfigJson {
    state: String,
    values: Vec<Value>,
}

#[derive(Serialize, Deserialize)]
struct StepJson {
    transition: usize,
    fraction: Value,
}

/// Integers become JSON numbers when they fit, everything else a string.
pub fn rational_to_json(r: &Rational) -> Value {
    if r.is_integer() {
        if let Ok(i) = i64::try_from(r.numer().clone()) {
            return Value::from(i);
        }
    }
    Value::from(format_rational(r))
}

pub fn rational_from_json(v: &Value) -> Result<Rational, FormatError> {
    let text = match v {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        other => return Err(FormatError::BadRational(other.to_string())),
    };
    parse_rational(&text).ok_or(FormatError::BadRational(text))
}

fn values_from_json(vs: &[Value]) -> Result<Vec<Rational>, FormatError> {
    vs.iter().map(rational_from_json).collect()
}

pub fn machine_to_json(m: &Machine) -> Value {
    let transitions = m
        .transitions
        .iter()
        .map(|t| {
            let (matrix, delta, zero_test) = match &t.action {
                Action::Affine { matrix, delta } => {
                    let mj = if matrix.is_identity() { MatrixJson::Named("identity".into()) } else { MatrixJson::Rows(matrix.rows()) };
                    (Some(mj), Some(delta.iter().map(rational_to_json).collect()), None)
                }
                Action::ZeroTest { counter } => (None, None, Some(*counter)),
            };
            TransitionJson { from: m.states[t.from].clone(), matrix, delta, zero_test, to: m.states[t.to].clone() }
        })
        .collect();
    serde_json::to_value(MachineJson { dimension: m.dim, states: m.states.clone(), transitions }).expect("machine serializes")
}

pub fn machine_to_string(m: &Machine) -> String {
    serde_json::to_string_pretty(&machine_to_json(m)).expect("machine serializes")
}

pub fn machine_from_str(text: &str) -> Result<Machine, FormatError> {
    let mj: MachineJson = serde_json::from_str(text)?;
    let mut m = Machine::new(mj.dimension);
    for s in &mj.states {
        m.add_state(s.clone());
    }
    let state = |m: &Machine, name: &str| m.state_index(name).ok_or_else(|| FormatError::UnknownState(name.to_string()));
    for (i, t) in mj.transitions.iter().enumerate() {
        let from = state(&m, &t.from)?;
        let to = state(&m, &t.to)?;
        let action = match (&t.matrix, &t.delta, t.zero_test) {
            (None, None, Some(counter)) => Action::ZeroTest { counter },
            (matrix, delta, None) if matrix.is_some() || delta.is_some() => {
                let matrix = match matrix {
                    None => Matrix::identity(mj.dimension),
                    Some(MatrixJson::Named(n)) if n == "identity" => Matrix::identity(mj.dimension),
                    Some(MatrixJson::Named(_)) => return Err(FormatError::BadMatrix(mj.dimension)),
                    Some(MatrixJson::Rows(rows)) => Matrix::from_rows(rows).ok_or(FormatError::BadMatrix(mj.dimension))?,
                };
                let delta = match delta {
                    None => vec![Rational::from_integer(0.into()); mj.dimension],
                    Some(d) => values_from_json(d)?,
                };
                Action::Affine { matrix, delta }
            }
            _ => return Err(FormatError::BadTransition(i)),
        };
        m.add_transition(from, action, to);
    }
    m.validate()?;
    Ok(m)
}

pub fn config_to_json(m: &Machine, c: &Config) -> Value {
    serde_json::to_value(ConfigJson { state: m.states[c.state].clone(), values: c.values.iter().map(rational_to_json).collect() }).expect("config serializes")
}

pub fn config_from_json(m: &Machine, v: Value) -> Result<Config, FormatError> {
    let cj: ConfigJson = serde_json::from_value(v)?;
    let state = m.state_index(&cj.state).ok_or(FormatError::UnknownState(cj.state))?;
    let cfg = Config::new(state, values_from_json(&cj.values)?);
    m.check_config(&cfg)?;
    Ok(cfg)
}

/// Parses `state(v1, ..., vd)`; for a zero-dimensional machine `state` alone
/// is accepted.
pub fn parse_config(m: &Machine, text: &str) -> Result<Config, FormatError> {
    let text = text.trim();
    let bad = || FormatError::BadConfig(text.to_string());
    let (name, values) = match text.split_once('(') {
        Some((name, rest)) => {
            let inner = rest.strip_suffix(')').ok_or_else(bad)?;
            let values = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner.split(',').map(|s| parse_rational(s).ok_or_else(|| FormatError::BadRational(s.trim().to_string()))).collect::<Result<_, _>>()?
            };
            (name.trim(), values)
        }
        None => (text, Vec::new()),
    };
    let state = m.state_index(name).ok_or_else(|| FormatError::UnknownState(name.to_string()))?;
    let cfg = Config::new(state, values);
    m.check_config(&cfg)?;
    Ok(cfg)
}

pub fn sequence_to_json(seq: &FiringSequence) -> Value {
    serde_json::to_value(seq.iter().map(|s| StepJson { transition: s.transition, fraction: rational_to_json(&s.fraction) }).collect::<Vec<_>>())
        .expect("sequence serializes")
}

pub fn sequence_from_str(text: &str) -> Result<FiringSequence, FormatError> {
    let steps: Vec<StepJson> = serde_json::from_str(text)?;
    steps.iter().map(|s| Ok(Step::new(s.transition, rational_from_json(&s.fraction)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{int, rat};

    #[test]
    fn machine_round_trip() {
        let mut m = Machine::with_states(2, 2);
        m.add_additive(0, &[1, -1], 1);
        m.add_affine(1, Matrix::from_rows(&[vec![0, 1], vec![1, 0]]).unwrap(), vec![int(0), rat(1, 2)], 0);
        m.add_zero_test(1, 1, 1);
        let text = machine_to_string(&m);
        assert_eq!(machine_from_str(&text).unwrap(), m);
        assert!(text.contains("\"identity\""));
    }

    #[test]
    fn accepts_the_documented_shape() {
        let text = r#"{"dimension": 1, "states": ["p", "q"],
            "transitions": [{"from": "p", "matrix": [[2]], "delta": [0], "to": "q"},
                            {"from": "q", "delta": ["-1/2"], "to": "q"}]}"#;
        let m = machine_from_str(text).unwrap();
        assert_eq!(m.transitions.len(), 2);
        assert_eq!(m.transitions[1].delta().unwrap(), &[rat(-1, 2)]);
        assert!(m.transitions[1].matrix().unwrap().is_identity());
        assert!(machine_from_str(r#"{"dimension": 1, "states": ["p"], "transitions": [{"from": "p", "to": "x", "delta": [0]}]}"#).is_err());
    }

    #[test]
    fn configurations_and_sequences() {
        let m = Machine::with_states(2, 2);
        let c = parse_config(&m, "q1(1/2, 3)").unwrap();
        assert_eq!(c, Config::new(1, vec![rat(1, 2), int(3)]));
        assert_eq!(config_from_json(&m, config_to_json(&m, &c)).unwrap(), c);
        assert!(parse_config(&m, "q1(1)").is_err());
        assert!(parse_config(&m, "q1(-1, 0)").is_err());
        let seq = vec![Step::new(0, rat(1, 3)), Step::new(2, int(1))];
        assert_eq!(sequence_from_str(&sequence_to_json(&seq).to_string()).unwrap(), seq);
    }
}
