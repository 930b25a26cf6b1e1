//! SMT-LIB 2 (QF_LRA) rendering of a linear system.

use std::collections::HashSet;
use std::fmt::Write;

use num_traits::{One, Signed, Zero};

use super::{LinearSystem, Relation};
use crate::num::Rational;

fn is_simple_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn numeral(r: &Rational) -> String {
    let magnitude = r.abs();
    let body = if magnitude.denom().is_one() {
        format!("{}.0", magnitude.numer())
    } else {
        format!("(/ {}.0 {}.0)", magnitude.numer(), magnitude.denom())
    };
    if r.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

/// Variable symbols: the declared name when it is a plain, unique symbol,
/// otherwise `v<id>`.
fn symbols(system: &LinearSystem) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut dupes = HashSet::new();
    for n in system.names() {
        if !seen.insert(n.as_str()) {
            dupes.insert(n.as_str());
        }
    }
    system
        .names()
        .iter()
        .enumerate()
        .map(|(i, n)| {
            if is_simple_symbol(n) && !dupes.contains(n.as_str()) && !(n.starts_with('v') && n[1..].parse::<usize>().is_ok()) {
                n.clone()
            } else {
                format!("v{i}")
            }
        })
        .collect()
}

pub fn to_smtlib(system: &LinearSystem) -> String {
    let syms = symbols(system);
    let mut out = String::from("(set-logic QF_LRA)\n");
    for s in &syms {
        writeln!(out, "(declare-fun {s} () Real)").unwrap();
    }
    for c in system.constraints() {
        let terms: Vec<String> = c
            .coeffs
            .iter()
            .map(|(v, k)| {
                let x = &syms[*v];
                if k.is_one() {
                    x.clone()
                } else if (-k).is_one() {
                    format!("(- {x})")
                } else {
                    format!("(* {} {x})", numeral(k))
                }
            })
            .collect();
        let lhs = match terms.len() {
            0 => numeral(&Rational::zero()),
            1 => terms[0].clone(),
            _ => format!("(+ {})", terms.join(" ")),
        };
        let op = match c.relation {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Eq => "=",
        };
        writeln!(out, "(assert ({op} {lhs} {}))", numeral(&c.rhs)).unwrap();
    }
    out.push_str("(check-sat)\n");
    out
}
