//! Structural properties of matrices and the decidability verdicts they
//! imply for reachability, coverability and state reachability.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::matrix::Matrix;
use crate::model::Machine;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MatrixProfile {
    pub non_negative: bool,
    pub negative_entries: BTreeSet<(usize, usize)>,
    pub zero_rows: BTreeSet<usize>,
    pub zero_cols: BTreeSet<usize>,
    /// Entries `(i, j)` with value greater than one.
    pub weighted_edges: BTreeSet<(usize, usize)>,
    /// Triples `(i, j, k)`, `i < j`, with both `A(i,k)` and `A(j,k)` positive.
    pub overlapping_edges: BTreeSet<(usize, usize, usize)>,
    pub is_self_loop: bool,
    pub is_permutation: bool,
    pub is_identity: bool,
    pub is_transfer: bool,
    pub is_reset_diagonal: bool,
}

pub fn profile(m: &Matrix) -> MatrixProfile {
    let n = m.dim();
    let cells = || (0..n).flat_map(move |i| (0..n).map(move |j| (i, j)));
    let negative_entries: BTreeSet<(usize, usize)> = cells().filter(|&(i, j)| m.get(i, j) < 0).collect();
    let non_negative = negative_entries.is_empty();
    let zero_rows = (0..n).filter(|&i| (0..n).all(|j| m.get(i, j) == 0)).collect();
    let zero_cols = (0..n).filter(|&j| (0..n).all(|i| m.get(i, j) == 0)).collect();
    let weighted_edges = cells().filter(|&(i, j)| m.get(i, j) > 1).collect();
    let mut overlapping_edges = BTreeSet::new();
    for k in 0..n {
        for i in 0..n {
            for j in i + 1..n {
                if m.get(i, k) > 0 && m.get(j, k) > 0 {
                    overlapping_edges.insert((i, j, k));
                }
            }
        }
    }
    let is_self_loop = (0..n).all(|i| m.get(i, i) != 0);
    let is_transfer = cells().all(|(i, j)| matches!(m.get(i, j), 0 | 1))
        && (0..n).all(|j| (0..n).filter(|&i| m.get(i, j) != 0).count() <= 1);
    let is_reset_diagonal = cells().all(|(i, j)| if i == j { matches!(m.get(i, j), 0 | 1) } else { m.get(i, j) == 0 });
    MatrixProfile {
        non_negative,
        negative_entries,
        zero_rows,
        zero_cols,
        weighted_edges,
        overlapping_edges,
        is_self_loop,
        is_permutation: m.as_permutation().is_some(),
        is_identity: m.is_identity(),
        is_transfer,
        is_reset_diagonal,
    }
}

/// A non-negative matrix without zero lines, weighted edges or overlapping
/// edges has exactly one positive entry per column, equal to one, in
/// distinct rows: a permutation. Returns `None` when the premise fails and
/// otherwise whether the matrix really is a permutation.
pub fn edge_free_is_permutation(m: &Matrix) -> Option<bool> {
    let p = profile(m);
    let premise = p.non_negative && p.zero_rows.is_empty() && p.zero_cols.is_empty() && p.weighted_edges.is_empty() && p.overlapping_edges.is_empty();
    premise.then_some(p.is_permutation)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Verdict {
    Undecidable,
    DecidableNP,
    DecidablePSPACE,
    DecidableNEXP,
    Unknown,
}

impl Verdict {
    pub fn is_decidable(self) -> bool {
        matches!(self, Verdict::DecidableNP | Verdict::DecidablePSPACE | Verdict::DecidableNEXP)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Undecidable => "undecidable",
            Verdict::DecidableNP => "decidable (NP)",
            Verdict::DecidablePSPACE => "decidable (PSPACE)",
            Verdict::DecidableNEXP => "decidable (NEXP)",
            Verdict::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

/// The structural fact a verdict rests on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Justification {
    /// The machine has zero tests, which simulate counter machines.
    ZeroTest,
    /// Some matrix has a negative entry; zero tests can be simulated.
    NegativeEntry,
    /// Some matrix has a zero row or column; resets can be simulated.
    ZeroRowOrColumn,
    /// Some matrix has a weight above one or two rows sharing a column.
    WeightedOrOverlappingEdge,
    /// Non-negative matrices: graph search over state and counter support.
    SupportAbstraction,
    /// Non-negative self-loop matrices: pumping and coverability certificates.
    SelfLoopCoverability,
    /// Identity matrices: continuous VASS reachability.
    ContinuousVass,
    /// Permutation matrices: product with the generated permutation group.
    PermutationProduct,
    /// Identity matrices, complexity bound.
    IdentityComplexity,
    /// Self-loop matrices, state reachability in NP.
    SelfLoopStateComplexity,
    /// No known procedure for this combination.
    Open,
}

impl fmt::Display for Justification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Justification::ZeroTest => "zero-test",
            Justification::NegativeEntry => "negative-entry",
            Justification::ZeroRowOrColumn => "zero-row-or-column",
            Justification::WeightedOrOverlappingEdge => "weighted-or-overlapping-edge",
            Justification::SupportAbstraction => "support-abstraction",
            Justification::SelfLoopCoverability => "self-loop-coverability",
            Justification::ContinuousVass => "continuous-vass",
            Justification::PermutationProduct => "permutation-product",
            Justification::IdentityComplexity => "identity-complexity",
            Justification::SelfLoopStateComplexity => "self-loop-state-complexity",
            Justification::Open => "open",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Judgement {
    pub verdict: Verdict,
    pub justification: Justification,
}

impl Judgement {
    fn new(verdict: Verdict, justification: Justification) -> Self {
        Judgement { verdict, justification }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub reach: Judgement,
    pub cover: Judgement,
    pub state_reach: Judgement,
}

/// Verdicts for the class generated by the given matrices.
pub fn classify_matrices<'a>(matrices: impl IntoIterator<Item = &'a Matrix>) -> Classification {
    use Justification as J;
    use Verdict as V;
    let profiles: Vec<MatrixProfile> = matrices.into_iter().map(profile).collect();
    let all = |f: fn(&MatrixProfile) -> bool| profiles.iter().all(f);
    let any = |f: fn(&MatrixProfile) -> bool| profiles.iter().any(f);
    if any(|p| !p.non_negative) {
        let u = Judgement::new(V::Undecidable, J::NegativeEntry);
        return Classification { reach: u, cover: u, state_reach: u };
    }
    let self_loop_state = |pspace_reason| {
        if all(|p| p.is_self_loop) {
            Judgement::new(V::DecidableNP, J::SelfLoopStateComplexity)
        } else {
            Judgement::new(V::DecidablePSPACE, pspace_reason)
        }
    };
    if any(|p| !p.zero_rows.is_empty() || !p.zero_cols.is_empty()) {
        let u = Judgement::new(V::Undecidable, J::ZeroRowOrColumn);
        return Classification { reach: u, cover: u, state_reach: self_loop_state(J::SupportAbstraction) };
    }
    if any(|p| !p.weighted_edges.is_empty() || !p.overlapping_edges.is_empty()) {
        let cover = if all(|p| p.is_self_loop) {
            Judgement::new(V::DecidableNP, J::SelfLoopCoverability)
        } else {
            Judgement::new(V::Unknown, J::Open)
        };
        return Classification {
            reach: Judgement::new(V::Undecidable, J::WeightedOrOverlappingEdge),
            cover,
            state_reach: self_loop_state(J::SupportAbstraction),
        };
    }
    // Non-negative, no zero lines, no weights, no overlaps: every matrix is a
    // permutation matrix.
    debug_assert!(all(|p| p.is_permutation));
    if all(|p| p.is_identity) {
        let np = Judgement::new(V::DecidableNP, J::ContinuousVass);
        Classification { reach: np, cover: np, state_reach: Judgement::new(V::DecidableNP, J::IdentityComplexity) }
    } else {
        let nexp = Judgement::new(V::DecidableNEXP, J::PermutationProduct);
        Classification { reach: nexp, cover: nexp, state_reach: Judgement::new(V::DecidablePSPACE, J::SupportAbstraction) }
    }
}

pub fn classify_machine(machine: &Machine) -> Classification {
    if machine.has_zero_tests() {
        let u = Judgement::new(Verdict::Undecidable, Justification::ZeroTest);
        return Classification { reach: u, cover: u, state_reach: u };
    }
    classify_matrices(machine.matrices())
}
