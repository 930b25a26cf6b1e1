//! Coverability as reachability: after the target state, a fresh sink state
//! can decrement every counter freely.

use crate::model::Machine;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverToReach {
    pub machine: Machine,
    pub sink: usize,
    /// The transition from the target state into the sink.
    pub entry: usize,
}

/// `p(u)` covers `q(v)` in `machine` iff `p(u)` reaches `sink(v)` in the
/// compiled machine.
pub fn compile_cover_to_reach(machine: &Machine, to_state: usize) -> CoverToReach {
    let mut m = machine.clone();
    let sink = m.fresh_state(&format!("{}_cover", machine.states[to_state]));
    let dim = m.dim;
    let entry = m.add_additive(to_state, &vec![0; dim], sink);
    for x in 0..dim {
        let mut delta = vec![0; dim];
        delta[x] = -1;
        m.add_additive(sink, &delta, sink);
    }
    CoverToReach { machine: m, sink, entry }
}
