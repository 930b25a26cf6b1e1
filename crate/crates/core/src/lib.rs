//! Decision procedures for affine continuous vector addition systems with
//! states: exact semantics, a bounded search oracle, support-abstraction
//! state reachability, reachability for identity and permutation classes,
//! coverability for self-loop classes, and the compilers between them.

pub mod classify;
pub mod cvass;
pub mod gen;
pub mod io;
pub mod lra;
pub mod matrix;
pub mod model;
pub mod num;
pub mod oracle;
pub mod permreach;
pub mod reductions;
pub mod selfloopcover;
pub mod statereach;
