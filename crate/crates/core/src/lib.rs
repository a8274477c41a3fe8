//! Library for checking probabilistic operational correspondence of a
//! translation from a probabilistic CCS-like calculus into a probabilistic
//! pi-calculus: exact-rational distributions and their lifting, semantics of
//! both calculi, the translation, behavioural equivalence checkers and the
//! correspondence criteria themselves.

pub mod markers;
pub mod prob;
pub mod pccs;
pub mod ppi;
pub mod encode;
pub mod rel;
pub mod poc;
