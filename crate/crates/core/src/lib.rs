//! Sequential social learning with nonconformist preferences.
//!
//! Agents arrive one at a time, observe earlier actions, may buy a Gaussian
//! signal of chosen precision, and pick the action that maximizes correctness
//! plus a bonus for choosing the less popular action. The crate computes
//! cutoffs and signal thresholds, solves the precision choice, evaluates
//! welfare under an evaluator weight on the bonus, simulates cascades, and
//! packages the comparative statics as runnable checks.

// Negated float comparisons are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bonus;
pub mod cascade;
pub mod cli;
pub mod error;
pub mod gaussian;
pub mod payoff;
pub mod precision;
pub mod search;
pub mod verify;
pub mod welfare;

pub use error::{ModelError, Result};
