//! Online-learning regret inequalities and martingale tail bounds, made
//! executable.
//!
//! A regret inequality is a deterministic statement: a prediction strategy
//! guarantees, for *every* input sequence, that its cumulative linear loss
//! stays within an explicit envelope of the best fixed comparator. Feeding a
//! martingale difference sequence through such a strategy turns the same
//! inequality into a tail bound for the norm of the martingale, and
//! integrating the tail recovers an in-expectation bound. This crate
//! implements each leg of that loop:
//!
//! * [`strategies`] — gradient descent and adaptive mirror descent with
//!   their pathwise guarantees, verifiers, and an adversarial search that
//!   stress-tests the "for all sequences" quantifier.
//! * [`minimax`] — exact backward-induction values of finite prediction
//!   games, strategy extraction, and the sufficient conditions certifying
//!   that a regret-minimizing strategy exists.
//! * [`trees`] — sign paths, decorated dyadic trees, and finite function
//!   classes: the combinatorial substrate for every exact computation.
//! * [`complexity`] — sequential Rademacher complexity (plain and offset),
//!   sequential covering numbers, fat-shattering dimension, and closed-form
//!   complexity constants.
//! * [`tailbounds`] — every analytic tail envelope as an evaluatable
//!   function, plus the comparison and balancing transforms that map
//!   envelopes to envelopes.
//! * [`simulate`] — martingale samplers with tangent sequences, exact
//!   conditional variations, and Monte Carlo comparison of empirical tails
//!   against the analytic envelopes.
//! * [`cli`] — the batch experiment runner behind the `pathwise` binary.

pub mod cli;
pub mod complexity;
pub mod error;
pub mod minimax;
pub mod simulate;
pub mod strategies;
pub mod tailbounds;
pub mod trees;
pub mod util;

pub use error::{Error, Result};
