//! Dynamic bidding for truckload brokerage.
//!
//! The crate has two halves. The learning half prices loads with a
//! contextual knowledge-gradient policy over a sampled logistic belief
//! model that is periodically refreshed by bootstrap aggregation
//! ([`choice_model`], [`belief`], [`policies`]). The simulation half is a
//! fleet model with advance booking used to produce carrier responses:
//! an exogenous load generator ([`booking`]), the driver/load state machine
//! ([`fleet`]), a value-function-augmented assignment dispatcher
//! ([`dispatch`]) and a stochastic-lookahead load acceptance policy
//! ([`acceptance`]). [`harness`] wires both halves into reproducible
//! experiments and [`theory`] holds the numerical property suites.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod belief;
pub mod booking;
pub mod choice_model;
pub mod config;
pub mod dispatch;
pub mod error;
pub mod fleet;
pub mod harness;
mod par;
pub mod policies;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
