//! Federated nonconvex-PL minimax optimization: local gradient descent
//! ascent with recursive momentum estimators and server-generated diagonal
//! preconditioners, simulated over K clients.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimators;
pub mod federation;
pub mod linalg;
pub mod metrics;
pub mod problems;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
