//! Infinite-horizon dynamic programming with state-dependent discounting.
//!
//! The discount factor is a function of an exogenous finite Markov state
//! rather than a constant. Solvability hinges on the spectral radius of the
//! discount operator `L[i][j] = beta_i * Q[i][j]` being below one; this crate
//! certifies that condition with two-sided bounds, solves dynamic programs by
//! value function iteration and Howard policy iteration under the
//! certificate, and cross-checks optimality against brute-force policy
//! enumeration on small instances.

pub mod discounting;
pub mod dp;
pub mod instances;
pub mod linalg;
pub mod markov;
pub mod models;
pub mod util;
