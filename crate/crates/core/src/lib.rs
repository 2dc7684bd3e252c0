//! Rate-optimal control for resource-constrained multi-type branching
//! processes.
//!
//! A population of `K` types evolves as `w(t+1) = R s(t)`, where the
//! reproductive sub-population `s(t)` must satisfy a per-step linear budget
//! `‖s‖_q ≤ β‖w‖_p` and dominance `s ⪯ w`. This crate computes the optimal
//! population mixture that maximizes the asymptotic growth rate, and
//! validates it three ways: deterministic rollout, integer-valued stochastic
//! simulation, and a discretized value-iteration oracle on the simplex.
//!
//! Module map:
//! - [`model`] — problem instances, canonicalization, simplex geometry,
//!   action-set predicates, spectral radius.
//! - [`detproc`] — deterministic trajectory engine and reference policies.
//! - [`optimizer`] — closed-form (`K = 2`) and grid-search fixed-point
//!   solvers, uniform baseline, budget thresholds.
//! - [`mdp`] — discounted value iteration on a simplex lattice; an
//!   independent numerical estimate of the optimal growth rate.
//! - [`stochastic`] — integer branching simulator with Monte Carlo
//!   extinction/growth statistics.
//! - [`kinetics`] — active/quiescent cell-cycle ODE discretization into a
//!   reproduction matrix.
//! - [`cli`] — command implementations behind the `branchrate` binary.

pub mod cli;
pub mod detproc;
pub mod kinetics;
pub mod mdp;
pub mod model;
pub mod optimizer;
pub mod stochastic;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
