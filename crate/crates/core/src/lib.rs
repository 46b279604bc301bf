//! Stabilized explicit solvers for stiff stochastic differential equations
//! with a fast/slow drift split.
//!
//! The deterministic core is a Chebyshev multistage scheme whose stage count
//! grows with the square root of the stiffness. For split drift the stiff
//! part is replaced by an averaged force, computed by a short inner chain
//! over an auxiliary horizon, so the outer stage count tracks only the slow
//! spectral radius. The stochastic variants inject (damped) noise through
//! the first stage while keeping mean-square stability on a step size
//! dictated by the slow scale alone.

// Stage kernels index several same-length slices in lockstep and carry their
// full context as arguments; spelling that out reads better than the
// iterator or struct-packing alternatives clippy suggests.
#![allow(clippy::needless_range_loop, clippy::too_many_arguments, clippy::manual_is_multiple_of)]

pub mod brownian;
pub mod chebyshev;
pub mod convergence;
pub mod cost;
pub mod error;
pub mod problem;
pub mod problems;
pub mod rkc;
pub mod skrock;
pub mod spectral;
pub mod stability;
pub mod stages;
mod workspace;

pub use workspace::Workspace;
