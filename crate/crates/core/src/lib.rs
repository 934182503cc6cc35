//! Numerical laboratory for time-fractional Hamilton-Jacobi equations
//!
//! ```text
//! ∂_t^α u + F(x, Du) = f(x)   on T^N × (0, ∞),   u(·, 0) = g
//! ```
//!
//! with a Caputo time derivative of order `α ∈ (0, 1)`. The crate is split by
//! concern:
//!
//! - [`frac_core`]: time grids, sampled paths, the L1 Caputo discretization,
//!   the Marchaud (difference-quotient) form and the Abel integral.
//! - [`special_fn`]: Γ, Mittag-Leffler `E_α`, the normalized incomplete beta
//!   `B_α[z0, z1]` and its inverse at level 1/2.
//! - [`counterexample`]: a bounded function with nonnegative Caputo
//!   derivative that does not converge as `t → ∞`.
//! - [`frac_ode`]: the relaxation equation `∂_t^α E + A|E|^k = 0`.
//! - [`hj_evolve`]: torus grids, the ergodic problem, the Aubry set, the L1 +
//!   Godunov evolution scheme and the large-time diagnostics.
//! - [`cli`]: configuration parsing, dispatch and CSV emission.

pub mod cli;
pub mod counterexample;
pub mod error;
pub mod frac_core;
pub mod frac_ode;
pub mod hj_evolve;
mod quad;
pub mod special_fn;

pub use error::{Error, Result};
pub use frac_core::{CaputoWeights, FractionalOrder, GridKind, SampledPath, TimeGrid};
