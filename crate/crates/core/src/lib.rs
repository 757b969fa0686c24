//! Solvers and moving-plane diagnostics for coupled Monge-Ampère systems
//! `det D²uⁱ = fⁱ(x, u, ∇uⁱ)` with constant Dirichlet data on convex domains.

// `!(x > 0.0)` is deliberate: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod error;
pub mod expr;
pub mod fd;
pub mod geometry;
pub mod grid;
pub mod hypotheses;
pub mod linalg;
pub mod moving_plane;
pub mod par;
pub mod radial;
pub mod rhs;
pub mod sparse;
pub mod svg;

pub use error::{DivergenceReport, Error, Result};
