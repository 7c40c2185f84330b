//! Subharmonic solutions of periodically forced planar systems
//! `α' = ω(A) + εF(α, A, t)`, `A' = εG(α, A, t)` near a resonant torus
//! `ω(A0) = p/q`, including zeros of the Melnikov function of any finite order.
//!
//! The crate computes the Melnikov function and its zeros, the double series of
//! the auxiliary system in `(ε, β0)`, the Newton–Puiseux branches of the
//! bifurcation equation, and the resulting fractional-power series in
//! `η = |ε|^{1/𝔭}`. A tree-expansion oracle and numerical verifiers
//! cross-check the results.

pub mod coefficients;
pub mod error;
pub mod io;
pub mod eta;
pub mod melnikov;
pub mod pipeline;
pub mod puiseux;
pub mod realroots;
pub mod scalar;
pub mod series;
#[cfg(feature = "oracle")]
pub mod trees;
pub mod trig;
pub mod verify;

pub use error::{Error, Result};
