//! Simulation and nonparametric estimation for one-dimensional jump
//! diffusions driven by a linear exponential Hawkes process.
//!
//! The state is the pair `(X_t, λ_t)` where
//!
//! ```text
//! dX_t = b(X_t) dt + σ(X_t) dW_t + a(X_{t-}) dN_t
//! λ_t  = ξ + (λ_0 - ξ) e^{-βt} + Σ_{T_i < t} α e^{-β(t - T_i)}
//! ```
//!
//! The crate provides exact Hawkes samplers ([`hawkes`]), an Euler scheme for
//! `X` on an event-refined timeline ([`diffusion`]), kernel estimators of the
//! invariant density of `(X, λ)` and of `λ` alone ([`kernel`]), maximum
//! likelihood fitting and intensity reconstruction ([`inference`]), the
//! change-of-measure quantities used to compare the Hawkes law with a Poisson
//! law ([`girsanov`]), and a Monte Carlo harness for bandwidth/variance and
//! rate experiments ([`experiments`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod csvio;
pub mod diffusion;
pub mod error;
pub mod experiments;
pub mod girsanov;
pub mod hawkes;
pub mod inference;
pub mod kernel;
pub mod stats;
pub mod stream;

pub use error::{Error, Result};
