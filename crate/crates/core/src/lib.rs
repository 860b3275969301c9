//! Multiparameter precision analysis for SU(2), SU(1,1) and Heisenberg-Weyl
//! unitaries on truncated bosonic Fock spaces.
//!
//! The pipeline is: build a [`operators::FockBasis`] and generator set, build a
//! probe with [`states::make_state`], then compute the QFIM
//! ([`estimation::qfim_pure`]) or the method-of-moments precision
//! ([`estimation::analyze`]). [`montecarlo`] checks the moment predictions by
//! sampling, and [`scenarios`] bundles the standard reproductions.

pub mod adjoint;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod montecarlo;
pub mod operators;
pub mod propagator;
pub mod scenarios;
pub mod sparse;
pub mod states;

pub use error::{Error, Result};
