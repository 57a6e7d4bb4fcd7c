//! Retrospective evaluation of age-dependent vaccine allocation strategies.
//!
//! The crate combines three pieces:
//!
//! - a factorised severity model `P(S=1|V,A,T,W) = f0(T) g(V,A) h^V(W) f1(A,T)` estimated
//!   from stratified severe-case data ([`severity`]),
//! - an age-structured discrete renewal model of infections whose base reproduction
//!   numbers are inferred by MCMC ([`dynamics`], [`inference`]),
//! - allocation strategies as joint distributions over dose weeks ([`strategy`]) that are
//!   pushed through both models to obtain counterfactual severe-case incidence
//!   ([`counterfactual`]).
//!
//! Week indices are zero-based inside the library. A dose that is never received within
//! the `m`-week window is encoded by the sentinel week `m`. Files on disk use one-based
//! weeks with sentinel `m + 1`.

pub mod counterfactual;
pub mod data;
pub mod dynamics;
mod error;
pub mod inference;
pub mod severity;
pub mod stats;
pub mod strategy;

pub use error::{Error, Result};

/// Number of vaccine doses tracked per person.
pub const DOSES: usize = 3;

/// Number of vaccination states `V ∈ {0, 1, 2, 3}`.
pub const STATES: usize = DOSES + 1;
