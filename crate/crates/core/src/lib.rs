//! Small-amplitude internal solitary waves in a continuously stratified fluid,
//! the Casimir-corrected energy and momentum functionals, and the moment of
//! instability `m(c)` along the speed branch.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod branch;
pub mod config;
pub mod directions;
pub mod elliptic;
pub mod error;
pub mod field;
pub mod functionals;
pub mod kdv;
pub mod modes;
pub mod output;
pub mod quadrature;
pub mod spectral_chain;
pub mod stratification;
pub mod verify;
pub mod wavefields;

pub use error::{Error, Result};
