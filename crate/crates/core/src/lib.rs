//! Attention-based iterative decomposition (AID) for tensor product
//! representation (TPR) memories.
//!
//! The crate contains a small reverse-mode autodiff engine ([`backend`]), the
//! AID module ([`aid`]), a third-order fast-weight TPR memory ([`memory`]),
//! the word-level fast-weight model built around them ([`model`]), the
//! systematic associative recall benchmark ([`sar`]), training loops
//! ([`train`]) and representation analyses ([`analysis`]). [`config`] and
//! [`run`] manage settings and run directories; [`verify`] holds the
//! finite-difference suites.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aid;
pub mod analysis;
pub mod backend;
pub mod config;
pub mod error;
pub mod memory;
pub mod model;
pub mod nn;
pub mod run;
pub mod sar;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
