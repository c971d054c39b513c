//! Refinement-based Christoffel sampling for weighted least-squares
//! approximation in arbitrary, possibly numerically redundant, bases.
//!
//! The crate is organized bottom-up:
//!
//! - [`basis`]: domains, reference measures and the experiment basis families.
//! - [`christoffel`]: Gram matrices, numerical dimension, the numerical inverse
//!   Christoffel function and the R-factor stack that represents the running
//!   upper bound `u`.
//! - [`sampler`]: slice sampling from `u·dρ`, `‖u‖₁` estimation, weighted batches.
//! - [`rcs`]: the refinement loop.
//! - [`lsq`]: ridge-regularized weighted least squares and error oracles.
//! - [`leverage`]: ridge leverage scores and the whack-a-mole reweighting.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod christoffel;
pub mod domain;
pub mod error;
pub mod io;
pub mod leverage;
pub mod linalg;
pub mod lsq;
pub mod quadrature;
pub mod rcs;
pub mod sampler;
pub mod seed;
pub mod stats;

pub use basis::{BasisSet, BasisSpec, Domain, Field};
pub use christoffel::{GramMatrix, PruneMode, RFactorStack};
pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
pub use rcs::{run_rcs, RcsConfig, RcsMode, RcsReport};
pub use sampler::{ChainConfig, SampleBatch};
