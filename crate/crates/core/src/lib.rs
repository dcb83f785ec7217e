//! Stationary distributions of regulated Markov-modulated Brownian motion
//! (MMBM) with three behaviours at level zero: the classical reflecting
//! boundary, a sticky boundary, and a sticky boundary that resamples the
//! phase on exit.
//!
//! Every law is expressed in the unified form
//! `G(x) = w0 + w1 (I - e^{Kx}) Θ⁻¹` (see [`stationary::PhaseCdf`]) and is
//! obtained two independent ways: from closed-form kernel vectors, and from
//! a Markov-regenerative decomposition that depends on an artificial timer
//! rate `q` (see [`regenerative`]). The [`simulator`] runs the approximating
//! flip-flop fluid queues exactly, event by event, as a third route.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
#![forbid(unsafe_code)]
// `!(x < y)` is deliberate throughout: NaN must fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod model;
pub mod numkernel;
pub mod regenerative;
pub mod simulator;
pub mod stationary;

pub use error::{Error, Result};
pub use model::{BoundaryVariant, MmbmModel, ResampleSpec, StickySpec, VariantTag};
pub use stationary::{Level, PhaseCdf};

/// Dense real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense real column vector.
pub type Vector = nalgebra::DVector<f64>;
/// Dense real row vector (probability vectors, weights).
pub type RowVector = nalgebra::RowDVector<f64>;
