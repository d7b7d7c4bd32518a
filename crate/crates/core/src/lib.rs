//! Desk-scale numerical laboratory for nonlocal diffusion equations on
//! truncated periodic boxes.
//!
//! The equations treated are the convolution model
//! `∂t u = J∗u − (∫J) u`, the general-kernel model
//! `∂t u = ∫K(x,y)u(y)dy − σ(x)u`, and the heterogeneous dispersal model.
//! The crate provides the discrete operators (spectral convolution,
//! fractional derivatives), the energy dissipation functionals whose decay
//! the equations obey, the explicit constant chains and closed-form decay
//! envelopes attached to them, and a property-test harness that checks the
//! underlying energy inequalities on randomized fields.
//!
//! Everything is deterministic: fixed seeds produce bit-identical results.
//! The crate is `no_std`-compatible (`alloc` required; enable the `libm`
//! feature when building without `std`).

#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("nonlocal-core needs either the `std` or the `libm` feature");

extern crate alloc;

pub mod bounds;
pub mod dispersal;
pub mod dissipation;
pub mod evolution;
pub mod grid;
pub mod kernels;
pub(crate) mod math;
pub mod rng;
pub mod spectral;
pub mod verify;

mod error;
mod fft;

pub use error::{Error, Result};
pub use grid::{Field, GridSpec};
