//! Numerical core for single-spin OSCAR MRFM quantum dynamics.
//!
//! The joint cantilever-tip/spin state is propagated exactly in a truncated
//! oscillator ⊗ spin-1/2 number basis under piecewise-constant Hamiltonians
//! (rf drive, spin/tip coupling and a two-valued magnetic-noise term). On top
//! of the propagator sit the zero-crossing frequency analysis, the closed-form
//! quasiclassical estimates and the interrupted-OSCAR collapse protocols.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, configuration
//! and the command line live in the companion `oscar-cli` crate.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
mod math;

pub mod analysis;
pub mod evolve;
pub mod hilbert;
pub mod linalg;
pub mod params;
pub mod protocols;
pub mod quasiclassical;
pub mod states;

pub use crate::error::{Error, Result};
pub use crate::math::round_sig;
pub use num_complex::Complex64;
