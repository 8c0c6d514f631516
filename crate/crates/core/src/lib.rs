//! Frequency-separable Hamiltonian neural networks.
//!
//! This crate is `no_std` (it needs `alloc`) and carries every numerical
//! piece of the toolkit: a small reverse-mode tape with forward-over-reverse
//! second derivatives, the network families used as Hamiltonians and as the
//! learned structure operator, symplectic and classical steppers, the
//! benchmark systems with their dataset generators, the learnable dynamics
//! models and the training/evaluation pipeline.
//!
//! File formats, configuration and the command line live in the companion
//! `fshnn` crate.
#![no_std]

extern crate alloc;

pub mod autodiff;
pub mod dataset;
pub mod error;
pub mod fft;
pub mod integrators;
pub mod models;
pub mod nn;
pub mod state;
pub mod systems;
pub mod train;

mod math;

pub use error::{Error, Result};
