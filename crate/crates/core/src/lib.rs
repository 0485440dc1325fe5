//! Numerical core for robust stochastic control in strong formulation.
//!
//! The controller plays elementary feedback strategies (finite sequences of
//! stopping rules with frozen actions) while nature plays open-loop controls
//! adapted to a possibly enlarged filtration. This crate holds everything that
//! is pure computation:
//!
//! * [`sde`]: the controlled SDE model, assumption sampling and the Euler step,
//! * [`noise`]: counter-based reproducible Gaussian noise,
//! * [`strategies`]: stopping rules, elementary strategies, open-loop controls,
//! * [`hamiltonian`]: lower, upper and mixed Hamiltonians over finite control sets,
//! * [`pde`]: an explicit monotone scheme for the lower/upper Isaacs equations,
//! * [`game`]: Monte Carlo simulation, robust values, dynamic programming and filtration experiments,
//! * [`problems`]: the built-in benchmark library.
//!
//! The crate is `no_std` (it needs `alloc`). IO, configuration and the thread
//! pool live in the `robustctl` companion crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod exec;
pub mod game;
pub mod hamiltonian;
pub mod matrix_game;
pub mod noise;
pub mod pde;
pub mod problems;
pub mod sde;
pub mod stats;
pub mod strategies;

pub use error::{Error, Result};
