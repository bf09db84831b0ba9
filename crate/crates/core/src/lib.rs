//! Critical-point toolkit for lattice φ⁴ theory in 1+1 dimensions.
//!
//! The transition from the symmetric to the broken phase is located three ways:
//!
//! - [`gep`]: classical minimization of the Gaussian effective potential,
//! - [`cv`]: a qumode (continuous-variable) VQE simulated in truncated Fock space,
//! - [`dv`]: a two-qubit-per-mode VQE with depolarizing noise and error mitigation.
//!
//! Level crossings of the energy difference are then extrapolated with
//! [`fit::fit_crossing`]. [`runner`] wires everything to JSON configs and CSV output.
//!
//! Data-parallel loops (λ̃ sweeps, lattice-size scans, bootstrap resamples) run on
//! rayon when the `parallel` feature is enabled; see [`par`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cv;
pub mod dv;
pub mod error;
pub mod fit;
pub mod fock;
pub mod gep;
pub mod par;
pub mod qubit;
pub mod runner;

pub use error::{Error, Result};
pub use gep::LatticeSpec;
