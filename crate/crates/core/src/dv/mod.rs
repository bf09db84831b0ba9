//! Two-qubit-per-block VQE: parity encoding, Pauli measurement and mitigation.
//!
//! Each block keeps four levels reached by its squeeze generator from the vacuum:
//! Fock levels {0, 2, 4, 6} for single modes and collective levels |jj⟩, j ≤ 3, for
//! pairs (k, L − k). Moments are measured with five grouped circuits per block and
//! assembled into ⟨H⟩ by the same energy model as the qumode simulation.

pub mod encoding;
pub mod energy;
pub mod optimize;
pub mod pauli;

pub use encoding::{gradient_commutator, truncated_operator, BlockOperators, ParityEncoding, SymbolicOp};
pub use energy::{dv_energy, dv_energy_with, DvConfig, DvEstimate, DvEvaluation, Mitigation};
pub use optimize::{dv_minimize, DvOptimizer, DvRecord};
pub use pauli::{measurement_groups, pauli_decompose, MeasurementGroup, PauliTerm, PauliWord};
