//! Truncated Fock-space simulation of the factorized mode blocks.
//!
//! A block holds one lattice mode (zero mode, k = L/2) or a pair (k, L − k), and may
//! carry ancilla qumodes or qubits. Gates act on a subset of the block's factors;
//! no tensor product across blocks is ever built.

pub mod gates;
pub mod ops;
pub mod state;

pub use gates::{build, build_shared, gaussian_gate, hybrid_gate, Gate, GateDescriptor, GateKind, LEAKAGE_WARN};
pub use ops::{ladder_and_quadratures, CMatrix, Cutoff, Ladder, LocalOp, OpExpr, OpTerm};
pub use state::{exact_moment, BlockKind, Distribution, Factor, QumodeBlockState, ShotCounts};
