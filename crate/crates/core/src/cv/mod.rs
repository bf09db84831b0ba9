//! Continuous-variable variational estimate of the effective potential.

pub mod ansatz;
pub mod energy;
pub mod gradient;
pub mod moments;
pub mod optimize;
