//! Minimum-power robust downlink beamforming and 2-D hover positioning for a
//! fixed-altitude multi-antenna UAV serving K single-antenna ground users.
//!
//! The UAV's AoD knowledge is impaired by bounded jitter and the user
//! locations are known only up to a disk of radius `D_k`. The design problem
//! is turned into a semidefinite program via an S-procedure reformulation of
//! the worst-case SINR constraints, solved with an interior-point conic
//! solver, and the rank-one beamformers are recovered from the principal
//! eigenpairs. Solutions are validated against the exact nonlinear
//! uncertainty models with grid oracles.

// System OpenBLAS provides the LAPACK symbols for the PSD cone kernels.
extern crate openblas_src;

pub mod baselines;
pub mod conic;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod lmi;
pub mod uncertainty;
pub mod units;
pub mod verify;

pub use error::{Error, Result};
