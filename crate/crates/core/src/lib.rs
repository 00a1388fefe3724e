//! Invariant-based inverse engineering for fluctuation transfer between two
//! membranes in a three-subcavity (membrane-in-the-middle) optomechanical
//! cavity.
//!
//! All rates are expressed in units of the optomechanical coupling `g`
//! (`g = 1` internally) and all times in units of `1/g`. [`units`] converts
//! to SI.
//!
//! Fluctuation amplitudes are always ordered `(δa_L, δa_M, δa_R, δb_1, δb_2)`.
//!
//! * [`model`]: parameters, the 5×5 interaction matrix, its Zeno
//!   decomposition and the 3×3 dark-subspace matrix.
//! * [`pulse`]: shape functions, inverse-engineered drives, diagnostics.
//! * [`invariant`]: the dynamical invariant and its dark eigenvector.
//! * [`dynamics`]: fixed-step propagation of amplitudes.
//! * [`noise`]: density-matrix propagation under white amplitude noise.
//! * [`steady`]: steady-state cavity amplitudes and the RWA check.
//! * [`experiments`]: single runs and parameter sweeps with CSV output.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod invariant;
pub mod model;
pub mod noise;
pub mod pulse;
pub mod steady;
pub mod units;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
