//! Classical narrowband wireless signal math.
//!
//! Complex baseband samples, coherent multipath superposition, RSSI in dB,
//! antenna-array steering vectors, and the beam-steered angle-power
//! spectrum on a one-degree azimuth x elevation grid. Everything here is
//! plain deterministic arithmetic — the learned parts of the engine sit in
//! other crates and treat these functions as ground truth.

mod array;
mod sample;

pub use array::{
    angle_power_spectrum, steering_vector, AngularSpectrum, ArrayGeometry, AZIMUTH_BINS,
    ELEVATION_BINS, GRID_CELLS,
};
pub use sample::{rssi, superpose, wrap_phase, ComplexSample, MultipathChannel, PathTerm};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("antenna array needs at least one element")]
    EmptyArray,
    #[error("array element position is not finite")]
    NonFinitePosition,
    #[error("snapshot length {got} does not match array size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("spectrum grid needs {expected} cells, got {got}")]
    GridSizeMismatch { expected: usize, got: usize },
}
