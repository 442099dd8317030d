//! Differentiable splatting of 3D Gaussian transmitters onto a receiver's
//! perception plane.
//!
//! The pipeline runs in four stages: a Mercator chart maps viewing
//! directions to plane coordinates ([`MercatorConfig`]), each Gaussian's
//! center and covariance are pushed through the chart ([`project_gaussian`]),
//! splats are depth-sorted and binned into screen tiles ([`TileIndex`]), and
//! a front-to-back alpha composite accumulates the radiance map
//! ([`composite`], [`render_map`]). [`RenderOp`] exposes the whole pass as a
//! single tape operation with a hand-written vector-Jacobian product, and
//! [`rssi_from_map`] pools a finished map into one receiver power figure.

mod composite;
mod mercator;
mod plane;
mod project;
mod rssi;
mod sh;

pub use composite::{composite, render_map, sort_by_depth, RenderConfig, RenderOp, TileIndex};
pub use mercator::{MercatorConfig, V_HALF_SPAN};
pub use plane::PerceptionPlane;
pub use project::{project_covariance, project_gaussian, ProjectedGaussian};
pub use rssi::rssi_from_map;
pub use sh::{sh_basis, sh_basis_gradient, signal_magnitude};

use thiserror::Error;

/// Failure modes of projection and compositing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    /// The chart's maximum latitude must lie strictly between 0 and 90.
    #[error("maximum latitude {0} degrees is outside (0, 90)")]
    InvalidLatitudeRange(f64),
    /// A viewing direction of length zero cannot be projected.
    #[error("cannot project a zero-length direction")]
    ZeroDirection,
    /// A perception plane needs at least one pixel in each dimension.
    #[error("perception plane has no pixels")]
    EmptyPlane,
    /// A spectrum-aligned plane needs the chart to reach the top of the
    /// elevation grid.
    #[error("chart reaches latitude {actual} degrees but the spectrum grid needs {needed}")]
    LatitudeRangeTooNarrow { needed: f64, actual: f64 },
    /// A primitive sitting on the receiver has no defined direction.
    #[error("primitive {0} coincides with the receiver position")]
    PrimitiveAtReceiver(usize),
    /// Attenuation factors live in (0, 1].
    #[error("primitive {index} has attenuation {value} outside (0, 1]")]
    InvalidDelta { index: usize, value: f64 },
    /// Tile lists handed to the compositor must be depth-sorted.
    #[error("tile {tile} violates front-to-back ordering")]
    UnsortedTile { tile: usize },
    /// The tile grid must match the plane dimensions.
    #[error("tile grid is {}x{} but the plane needs {}x{}", got.0, got.1, expected.0, expected.1)]
    TileGridMismatch { expected: (usize, usize), got: (usize, usize) },
    /// Paired per-primitive inputs must agree in length.
    #[error("{what}: expected {expected} entries, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
}
