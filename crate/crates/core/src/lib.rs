//! Safe stabilization of second-order systems on the n-sphere.
//!
//! The crate implements a dynamic-damping feedback law that steers the
//! second-order system `ẋ = P(x)v, v̇ = u` on S^n to a target point while
//! avoiding star-shaped unsafe sets, together with the unit-quaternion
//! rigid-body specialization, a fixed-step simulator with safety monitors,
//! and numerical equilibrium/eigenstructure analysis.

pub mod error;
pub mod geometry;
pub mod obstacle;

pub use error::{Error, Result};
pub use geometry::{TangentVector, UnitPoint};
pub use obstacle::{ObstacleField, RadialProfile, SeparationVariant, StarObstacle};
