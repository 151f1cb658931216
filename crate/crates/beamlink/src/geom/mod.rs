//! Exact geometric primitives for beam-to-surface linking.
//!
//! A beam is modelled as a ray from the sensor origin `o` along the unit
//! direction `d` with measured range `r`. Because the measured range is
//! uncertain, the reflection point `p = o + r * d` is widened into an
//! *uncertainty segment* of configurable length centred on `p`, and a surface
//! becomes a candidate when it passes within a configurable radius of that
//! segment while facing the beam. The remaining operations derive the
//! quantities that describe a confirmed link: signed range error, zenith and
//! azimuth of the incidence geometry, and the distance from the reflection
//! point to the surface polygon.

mod aabb;
mod distance;
mod ops;
mod surface;
mod transform;
mod vec;

pub use aabb::Aabb;
pub use distance::{
    point_segment_distance, point_triangle_distance, segment_segment_distance,
    triangle_segment_distance,
};
pub use ops::{
    signed_distance, spherocylinder_candidate, zenith_angle, Azimuth, GeomParams, LocalFrame, Ray,
    Segment,
};
pub use surface::Surface;
pub use transform::{RigidTransform, Rotation};
pub use vec::Vec3;

use thiserror::Error;

/// Vertices may deviate from the common surface plane by at most this much.
pub const COPLANARITY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("invalid ray: {0}")]
    InvalidRay(String),
    #[error("invalid segment: {0}")]
    InvalidSegment(String),
    #[error("invalid surface {id}: {reason}")]
    InvalidSurface { id: String, reason: String },
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}
