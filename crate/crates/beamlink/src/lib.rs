//! Links mobile LiDAR beams to the object surfaces of a semantic 3D scene
//! and derives radiometric surface descriptors from the linked intensities.
//!
//! The crate is organised as a small pipeline:
//!
//! * [`geom`] holds the exact geometric primitives: beams, uncertainty
//!   segments, planar surface polygons, and the angle/distance computations
//!   that describe how a beam met a surface.
//! * [`index`] accelerates candidate lookup with a bounding volume hierarchy.
//! * [`association`] confirms at most one surface per beam and enriches both
//!   beams and objects with the quantities derived from the link.
//! * [`fingerprint`] groups linked intensities into range/zenith bins and
//!   compares objects through their third-quartile profiles.
//! * [`sim`] is a deterministic scan simulator used as ground truth.
//! * [`registration`] aligns point clouds with point-to-point ICP.
//! * [`store`] persists beams in columnar binary packages plus a plain-text
//!   manifest, and parses the text formats (beam tables, scenes, XYZ clouds).

pub mod association;
pub mod fingerprint;
pub mod geom;
pub mod ids;
pub mod index;
pub mod registration;
pub mod sim;
pub mod stats;
pub mod store;
