//! Robot-to-human handover planning and preference learning.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line and
//! parallel drivers live in the `handover` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod costs;
pub mod dataset;
pub mod effort;
pub mod geometry;
pub mod library;
pub mod mln;
pub mod optimizer;
pub mod scene;
pub mod seed;
pub mod srl;
pub mod stats;

pub use geometry::{Pose, Quat, Vec3, VoxelIndex, VoxelMap};
pub use scene::{MobilityLevel, ObjectModel, Scene, ShapeContext};
