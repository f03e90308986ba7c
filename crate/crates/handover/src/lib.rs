//! File formats, parallel drivers and the command-line interface around
//! `handover-core`.

pub mod cli;
pub mod files;
pub mod parallel;
pub mod scene_io;

pub use scene_io::{load_scene, parse_scene, SceneError};
