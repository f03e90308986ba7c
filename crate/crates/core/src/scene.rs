//! World model: human receiver, object with affordance-partitioned grasps, robot base.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, Vec3, VoxelMap};

/// Receiver arm-mobility class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MobilityLevel {
    #[serde(rename = "H")]
    High,
    #[serde(rename = "H-M")]
    HighMedium,
    #[serde(rename = "L-M")]
    LowMedium,
    #[serde(rename = "L")]
    Low,
}

impl MobilityLevel {
    pub const ALL: [MobilityLevel; 4] = [
        MobilityLevel::High,
        MobilityLevel::HighMedium,
        MobilityLevel::LowMedium,
        MobilityLevel::Low,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MobilityLevel::High => "H",
            MobilityLevel::HighMedium => "H-M",
            MobilityLevel::LowMedium => "L-M",
            MobilityLevel::Low => "L",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MobilityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} `{value}`")]
pub struct ParseEnumError {
    pub kind: &'static str,
    pub value: String,
}

impl FromStr for MobilityLevel {
    type Err = ParseEnumError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MobilityLevel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| ParseEnumError {
                kind: "mobility level",
                value: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeContext {
    Cubic,
    Spherical,
    Irregular,
    Cylindrical,
}

impl ShapeContext {
    pub const ALL: [ShapeContext; 4] = [
        ShapeContext::Cubic,
        ShapeContext::Spherical,
        ShapeContext::Irregular,
        ShapeContext::Cylindrical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ShapeContext::Cubic => "cubic",
            ShapeContext::Spherical => "spherical",
            ShapeContext::Irregular => "irregular",
            ShapeContext::Cylindrical => "cylindrical",
        }
    }
}

impl fmt::Display for ShapeContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShapeContext {
    type Err = ParseEnumError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ShapeContext::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| ParseEnumError {
                kind: "shape context",
                value: s.to_string(),
            })
    }
}

/// A discrete grasp on the object. `in_affordance` grasps are reserved for the
/// receiver; the rest are candidates for the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    pub id: String,
    /// Pose in the object frame.
    pub pose: Pose,
    pub in_affordance: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticFeatures {
    pub category: String,
    pub texture: String,
    pub material: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectModel {
    pub id: String,
    pub shape: ShapeContext,
    pub semantic_features: SemanticFeatures,
    pub task: String,
    pub grasps: Vec<GraspCandidate>,
    pub bounding_radius: f64,
}

impl ObjectModel {
    pub fn grasp(&self, id: &str) -> Option<&GraspCandidate> {
        self.grasps.iter().find(|g| g.id == id)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if !(self.bounding_radius > 0.0 && self.bounding_radius.is_finite()) {
            return Err(ValidationError::new(
                "object.bounding_radius",
                "must be positive and finite",
            ));
        }
        let mut seen = BTreeSet::new();
        for (i, g) in self.grasps.iter().enumerate() {
            if !seen.insert(g.id.as_str()) {
                return Err(ValidationError::new(
                    format!("object.grasps[{i}].id"),
                    format!("duplicate grasp id `{}`", g.id),
                ));
            }
            g.pose.validate().map_err(|e| {
                ValidationError::new(format!("object.grasps[{i}].pose"), e.to_string())
            })?;
            if g.pose.position.norm() > self.bounding_radius + 1e-12 {
                return Err(ValidationError::new(
                    format!("object.grasps[{i}].pose.position"),
                    "lies outside the object's bounding radius",
                ));
            }
        }
        if !self.grasps.iter().any(|g| g.in_affordance) {
            return Err(ValidationError::new(
                "object.grasps",
                "needs at least one in_affordance (receiver) grasp",
            ));
        }
        if !self.grasps.iter().any(|g| !g.in_affordance) {
            return Err(ValidationError::new(
                "object.grasps",
                "needs at least one non-affordance (robot) grasp",
            ));
        }
        Ok(())
    }
}

/// Grasps inside the affordance region, kept for the receiver.
pub fn human_grasps(obj: &ObjectModel) -> Vec<&GraspCandidate> {
    obj.grasps.iter().filter(|g| g.in_affordance).collect()
}

/// Grasps outside the affordance region, available to the robot.
pub fn robot_grasp_candidates(obj: &ObjectModel) -> Vec<&GraspCandidate> {
    obj.grasps.iter().filter(|g| !g.in_affordance).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanState {
    pub hand: Pose,
    pub face: Pose,
    pub mobility: MobilityLevel,
    pub task: String,
    /// Body reference point; derived from the hand and robot base when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torso: Option<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub map: VoxelMap,
    pub human: HumanState,
    pub object: ObjectModel,
    pub robot_base: Pose,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {message}")]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl Scene {
    pub fn validate(&self) -> Result<(), ValidationError> {
        self.map
            .validate()
            .map_err(|e| ValidationError::new("map", e.to_string()))?;
        for (path, pose) in [
            ("human.hand", &self.human.hand),
            ("human.face", &self.human.face),
            ("robot_base", &self.robot_base),
        ] {
            pose.validate()
                .map_err(|e| ValidationError::new(path, e.to_string()))?;
        }
        if let Some(t) = self.human.torso {
            if !t.is_finite() {
                return Err(ValidationError::new("human.torso", "is not finite"));
            }
        }
        if self.human.hand.position == self.human.face.position {
            return Err(ValidationError::new(
                "human.face",
                "coincides with the hand position",
            ));
        }
        if !self.map.contains(self.human.hand.position) {
            return Err(ValidationError::new(
                "human.hand",
                "lies outside the map volume",
            ));
        }
        self.object.validate()
    }
}
