//! Built-in object library and canonical receiver setups.
//!
//! Objects of one shape context share a grasp template (ids and object-frame
//! poses); they differ in name, task and semantic features. The canonical
//! scenes put a seated receiver in front of a robot, one setup per mobility level.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Quat, Vec3, VoxelMap};
use crate::scene::{
    GraspCandidate, HumanState, MobilityLevel, ObjectModel, Scene, SemanticFeatures, ShapeContext,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryEntry {
    pub object: ObjectModel,
    /// Part of the five objects shown to study participants.
    pub study: bool,
}

fn grasp(id: &str, x: f64, y: f64, z: f64, human: bool) -> GraspCandidate {
    GraspCandidate {
        id: id.to_string(),
        pose: Pose::from_position(Vec3::new(x, y, z)),
        in_affordance: human,
    }
}

/// Grasp template, bounding radius and task shared by a shape context.
pub fn shape_template(shape: ShapeContext) -> (Vec<GraspCandidate>, f64, &'static str) {
    match shape {
        ShapeContext::Cubic => (
            alloc::vec![
                grasp("face_front", 0.05, 0.0, 0.0, true),
                grasp("face_top", 0.0, 0.05, 0.0, false),
                grasp("face_back", -0.05, 0.0, 0.0, false),
                grasp("edge_back", -0.05, 0.05, 0.0, false),
            ],
            0.09,
            "place",
        ),
        ShapeContext::Spherical => (
            alloc::vec![
                grasp("surface_front", 0.05, 0.0, 0.0, true),
                grasp("surface_back", -0.05, 0.0, 0.0, false),
                grasp("surface_top", 0.0, 0.05, 0.0, false),
            ],
            0.06,
            "hold",
        ),
        ShapeContext::Irregular => (
            alloc::vec![
                grasp("handle", -0.05, 0.0, 0.0, true),
                grasp("neck", 0.02, 0.0, 0.0, false),
                grasp("tip", 0.09, 0.0, 0.0, false),
            ],
            0.1,
            "use",
        ),
        ShapeContext::Cylindrical => (
            alloc::vec![
                grasp("body_mid", 0.04, 0.0, 0.0, true),
                grasp("body_upper", 0.04, 0.05, 0.0, false),
                grasp("rim", 0.0, 0.08, 0.0, false),
                grasp("base", 0.0, -0.08, 0.0, false),
            ],
            0.1,
            "drink",
        ),
    }
}

/// (id, shape, category, texture, material, study)
const OBJECTS: [(&str, ShapeContext, &str, &str, &str, bool); 32] = [
    ("book", ShapeContext::Cubic, "stationery", "smooth", "paper", true),
    ("box", ShapeContext::Cubic, "container", "smooth", "cardboard", false),
    ("stapler", ShapeContext::Cubic, "stationery", "smooth", "metal", false),
    ("camera", ShapeContext::Cubic, "electronics", "rough", "plastic", false),
    ("shoe", ShapeContext::Cubic, "clothing", "rough", "leather", false),
    ("phone", ShapeContext::Cubic, "electronics", "smooth", "glass", false),
    ("dice", ShapeContext::Cubic, "toy", "smooth", "plastic", false),
    ("eraser", ShapeContext::Cubic, "stationery", "soft", "rubber", false),
    ("tissue_box", ShapeContext::Cubic, "container", "soft", "cardboard", false),
    ("ball", ShapeContext::Spherical, "toy", "rough", "rubber", true),
    ("orange", ShapeContext::Spherical, "food", "rough", "organic", false),
    ("apple", ShapeContext::Spherical, "food", "smooth", "organic", false),
    ("bowl", ShapeContext::Spherical, "kitchenware", "smooth", "ceramic", false),
    ("plate", ShapeContext::Spherical, "kitchenware", "smooth", "ceramic", false),
    ("globe", ShapeContext::Spherical, "decoration", "smooth", "plastic", false),
    ("melon", ShapeContext::Spherical, "food", "rough", "organic", false),
    ("comb", ShapeContext::Irregular, "grooming", "smooth", "plastic", true),
    ("sunglasses", ShapeContext::Irregular, "clothing", "smooth", "plastic", false),
    ("toothbrush", ShapeContext::Irregular, "grooming", "soft", "plastic", false),
    ("scissors", ShapeContext::Irregular, "tool", "smooth", "metal", false),
    ("spoon", ShapeContext::Irregular, "kitchenware", "smooth", "metal", false),
    ("wrench", ShapeContext::Irregular, "tool", "rough", "metal", false),
    ("hairbrush", ShapeContext::Irregular, "grooming", "soft", "wood", false),
    ("glass", ShapeContext::Cylindrical, "kitchenware", "smooth", "glass", true),
    ("mug", ShapeContext::Cylindrical, "kitchenware", "smooth", "ceramic", true),
    ("bottle", ShapeContext::Cylindrical, "container", "smooth", "plastic", false),
    ("can", ShapeContext::Cylindrical, "container", "smooth", "metal", false),
    ("tumbler", ShapeContext::Cylindrical, "kitchenware", "smooth", "steel", false),
    ("jar", ShapeContext::Cylindrical, "container", "smooth", "glass", false),
    ("flask", ShapeContext::Cylindrical, "container", "smooth", "steel", false),
    ("cup", ShapeContext::Cylindrical, "kitchenware", "rough", "paper", false),
    ("thermos", ShapeContext::Cylindrical, "container", "rough", "steel", false),
];

pub fn make_object(id: &str, shape: ShapeContext, features: SemanticFeatures) -> ObjectModel {
    let (grasps, bounding_radius, task) = shape_template(shape);
    ObjectModel {
        id: id.to_string(),
        shape,
        semantic_features: features,
        task: task.to_string(),
        grasps,
        bounding_radius,
    }
}

/// The 32-object library: 5 study objects and 27 others.
pub fn object_library() -> Vec<LibraryEntry> {
    OBJECTS
        .iter()
        .map(|&(id, shape, category, texture, material, study)| LibraryEntry {
            object: make_object(
                id,
                shape,
                SemanticFeatures {
                    category: category.to_string(),
                    texture: texture.to_string(),
                    material: material.to_string(),
                },
            ),
            study,
        })
        .collect()
}

pub fn default_map() -> VoxelMap {
    VoxelMap {
        origin: Vec3::new(-0.2, 0.5, -0.4),
        resolution: 0.05,
        dims: [24, 16, 16],
    }
}

pub fn default_robot_base() -> Pose {
    Pose::from_position(Vec3::new(1.1, 0.8, 0.0))
}

/// Seated receiver; lower mobility rests the hand lower and closer to the body.
pub fn canonical_human(level: MobilityLevel, task: &str) -> HumanState {
    let hand = match level {
        MobilityLevel::High => Vec3::new(0.30, 0.95, 0.0),
        MobilityLevel::HighMedium => Vec3::new(0.25, 0.90, 0.04),
        MobilityLevel::LowMedium => Vec3::new(0.19, 0.86, 0.06),
        MobilityLevel::Low => Vec3::new(0.12, 0.77, 0.12),
    };
    HumanState {
        hand: Pose::from_position(hand),
        face: Pose::from_position(Vec3::new(0.0, 1.35, 0.0)),
        mobility: level,
        task: String::from(task),
        torso: None,
    }
}

pub fn canonical_scene(level: MobilityLevel, object: &ObjectModel) -> Scene {
    Scene {
        map: default_map(),
        human: canonical_human(level, &object.task),
        object: object.clone(),
        robot_base: default_robot_base(),
    }
}

/// Three effort-comparison setups: robot ahead, robot to the side, robot raised.
pub fn effort_setups() -> Vec<Scene> {
    let glass = make_object(
        "glass",
        ShapeContext::Cylindrical,
        SemanticFeatures {
            category: "kitchenware".into(),
            texture: "smooth".into(),
            material: "glass".into(),
        },
    );
    let bases = [
        Vec3::new(1.1, 0.8, 0.0),
        Vec3::new(0.9, 0.8, 0.5),
        Vec3::new(1.0, 1.0, -0.2),
    ];
    bases
        .iter()
        .map(|&b| {
            let mut s = canonical_scene(MobilityLevel::HighMedium, &glass);
            s.robot_base = Pose::new(b, Quat::IDENTITY);
            s
        })
        .collect()
}
