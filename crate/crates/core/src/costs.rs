//! Appropriateness, safety and reachability costs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{point_distance, Pose};
use crate::scene::{GraspCandidate, HumanState, ObjectModel};

/// Minimum clearance between the object/end-effector and the receiver.
pub const SAFETY_THRESHOLD: f64 = 0.05;
/// Largest hand displacement considered reachable.
pub const REACH_THRESHOLD: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentDistances {
    pub obj_to_hand: f64,
    pub obj_to_face: f64,
    pub ee_to_hand: f64,
}

impl ComponentDistances {
    pub fn between(obj_pose: &Pose, ee_pose: &Pose, human: &HumanState) -> Self {
        Self {
            obj_to_hand: point_distance(obj_pose, &human.hand),
            obj_to_face: point_distance(obj_pose, &human.face),
            ee_to_hand: point_distance(ee_pose, &human.hand),
        }
    }

    pub fn min(&self) -> f64 {
        self.obj_to_hand.min(self.obj_to_face).min(self.ee_to_hand)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub appropriateness: f64,
    /// Zero when any component distance is under [`SAFETY_THRESHOLD`].
    pub safety: f64,
    /// `+inf` beyond [`REACH_THRESHOLD`]; serialized as `null` in JSON.
    pub reachability: f64,
    pub component_distances: ComponentDistances,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CostError {
    #[error("object `{0}` has no in-affordance grasp")]
    NoHumanGrasp(alloc::string::String),
}

/// Distance from a robot grasp candidate to the closest receiver grasp, in the object frame.
pub fn appropriateness(candidate: &GraspCandidate, obj: &ObjectModel) -> Result<f64, CostError> {
    obj.grasps
        .iter()
        .filter(|g| g.in_affordance)
        .map(|g| point_distance(&candidate.pose, &g.pose))
        .min_by(f64::total_cmp)
        .ok_or_else(|| CostError::NoHumanGrasp(obj.id.clone()))
}

pub fn safety_from_distances(d: &ComponentDistances) -> f64 {
    if d.min() >= SAFETY_THRESHOLD {
        d.obj_to_hand + d.obj_to_face + d.ee_to_hand
    } else {
        0.0
    }
}

pub fn safety(obj_pose: &Pose, ee_pose: &Pose, human: &HumanState) -> f64 {
    safety_from_distances(&ComponentDistances::between(obj_pose, ee_pose, human))
}

pub fn reachability(hand: &Pose, advised_grasp_world: &Pose) -> f64 {
    let d = point_distance(hand, advised_grasp_world);
    if d <= REACH_THRESHOLD {
        d
    } else {
        f64::INFINITY
    }
}

/// The receiver grasp the placement implicitly advises: the in-affordance grasp
/// whose world position is nearest the hand (ties to the smaller id).
pub fn advised_human_grasp<'a>(
    obj: &'a ObjectModel,
    obj_pose: &Pose,
    hand: &Pose,
) -> Option<(&'a GraspCandidate, Pose)> {
    let mut best: Option<(&GraspCandidate, Pose, f64)> = None;
    for g in obj.grasps.iter().filter(|g| g.in_affordance) {
        let world = obj_pose.compose(&g.pose);
        let d = point_distance(&world, hand);
        let better = match &best {
            None => true,
            Some((b, _, bd)) => d < *bd || (d == *bd && g.id < b.id),
        };
        if better {
            best = Some((g, world, d));
        }
    }
    best.map(|(g, w, _)| (g, w))
}
