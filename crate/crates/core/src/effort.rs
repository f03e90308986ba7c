//! Static-gravity effort of a planar shoulder/elbow/wrist arm, used to compare
//! the three handover policies.
//!
//! Joint angles: `θ1` is the upper arm's elevation above the horizontal,
//! `θ2` and `θ3` are relative elbow and wrist angles. All zero means the arm is
//! fully extended and horizontal. The arm moves in the vertical plane through
//! the shoulder and the target; the hand link points along the shoulder-target
//! ray and the elbow sits below that ray.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::optimizer::{optimize_handover, PlanError, ReachModel, SamplerConfig};
use crate::scene::Scene;
use crate::seed::derive_seed;

pub const GRAVITY: f64 = 9.81;

const REACH_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    /// Upper arm, forearm, hand (m).
    pub link_lengths: [f64; 3],
    /// Point masses at link midpoints (kg).
    pub link_masses: [f64; 3],
    pub gravity: f64,
    /// Per-joint `[min, max]` in radians.
    pub joint_limits: [[f64; 2]; 3],
}

impl Default for ArmModel {
    fn default() -> Self {
        Self {
            link_lengths: [0.30, 0.27, 0.18],
            link_masses: [2.1, 1.2, 0.5],
            gravity: GRAVITY,
            joint_limits: [[-PI, PI], [0.0, 3.05], [-2.0, 2.0]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MethodId {
    /// Fixed transfer point 75 cm from the body, arbitrary robot grasp.
    #[serde(rename = "method-A")]
    MethodA,
    /// Transfer point at 50 cm, task-aware robot grasp.
    #[serde(rename = "method-B")]
    MethodB,
    /// Hierarchical cost-model placement.
    #[serde(rename = "ours")]
    Ours,
}

impl MethodId {
    pub const ALL: [MethodId; 3] = [MethodId::MethodA, MethodId::MethodB, MethodId::Ours];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::MethodA => "method-A",
            MethodId::MethodB => "method-B",
            MethodId::Ours => "ours",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for MethodId {
    type Err = crate::scene::ParseEnumError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| crate::scene::ParseEnumError {
                kind: "method",
                value: alloc::string::ToString::to_string(s),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EffortError {
    #[error("arm model invalid: {0}")]
    BadArm(&'static str),
    #[error("target at {distance:.4} m is outside the arm's reachable annulus")]
    Unreachable { distance: f64 },
    #[error("joint {joint} angle {angle:.4} rad violates its limits")]
    LimitViolation { joint: usize, angle: f64 },
    #[error("steps must be at least 1")]
    BadSteps,
    #[error("trials must be at least 1")]
    BadTrials,
    #[error(transparent)]
    Plan(#[from] PlanError),
}

impl ArmModel {
    pub fn validate(&self) -> Result<(), EffortError> {
        if self.link_lengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(EffortError::BadArm("link lengths must be positive"));
        }
        if self.link_masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(EffortError::BadArm("link masses must be positive"));
        }
        if self.joint_limits.iter().any(|[lo, hi]| !(lo < hi)) {
            return Err(EffortError::BadArm("joint limits are degenerate"));
        }
        Ok(())
    }

    pub fn total_length(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn scaled_masses(&self, factor: f64) -> ArmModel {
        let mut a = *self;
        for m in &mut a.link_masses {
            *m *= factor;
        }
        a
    }
}

/// Joint angles plus the heading (azimuth about +y, from +x) of the arm plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmConfiguration {
    pub angles: [f64; 3],
    pub heading: f64,
}

fn plane_direction(heading: f64) -> Vec3 {
    Vec3::new(libm::cos(heading), 0.0, libm::sin(heading))
}

pub fn solve_arm(
    arm: &ArmModel,
    shoulder_origin: Vec3,
    target: Vec3,
) -> Result<ArmConfiguration, EffortError> {
    arm.validate()?;
    let [l1, l2, l3] = arm.link_lengths;
    let rel = target - shoulder_origin;
    let horizontal = libm::sqrt(rel.x * rel.x + rel.z * rel.z);
    let heading = if horizontal > 1e-12 {
        libm::atan2(rel.z, rel.x)
    } else {
        0.0
    };
    let vertical = rel.y;
    let mut reach = libm::sqrt(horizontal * horizontal + vertical * vertical);
    if reach > arm.total_length() + REACH_SLACK {
        return Err(EffortError::Unreachable { distance: reach });
    }
    reach = reach.min(arm.total_length());
    let wrist_reach = reach - l3;
    if wrist_reach < libm::fabs(l1 - l2) - REACH_SLACK {
        return Err(EffortError::Unreachable { distance: reach });
    }
    let ray = libm::atan2(vertical, horizontal);
    let c2 = ((wrist_reach * wrist_reach - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let theta2 = libm::acos(c2);
    let theta1 = ray - libm::atan2(l2 * libm::sin(theta2), l1 + l2 * libm::cos(theta2));
    let theta3 = ray - theta1 - theta2;
    let angles = [theta1, theta2, theta3];
    for (joint, (angle, [lo, hi])) in angles.iter().zip(arm.joint_limits.iter()).enumerate() {
        if *angle < lo - 1e-12 || *angle > hi + 1e-12 {
            return Err(EffortError::LimitViolation {
                joint,
                angle: *angle,
            });
        }
    }
    Ok(ArmConfiguration { angles, heading })
}

/// Elbow, wrist and fingertip positions.
pub fn forward_kinematics(arm: &ArmModel, shoulder_origin: Vec3, cfg: &ArmConfiguration) -> [Vec3; 3] {
    let dir = plane_direction(cfg.heading);
    let up = Vec3::new(0.0, 1.0, 0.0);
    let mut absolute = 0.0;
    let mut p = shoulder_origin;
    let mut out = [Vec3::ZERO; 3];
    for i in 0..3 {
        absolute += cfg.angles[i];
        let l = arm.link_lengths[i];
        p = p + dir * (l * libm::cos(absolute)) + up * (l * libm::sin(absolute));
        out[i] = p;
    }
    out
}

/// Static gravity torque at each joint, with point masses at link midpoints.
pub fn gravity_torques(arm: &ArmModel, angles: &[f64; 3]) -> [f64; 3] {
    let [l1, l2, l3] = arm.link_lengths;
    let [m1, m2, m3] = arm.link_masses;
    let a1 = angles[0];
    let a2 = a1 + angles[1];
    let a3 = a2 + angles[2];
    let elbow = l1 * libm::cos(a1);
    let wrist = elbow + l2 * libm::cos(a2);
    let c1 = 0.5 * l1 * libm::cos(a1);
    let c2 = elbow + 0.5 * l2 * libm::cos(a2);
    let c3 = wrist + 0.5 * l3 * libm::cos(a3);
    let g = arm.gravity;
    [
        g * (m1 * c1 + m2 * c2 + m3 * c3),
        g * (m2 * (c2 - elbow) + m3 * (c3 - elbow)),
        g * m3 * (c3 - wrist),
    ]
}

pub fn total_torque(arm: &ArmModel, angles: &[f64; 3]) -> f64 {
    gravity_torques(arm, angles).iter().map(|t| libm::fabs(*t)).sum()
}

/// Mean summed joint-torque magnitude along a joint-space straight line
/// between the two reach configurations, sampled at `steps + 1` points.
pub fn joint_effort(
    arm: &ArmModel,
    shoulder_origin: Vec3,
    start_target: Vec3,
    end_target: Vec3,
    steps: usize,
) -> Result<f64, EffortError> {
    if steps == 0 {
        return Err(EffortError::BadSteps);
    }
    let a = solve_arm(arm, shoulder_origin, start_target)?.angles;
    let b = solve_arm(arm, shoulder_origin, end_target)?.angles;
    let mut sum = 0.0;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let q = [
            a[0] + (b[0] - a[0]) * t,
            a[1] + (b[1] - a[1]) * t,
            a[2] + (b[2] - a[2]) * t,
        ];
        sum += total_torque(arm, &q);
    }
    Ok(sum / (steps + 1) as f64)
}

/// Distance of the body reference point behind the hand when the scene has none.
pub const TORSO_BEHIND_HAND: f64 = 0.25;
pub const METHOD_A_DISTANCE: f64 = 0.75;
pub const METHOD_B_DISTANCE: f64 = 0.50;

/// Body reference point: the scene's torso if present, else 0.25 m behind the
/// hand on the hand-to-robot ray.
pub fn torso_position(scene: &Scene) -> Vec3 {
    if let Some(t) = scene.human.torso {
        return t;
    }
    let hand = scene.human.hand.position;
    let dir = (scene.robot_base.position - hand)
        .normalized()
        .unwrap_or(Vec3::new(1.0, 0.0, 0.0));
    hand - dir * TORSO_BEHIND_HAND
}

pub fn method_transfer_point<R: ReachModel>(
    method: MethodId,
    scene: &Scene,
    reach: &R,
    cfg: &SamplerConfig,
) -> Result<Vec3, EffortError> {
    let torso = torso_position(scene);
    let dir = (scene.robot_base.position - torso)
        .normalized()
        .unwrap_or(Vec3::new(1.0, 0.0, 0.0));
    match method {
        MethodId::MethodA => Ok(torso + dir * METHOD_A_DISTANCE),
        MethodId::MethodB => Ok(torso + dir * METHOD_B_DISTANCE),
        MethodId::Ours => {
            let sol = optimize_handover(scene, reach, cfg)?;
            let advised = scene
                .object
                .grasp(&sol.advised_human_grasp)
                .expect("solution names a grasp of the scene object");
            Ok(sol.object_pose.compose(&advised.pose).position)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffortOptions {
    pub arm: ArmModel,
    /// Shoulder position relative to the body reference point.
    pub shoulder_offset: Vec3,
    /// Half-width of the uniform start-hand perturbation per axis (m).
    pub hand_jitter: f64,
    pub steps: usize,
}

impl Default for EffortOptions {
    fn default() -> Self {
        Self {
            arm: ArmModel::default(),
            shoulder_offset: Vec3::new(0.0, 0.30, 0.0),
            hand_jitter: 0.02,
            steps: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffortRow {
    pub method: MethodId,
    pub setup_id: usize,
    pub trial: usize,
    pub effort_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortTable {
    pub rows: Vec<EffortRow>,
    /// Mean effort per method, indexed by [`MethodId::index`].
    pub means: [f64; 3],
}

/// Pulls targets beyond the arm's reach back onto the reach sphere: the
/// receiver extends fully toward transfer points it cannot touch.
fn clamp_to_reach(arm: &ArmModel, shoulder: Vec3, target: Vec3) -> Vec3 {
    let rel = target - shoulder;
    let limit = arm.total_length() * (1.0 - 1e-6);
    let d = rel.norm();
    if d > limit {
        shoulder + rel * (limit / d)
    } else {
        target
    }
}

/// Runs `trials` start-hand perturbations of one setup for every method.
pub fn compare_methods<R: ReachModel>(
    scene: &Scene,
    setup_id: usize,
    trials: usize,
    seed: u64,
    reach: &R,
    sampler: &SamplerConfig,
    opts: &EffortOptions,
) -> Result<EffortTable, EffortError> {
    if trials == 0 {
        return Err(EffortError::BadTrials);
    }
    let torso = torso_position(scene);
    let shoulder = torso + opts.shoulder_offset;
    let mut rows = Vec::with_capacity(trials * 3);
    let mut sums = [0.0; 3];
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, setup_id as u64, trial as u64));
        let j = opts.hand_jitter;
        let jitter = if j > 0.0 {
            Vec3::new(
                rng.random_range(-j..j),
                rng.random_range(-j..j),
                rng.random_range(-j..j),
            )
        } else {
            Vec3::ZERO
        };
        let mut trial_scene = scene.clone();
        trial_scene.human.hand.position = scene.human.hand.position + jitter;
        trial_scene.human.torso = Some(torso);
        let start = trial_scene.human.hand.position;
        for method in MethodId::ALL {
            let end = method_transfer_point(method, &trial_scene, reach, sampler)?;
            let end = clamp_to_reach(&opts.arm, shoulder, end);
            let effort = joint_effort(&opts.arm, shoulder, start, end, opts.steps)?;
            sums[method.index()] += effort;
            rows.push(EffortRow {
                method,
                setup_id,
                trial,
                effort_nm: effort,
            });
        }
    }
    let means = sums.map(|s| s / trials as f64);
    Ok(EffortTable { rows, means })
}
