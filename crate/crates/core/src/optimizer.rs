//! Hierarchical handover search.
//!
//! The robot grasp is fixed first by appropriateness. Voxels are then scanned
//! nearest-first from the receiver's hand; inside a voxel the reach-feasible
//! sampled pose with the highest safety wins, and the first voxel whose winner
//! is safe and reachable is the answer.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costs::{
    advised_human_grasp, appropriateness, reachability, safety_from_distances, ComponentDistances,
    CostBreakdown, CostError,
};
use crate::geometry::{point_distance, voxels_by_hand_proximity, Pose, Quat, Vec3, VoxelIndex};
use crate::scene::{GraspCandidate, ObjectModel, Scene};
use crate::seed::mix_seed;

/// Decides whether the robot can hold `grasp_world` and where its end-effector ends up.
pub trait ReachModel {
    fn end_effector_pose(&self, object_pose: &Pose, grasp_world: &Pose, robot_base: &Pose)
        -> Option<Pose>;
}

/// Feasible iff the grasp lies in a spherical shell around the robot base.
/// The end-effector coincides with the grasp point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialReach {
    pub min_reach: f64,
    pub max_reach: f64,
}

impl Default for RadialReach {
    fn default() -> Self {
        Self {
            min_reach: 0.35,
            max_reach: 1.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("reach band requires 0 <= min_reach < max_reach, got [{min}, {max}]")]
pub struct ReachBandError {
    pub min: f64,
    pub max: f64,
}

impl RadialReach {
    pub fn new(min_reach: f64, max_reach: f64) -> Result<Self, ReachBandError> {
        if !(min_reach >= 0.0 && min_reach < max_reach && max_reach.is_finite()) {
            return Err(ReachBandError {
                min: min_reach,
                max: max_reach,
            });
        }
        Ok(Self {
            min_reach,
            max_reach,
        })
    }
}

impl ReachModel for RadialReach {
    fn end_effector_pose(
        &self,
        _object_pose: &Pose,
        grasp_world: &Pose,
        robot_base: &Pose,
    ) -> Option<Pose> {
        let d = point_distance(grasp_world, robot_base);
        (self.min_reach <= d && d <= self.max_reach).then_some(*grasp_world)
    }
}

impl<R: ReachModel + ?Sized> ReachModel for &R {
    fn end_effector_pose(&self, o: &Pose, g: &Pose, b: &Pose) -> Option<Pose> {
        (**self).end_effector_pose(o, g, b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub poses_per_voxel: usize,
    pub orientation_set: Vec<Quat>,
    pub seed: u64,
}

/// Identity plus quarter turns about each positive and negative axis.
pub fn default_orientation_set() -> Vec<Quat> {
    let h = core::f64::consts::FRAC_PI_2;
    let mut set = alloc::vec![Quat::IDENTITY];
    for axis in [
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
    ] {
        set.push(Quat::from_axis_angle(axis, h));
        set.push(Quat::from_axis_angle(axis, -h));
    }
    set
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            poses_per_voxel: 4,
            orientation_set: default_orientation_set(),
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("object `{0}` has no robot grasp candidate")]
    NoRobotGrasp(String),
    #[error("object `{0}` has no in-affordance grasp")]
    NoHumanGrasp(String),
    #[error("sampler config invalid: {0}")]
    BadSampler(&'static str),
    #[error("no voxel yields a safe, reachable and reach-feasible placement")]
    NoFeasibleHandover,
}

impl From<CostError> for PlanError {
    fn from(e: CostError) -> Self {
        match e {
            CostError::NoHumanGrasp(id) => PlanError::NoHumanGrasp(id),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.poses_per_voxel == 0 {
            return Err(PlanError::BadSampler("poses_per_voxel must be >= 1"));
        }
        if self.orientation_set.is_empty() {
            return Err(PlanError::BadSampler("orientation_set is empty"));
        }
        if self
            .orientation_set
            .iter()
            .any(|q| !(libm::fabs(q.norm() - 1.0) <= crate::geometry::UNIT_NORM_TOLERANCE))
        {
            return Err(PlanError::BadSampler("orientation_set holds a non-unit quaternion"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverSolution {
    pub robot_grasp: String,
    pub object_pose: Pose,
    pub ee_pose: Pose,
    pub advised_human_grasp: String,
    pub costs: CostBreakdown,
    pub voxel: VoxelIndex,
}

/// Robot candidate with the largest appropriateness; ties go to the smaller id.
pub fn select_robot_grasp(obj: &ObjectModel) -> Result<&GraspCandidate, PlanError> {
    if !obj.grasps.iter().any(|g| g.in_affordance) {
        return Err(PlanError::NoHumanGrasp(obj.id.clone()));
    }
    let mut best: Option<(&GraspCandidate, f64)> = None;
    for g in obj.grasps.iter().filter(|g| !g.in_affordance) {
        let a = appropriateness(g, obj)?;
        let better = match best {
            None => true,
            Some((b, ba)) => a > ba || (a == ba && g.id < b.id),
        };
        if better {
            best = Some((g, a));
        }
    }
    best.map(|(g, _)| g)
        .ok_or_else(|| PlanError::NoRobotGrasp(obj.id.clone()))
}

/// Seeded object poses inside the voxel cube centred at `voxel_center`.
///
/// Output order is position-major: sample `i * orientations + j` pairs the
/// i-th position with the j-th orientation.
pub fn sample_object_poses(voxel_center: Vec3, resolution: f64, cfg: &SamplerConfig) -> Vec<Pose> {
    let key = mix_seed(
        mix_seed(
            mix_seed(cfg.seed, voxel_center.x.to_bits()),
            voxel_center.y.to_bits(),
        ),
        voxel_center.z.to_bits(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let half = resolution * 0.5;
    let mut out = Vec::with_capacity(cfg.poses_per_voxel * cfg.orientation_set.len());
    for _ in 0..cfg.poses_per_voxel {
        let offset = Vec3::new(
            rng.random_range(-half..half),
            rng.random_range(-half..half),
            rng.random_range(-half..half),
        );
        let position = voxel_center + offset;
        for q in &cfg.orientation_set {
            out.push(Pose::new(position, *q));
        }
    }
    out
}

/// Fully evaluated placement of the object at one sampled pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub sample: usize,
    pub object_pose: Pose,
    pub ee_pose: Pose,
    pub safety: f64,
    pub distances: ComponentDistances,
}

/// Best reach-feasible sample of one voxel by safety (earlier sample on ties),
/// or `None` if no sample is reach-feasible.
pub fn best_placement_in_voxel<R: ReachModel>(
    scene: &Scene,
    grasp: &GraspCandidate,
    reach: &R,
    samples: &[Pose],
) -> Option<Placement> {
    let mut best: Option<Placement> = None;
    for (i, pose) in samples.iter().enumerate() {
        let grasp_world = pose.compose(&grasp.pose);
        let Some(ee) = reach.end_effector_pose(pose, &grasp_world, &scene.robot_base) else {
            continue;
        };
        let distances = ComponentDistances::between(pose, &ee, &scene.human);
        let s = safety_from_distances(&distances);
        if best.as_ref().is_none_or(|b| s > b.safety) {
            best = Some(Placement {
                sample: i,
                object_pose: *pose,
                ee_pose: ee,
                safety: s,
                distances,
            });
        }
    }
    best
}

/// Turns a voxel's best placement into a solution when it is safe and reachable.
pub fn accept_placement(
    scene: &Scene,
    grasp: &GraspCandidate,
    grasp_appropriateness: f64,
    voxel: VoxelIndex,
    placement: &Placement,
) -> Option<HandoverSolution> {
    if !(placement.safety > 0.0) {
        return None;
    }
    let (advised, advised_world) =
        advised_human_grasp(&scene.object, &placement.object_pose, &scene.human.hand)?;
    let reach_cost = reachability(&scene.human.hand, &advised_world);
    if !reach_cost.is_finite() {
        return None;
    }
    Some(HandoverSolution {
        robot_grasp: grasp.id.clone(),
        object_pose: placement.object_pose,
        ee_pose: placement.ee_pose,
        advised_human_grasp: advised.id.clone(),
        costs: CostBreakdown {
            appropriateness: grasp_appropriateness,
            safety: placement.safety,
            reachability: reach_cost,
            component_distances: placement.distances,
        },
        voxel,
    })
}

/// Evaluates a single voxel end to end.
pub fn evaluate_voxel<R: ReachModel>(
    scene: &Scene,
    grasp: &GraspCandidate,
    grasp_appropriateness: f64,
    reach: &R,
    cfg: &SamplerConfig,
    voxel: VoxelIndex,
) -> Option<HandoverSolution> {
    let center = scene.map.voxel_center(voxel);
    let samples = sample_object_poses(center, scene.map.resolution, cfg);
    let best = best_placement_in_voxel(scene, grasp, reach, &samples)?;
    accept_placement(scene, grasp, grasp_appropriateness, voxel, &best)
}

pub fn optimize_handover<R: ReachModel>(
    scene: &Scene,
    reach: &R,
    cfg: &SamplerConfig,
) -> Result<HandoverSolution, PlanError> {
    cfg.validate()?;
    let grasp = select_robot_grasp(&scene.object)?;
    let a = appropriateness(grasp, &scene.object)?;
    voxels_by_hand_proximity(&scene.map, &scene.human.hand)
        .into_iter()
        .find_map(|v| evaluate_voxel(scene, grasp, a, reach, cfg, v))
        .ok_or(PlanError::NoFeasibleHandover)
}

/// Exhaustive reference for [`optimize_handover`], used as a test oracle.
///
/// Builds the full (voxel, sample, robot candidate) table, then applies the
/// hierarchy with plain filters and sorts instead of the incremental scan.
pub fn brute_force_handover<R: ReachModel>(
    scene: &Scene,
    reach: &R,
    cfg: &SamplerConfig,
) -> Result<HandoverSolution, PlanError> {
    cfg.validate()?;
    struct Row<'a> {
        voxel: VoxelIndex,
        voxel_dist: f64,
        sample: usize,
        pose: Pose,
        grasp: &'a GraspCandidate,
        appropriateness: f64,
        ee: Option<Pose>,
    }

    let obj = &scene.object;
    if !obj.grasps.iter().any(|g| g.in_affordance) {
        return Err(PlanError::NoHumanGrasp(obj.id.clone()));
    }
    let robot: Vec<&GraspCandidate> = obj.grasps.iter().filter(|g| !g.in_affordance).collect();
    if robot.is_empty() {
        return Err(PlanError::NoRobotGrasp(obj.id.clone()));
    }

    let mut rows = Vec::new();
    for v in scene.map.voxels() {
        let center = scene.map.voxel_center(v);
        let voxel_dist = (center - scene.human.hand.position).norm();
        for (sample, pose) in sample_object_poses(center, scene.map.resolution, cfg)
            .into_iter()
            .enumerate()
        {
            for g in &robot {
                let mut a = f64::INFINITY;
                for h in obj.grasps.iter().filter(|h| h.in_affordance) {
                    a = a.min(point_distance(&g.pose, &h.pose));
                }
                let gw = pose.compose(&g.pose);
                rows.push(Row {
                    voxel: v,
                    voxel_dist,
                    sample,
                    pose,
                    grasp: g,
                    appropriateness: a,
                    ee: reach.end_effector_pose(&pose, &gw, &scene.robot_base),
                });
            }
        }
    }

    // Grasp level: highest appropriateness, smallest id.
    let mut by_grasp: Vec<&Row> = rows.iter().collect();
    by_grasp.sort_by(|a, b| {
        b.appropriateness
            .total_cmp(&a.appropriateness)
            .then_with(|| a.grasp.id.cmp(&b.grasp.id))
    });
    let chosen = by_grasp[0].grasp.id.clone();

    // Placement level: keep feasible rows of the chosen grasp and rank them by
    // (voxel distance, voxel index, -safety, sample index).
    let mut feasible: Vec<(&Row, Pose, ComponentDistances, f64)> = rows
        .iter()
        .filter(|r| r.grasp.id == chosen)
        .filter_map(|r| {
            let ee = r.ee?;
            let d = ComponentDistances::between(&r.pose, &ee, &scene.human);
            Some((r, ee, d, safety_from_distances(&d)))
        })
        .collect();
    feasible.sort_by(|a, b| {
        a.0.voxel_dist
            .total_cmp(&b.0.voxel_dist)
            .then(a.0.voxel.cmp(&b.0.voxel))
            .then(b.3.total_cmp(&a.3))
            .then(a.0.sample.cmp(&b.0.sample))
    });

    let mut i = 0;
    while i < feasible.len() {
        let voxel = feasible[i].0.voxel;
        // First row of each voxel group is that voxel's argmax.
        let (row, ee, dists, s) = &feasible[i];
        if *s > 0.0 {
            let mut advised: Option<(&GraspCandidate, Pose, f64)> = None;
            for h in obj.grasps.iter().filter(|h| h.in_affordance) {
                let w = row.pose.compose(&h.pose);
                let d = point_distance(&w, &scene.human.hand);
                if advised.as_ref().is_none_or(|(ah, _, ad)| d < *ad || (d == *ad && h.id < ah.id)) {
                    advised = Some((h, w, d));
                }
            }
            let (h, _, d) = advised.expect("object has a human grasp");
            if d <= crate::costs::REACH_THRESHOLD {
                return Ok(HandoverSolution {
                    robot_grasp: chosen,
                    object_pose: row.pose,
                    ee_pose: *ee,
                    advised_human_grasp: h.id.clone(),
                    costs: CostBreakdown {
                        appropriateness: row.appropriateness,
                        safety: *s,
                        reachability: d,
                        component_distances: *dists,
                    },
                    voxel,
                });
            }
        }
        while i < feasible.len() && feasible[i].0.voxel == voxel {
            i += 1;
        }
    }
    Err(PlanError::NoFeasibleHandover)
}
