//! Handover-preference corpus: study-shaped records, synthetic instances and
//! object-disjoint splits.
//!
//! Every instance is produced by running the generator of its method in the
//! canonical scene of its mobility level, then jittering the resulting pose.
//! Target poses are stored relative to the receiver's hand position (world
//! axes), so a learned pose can be replayed in any scene.
//! Mobility levels and methods are allocated by quota (largest remainder)
//! and shuffled, so the per-level method shares track the published
//! distribution to within rounding.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::effort::{method_transfer_point, MethodId};
use crate::geometry::{Pose, Quat, Vec3};
use crate::library::canonical_scene;
use crate::optimizer::{optimize_handover, select_robot_grasp, ReachModel, SamplerConfig};
use crate::scene::{robot_grasp_candidates, MobilityLevel, ObjectModel, Scene, ShapeContext};
use crate::seed::derive_seed;

pub const STUDY_RECORDS: usize = 259;
pub const SYNTHETIC_INSTANCES: usize = 1398;
pub const CORPUS_SIZE: usize = STUDY_RECORDS + SYNTHETIC_INSTANCES;
pub const STUDY_OBJECTS: usize = 5;
pub const SYNTHETIC_OBJECTS: usize = 27;

/// Participants per mobility level, in [`MobilityLevel::ALL`] order.
pub const LEVEL_PARTICIPANTS: [usize; 4] = [179, 27, 18, 35];

const STREAM_SHUFFLE: u64 = 1;
const STREAM_SYNTH: u64 = 2;
const STREAM_STUDY: u64 = 3;
const STREAM_RATINGS: u64 = 4;
const STREAM_SPLIT: u64 = 5;
const MAX_ATTEMPTS: u64 = 10;

/// Preferred-method shares (A, B, ours) per mobility level.
pub fn method_distribution(level: MobilityLevel) -> [f64; 3] {
    match level {
        MobilityLevel::High => [0.235, 0.737, 0.028],
        MobilityLevel::HighMedium => [0.231, 0.654, 0.115],
        MobilityLevel::LowMedium => [0.071, 0.286, 0.643],
        MobilityLevel::Low => [0.032, 0.161, 0.807],
    }
}

/// Integer counts summing to `total`, proportional to `weights`; leftover
/// units go to the largest fractional parts, earlier entries first on ties.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || !(sum > 0.0) {
        return alloc::vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| libm::floor(*e) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| {
        let fi = exact[i] - libm::floor(exact[i]);
        let fj = exact[j] - libm::floor(exact[j]);
        fj.total_cmp(&fi).then(i.cmp(&j))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverInstance {
    pub object_id: String,
    pub shape: ShapeContext,
    pub mobility: MobilityLevel,
    pub task: String,
    pub method: MethodId,
    pub target_object_pose: Pose,
    pub target_robot_grasp: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodRatings {
    pub method: MethodId,
    pub safety: u8,
    pub comfort: u8,
    pub appropriateness: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub participant_id: String,
    pub mobility: MobilityLevel,
    pub object_id: String,
    /// One entry per method, in [`MethodId::ALL`] order.
    pub ratings: [MethodRatings; 3],
    pub preferred_method: MethodId,
}

impl PreferenceRecord {
    pub fn validate(&self) -> Result<(), DatasetError> {
        for (r, m) in self.ratings.iter().zip(MethodId::ALL) {
            if r.method != m {
                return Err(DatasetError::BadRecord(format!(
                    "{}: ratings must list every method once, in order",
                    self.participant_id
                )));
            }
            for v in [r.safety, r.comfort, r.appropriateness] {
                if !(1..=5).contains(&v) {
                    return Err(DatasetError::BadRecord(format!(
                        "{}: rating {v} outside 1..=5",
                        self.participant_id
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("expected {expected} {what}, got {got}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("object `{0}` is on both sides of the split")]
    Overlap(String),
    #[error("object `{0}` is on neither side of the split")]
    Unassigned(String),
    #[error("object `{0}` is not in the object list")]
    UnknownObject(String),
    #[error("invalid record: {0}")]
    BadRecord(String),
    #[error("generation failed for `{object}` ({mobility}, {method}): {reason}")]
    Generation {
        object: String,
        mobility: MobilityLevel,
        method: MethodId,
        reason: String,
    },
}

/// Noise added to generated targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterConfig {
    /// Per-axis position standard deviation (m).
    pub position_sigma: f64,
    /// Per-axis rotation-vector standard deviation (degrees).
    pub angle_sigma_deg: f64,
}

impl Default for JitterConfig {
    fn default() -> Self {
        Self {
            position_sigma: 0.002,
            angle_sigma_deg: 0.5,
        }
    }
}

impl JitterConfig {
    pub const NONE: JitterConfig = JitterConfig {
        position_sigma: 0.0,
        angle_sigma_deg: 0.0,
    };

    pub fn apply(&self, pose: &Pose, rng: &mut impl Rng) -> Pose {
        let mut normal3 = |s: f64| {
            let x: f64 = StandardNormal.sample(rng);
            let y: f64 = StandardNormal.sample(rng);
            let z: f64 = StandardNormal.sample(rng);
            Vec3::new(x, y, z) * s
        };
        let dp = normal3(self.position_sigma);
        let dr = normal3(self.angle_sigma_deg.to_radians());
        let q = (pose.orientation * Quat::from_rotation_vector(dr))
            .normalized()
            .unwrap_or(pose.orientation);
        Pose::new(pose.position + dp, q)
    }
}

type BaseKey = (String, MobilityLevel, MethodId);

/// Noise-free generator output per (object, level, method).
#[derive(Debug, Clone, Default)]
pub struct BaseTable {
    entries: BTreeMap<BaseKey, Result<(Pose, String), String>>,
}

/// Hand-relative target pose and robot grasp of one method in the canonical scene.
pub fn generate_base<R: ReachModel>(
    obj: &ObjectModel,
    level: MobilityLevel,
    method: MethodId,
    reach: &R,
    sampler: &SamplerConfig,
) -> Result<(Pose, String), String> {
    let scene = canonical_scene(level, obj);
    let (pose, grasp) = generate_in_scene(&scene, method, reach, sampler)?;
    Ok((pose.translated(-scene.human.hand.position), grasp))
}

/// World-frame target pose and robot grasp of one method in `scene`.
pub fn generate_in_scene<R: ReachModel>(
    scene: &Scene,
    method: MethodId,
    reach: &R,
    sampler: &SamplerConfig,
) -> Result<(Pose, String), String> {
    let obj = &scene.object;
    match method {
        MethodId::MethodA => {
            let p = method_transfer_point(method, scene, reach, sampler).map_err(|e| e.to_string())?;
            let g = robot_grasp_candidates(obj)
                .first()
                .map(|g| g.id.clone())
                .ok_or_else(|| format!("object `{}` has no robot grasp", obj.id))?;
            Ok((Pose::from_position(p), g))
        }
        MethodId::MethodB => {
            let p = method_transfer_point(method, scene, reach, sampler).map_err(|e| e.to_string())?;
            let g = select_robot_grasp(obj).map_err(|e| e.to_string())?;
            Ok((Pose::from_position(p), g.id.clone()))
        }
        MethodId::Ours => {
            let sol = optimize_handover(scene, reach, sampler).map_err(|e| e.to_string())?;
            Ok((sol.object_pose, sol.robot_grasp))
        }
    }
}

impl BaseTable {
    pub fn build<R: ReachModel>(objects: &[ObjectModel], reach: &R, sampler: &SamplerConfig) -> Self {
        let mut entries = BTreeMap::new();
        for obj in objects {
            for level in MobilityLevel::ALL {
                for method in MethodId::ALL {
                    entries.insert(
                        (obj.id.clone(), level, method),
                        generate_base(obj, level, method, reach, sampler),
                    );
                }
            }
        }
        Self { entries }
    }

    pub fn from_entries<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (BaseKey, Result<(Pose, String), String>)>,
    {
        Self {
            entries: entries.into_iter().collect(),
        }
    }

    pub fn get(&self, object: &str, level: MobilityLevel, method: MethodId) -> Option<&Result<(Pose, String), String>> {
        self.entries.get(&(object.to_string(), level, method))
    }
}

/// Jittered instance; up to ten attempts, each with fresh noise.
pub fn realize(
    table: &BaseTable,
    obj: &ObjectModel,
    level: MobilityLevel,
    method: MethodId,
    jitter: &JitterConfig,
    seed: u64,
) -> Result<HandoverInstance, DatasetError> {
    let fail = |reason: String| DatasetError::Generation {
        object: obj.id.clone(),
        mobility: level,
        method,
        reason,
    };
    let (pose, grasp) = match table.get(&obj.id, level, method) {
        Some(Ok(b)) => b,
        Some(Err(e)) => return Err(fail(e.clone())),
        None => return Err(fail("object missing from the generator table".into())),
    };
    let mut last = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, attempt));
        let target = jitter.apply(pose, &mut rng);
        match target.validate() {
            Ok(()) => {
                return Ok(HandoverInstance {
                    object_id: obj.id.clone(),
                    shape: obj.shape,
                    mobility: level,
                    task: obj.task.clone(),
                    method,
                    target_object_pose: target,
                    target_robot_grasp: grasp.clone(),
                })
            }
            Err(e) => last = e.to_string(),
        }
    }
    Err(fail(last))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub total: usize,
    /// Relative frequency of each mobility level.
    pub level_weights: [f64; 4],
    /// One level per instance instead of quota allocation; its length must be `total`.
    pub forced_levels: Option<Vec<MobilityLevel>>,
    pub jitter: JitterConfig,
    pub seed: u64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            total: SYNTHETIC_INSTANCES,
            level_weights: LEVEL_PARTICIPANTS.map(|c| c as f64),
            forced_levels: None,
            jitter: JitterConfig::default(),
            seed: 42,
        }
    }
}

/// What one synthetic instance will be built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub index: usize,
    pub object: usize,
    pub mobility: MobilityLevel,
    pub method: MethodId,
}

/// Method quotas within each level, as a flat list in level order.
fn method_quota(levels: &[MobilityLevel]) -> Vec<(MobilityLevel, MethodId)> {
    let mut out = Vec::with_capacity(levels.len());
    for level in MobilityLevel::ALL {
        let n = levels.iter().filter(|&&l| l == level).count();
        let counts = largest_remainder(n, &method_distribution(level));
        for (m, c) in MethodId::ALL.into_iter().zip(counts) {
            out.extend(core::iter::repeat_n((level, m), c));
        }
    }
    out
}

/// Level and method of every instance, shuffled under the seed; objects are
/// dealt round-robin over the shuffled list.
pub fn plan_synthesis(cfg: &SynthesisConfig, objects: usize) -> Result<Vec<Assignment>, DatasetError> {
    if objects == 0 {
        return Err(DatasetError::CountMismatch {
            what: "objects",
            expected: SYNTHETIC_OBJECTS,
            got: 0,
        });
    }
    let pairs = match &cfg.forced_levels {
        Some(levels) => {
            if levels.len() != cfg.total {
                return Err(DatasetError::CountMismatch {
                    what: "forced levels",
                    expected: cfg.total,
                    got: levels.len(),
                });
            }
            // keep the caller's level order, draw methods from the level quotas
            let mut quota = method_quota(levels);
            quota.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_SHUFFLE, 1)));
            let mut pools: BTreeMap<MobilityLevel, Vec<MethodId>> = BTreeMap::new();
            for (l, m) in quota {
                pools.entry(l).or_default().push(m);
            }
            levels
                .iter()
                .map(|l| (*l, pools.get_mut(l).and_then(Vec::pop).unwrap_or(MethodId::Ours)))
                .collect()
        }
        None => {
            let per_level = largest_remainder(cfg.total, &cfg.level_weights);
            let levels: Vec<MobilityLevel> = MobilityLevel::ALL
                .into_iter()
                .zip(per_level)
                .flat_map(|(l, c)| core::iter::repeat_n(l, c))
                .collect();
            let mut pairs = method_quota(&levels);
            pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_SHUFFLE, 0)));
            pairs
        }
    };
    Ok(pairs
        .into_iter()
        .enumerate()
        .map(|(index, (mobility, method))| Assignment {
            index,
            object: index % objects,
            mobility,
            method,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub index: usize,
    pub object_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Synthesis {
    pub instances: Vec<HandoverInstance>,
    pub skipped: Vec<Skipped>,
}

/// Realizes one planned assignment; callers may run these in any order.
pub fn realize_assignment(
    a: &Assignment,
    objects: &[ObjectModel],
    table: &BaseTable,
    cfg: &SynthesisConfig,
) -> Result<HandoverInstance, Skipped> {
    let obj = &objects[a.object];
    realize(
        table,
        obj,
        a.mobility,
        a.method,
        &cfg.jitter,
        derive_seed(cfg.seed, STREAM_SYNTH, a.index as u64),
    )
    .map_err(|e| Skipped {
        index: a.index,
        object_id: obj.id.clone(),
        reason: e.to_string(),
    })
}

pub fn synthesize(
    objects: &[ObjectModel],
    table: &BaseTable,
    cfg: &SynthesisConfig,
) -> Result<Synthesis, DatasetError> {
    let plan = plan_synthesis(cfg, objects.len())?;
    let mut out = Synthesis {
        instances: Vec::with_capacity(plan.len()),
        skipped: Vec::new(),
    };
    for a in &plan {
        match realize_assignment(a, objects, table, cfg) {
            Ok(i) => out.instances.push(i),
            Err(s) => out.skipped.push(s),
        }
    }
    Ok(out)
}

fn rating(rng: &mut ChaCha8Rng, mean: f64) -> u8 {
    let x: f64 = StandardNormal.sample(rng);
    libm::round(mean + 0.8 * x).clamp(1.0, 5.0) as u8
}

/// 259 study-shaped records over the given study objects. Level counts follow
/// the participant table and preferred methods follow the level quotas exactly.
pub fn generate_study_records(study_objects: &[ObjectModel], seed: u64) -> Result<Vec<PreferenceRecord>, DatasetError> {
    if study_objects.len() != STUDY_OBJECTS {
        return Err(DatasetError::CountMismatch {
            what: "study objects",
            expected: STUDY_OBJECTS,
            got: study_objects.len(),
        });
    }
    let levels: Vec<MobilityLevel> = MobilityLevel::ALL
        .into_iter()
        .zip(LEVEL_PARTICIPANTS)
        .flat_map(|(l, c)| core::iter::repeat_n(l, c))
        .collect();
    let mut pairs = method_quota(&levels);
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SHUFFLE, 2)));
    Ok(pairs
        .into_iter()
        .enumerate()
        .map(|(i, (mobility, preferred))| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_RATINGS, i as u64));
            let ratings = MethodId::ALL.map(|m| {
                let mean = if m == preferred { 4.2 } else { 2.9 };
                MethodRatings {
                    method: m,
                    safety: rating(&mut rng, mean),
                    comfort: rating(&mut rng, mean),
                    appropriateness: rating(&mut rng, mean),
                }
            });
            PreferenceRecord {
                participant_id: format!("p{:03}", i + 1),
                mobility,
                object_id: study_objects[i % STUDY_OBJECTS].id.clone(),
                ratings,
                preferred_method: preferred,
            }
        })
        .collect())
}

/// Study records (converted through their preferred method) followed by the
/// synthetic instances.
pub fn make_corpus(
    study: &[PreferenceRecord],
    synthetic: &[HandoverInstance],
    objects: &[ObjectModel],
    table: &BaseTable,
    jitter: &JitterConfig,
    seed: u64,
) -> Result<Vec<HandoverInstance>, DatasetError> {
    if study.len() != STUDY_RECORDS {
        return Err(DatasetError::CountMismatch {
            what: "study records",
            expected: STUDY_RECORDS,
            got: study.len(),
        });
    }
    if synthetic.len() != SYNTHETIC_INSTANCES {
        return Err(DatasetError::CountMismatch {
            what: "synthetic instances",
            expected: SYNTHETIC_INSTANCES,
            got: synthetic.len(),
        });
    }
    let mut corpus = Vec::with_capacity(CORPUS_SIZE);
    for (i, r) in study.iter().enumerate() {
        r.validate()?;
        let obj = objects
            .iter()
            .find(|o| o.id == r.object_id)
            .ok_or_else(|| DatasetError::UnknownObject(r.object_id.clone()))?;
        corpus.push(realize(
            table,
            obj,
            r.mobility,
            r.preferred_method,
            jitter,
            derive_seed(seed, STREAM_STUDY, i as u64),
        )?);
    }
    corpus.extend_from_slice(synthetic);
    let ids: BTreeSet<&str> = corpus.iter().map(|i| i.object_id.as_str()).collect();
    if ids.len() != STUDY_OBJECTS + SYNTHETIC_OBJECTS {
        return Err(DatasetError::CountMismatch {
            what: "distinct objects",
            expected: STUDY_OBJECTS + SYNTHETIC_OBJECTS,
            got: ids.len(),
        });
    }
    Ok(corpus)
}

/// Share of each method per level, indexed `[level][method]`; rows without
/// instances are zero.
pub fn method_frequencies(instances: &[HandoverInstance]) -> [[f64; 3]; 4] {
    let mut counts = [[0usize; 3]; 4];
    for i in instances {
        counts[i.mobility.index()][i.method.index()] += 1;
    }
    counts.map(|row| {
        let n: usize = row.iter().sum();
        row.map(|c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_object_ids: Vec<String>,
    pub test_object_ids: Vec<String>,
    pub seed: u64,
}

/// Test objects per shape in the default 22/10 split.
pub const DEFAULT_TEST_PER_SHAPE: [(ShapeContext, usize); 4] = [
    (ShapeContext::Cubic, 3),
    (ShapeContext::Spherical, 2),
    (ShapeContext::Irregular, 2),
    (ShapeContext::Cylindrical, 3),
];

/// Shape-stratified split: the per-shape test counts above, objects drawn
/// under the seed, every shape keeping training objects.
pub fn default_split(objects: &[ObjectModel], seed: u64) -> SplitSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SPLIT, 0));
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (shape, k) in DEFAULT_TEST_PER_SHAPE {
        let mut ids: Vec<String> = objects
            .iter()
            .filter(|o| o.shape == shape)
            .map(|o| o.id.clone())
            .collect();
        ids.sort();
        ids.shuffle(&mut rng);
        let k = k.min(ids.len().saturating_sub(1));
        test.extend(ids.drain(..k));
        train.extend(ids);
    }
    train.sort();
    test.sort();
    SplitSpec {
        train_object_ids: train,
        test_object_ids: test,
        seed,
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let train: BTreeSet<&str> = self.train_object_ids.iter().map(String::as_str).collect();
        for id in &self.test_object_ids {
            if train.contains(id.as_str()) {
                return Err(DatasetError::Overlap(id.clone()));
            }
        }
        Ok(())
    }
}

/// Routes every instance by object id.
pub fn split(
    corpus: &[HandoverInstance],
    spec: &SplitSpec,
) -> Result<(Vec<HandoverInstance>, Vec<HandoverInstance>), DatasetError> {
    spec.validate()?;
    let train: BTreeSet<&str> = spec.train_object_ids.iter().map(String::as_str).collect();
    let test: BTreeSet<&str> = spec.test_object_ids.iter().map(String::as_str).collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in corpus {
        if train.contains(i.object_id.as_str()) {
            a.push(i.clone());
        } else if test.contains(i.object_id.as_str()) {
            b.push(i.clone());
        } else {
            return Err(DatasetError::Unassigned(i.object_id.clone()));
        }
    }
    Ok((a, b))
}
