//! Relational learner: per-shape prototypes, MLN training over the corpus,
//! query inference, evaluation and guarded end-to-end execution.
//!
//! Predictions are discrete. Each (shape, mobility, method) key owns a
//! prototype pose (the mean of its training targets) and a modal robot grasp.
//! The MLN picks a prototype and a grasp class given shape, task and mobility.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costs::{advised_human_grasp, reachability, ComponentDistances, REACH_THRESHOLD, SAFETY_THRESHOLD};
use crate::dataset::{self, DatasetError, HandoverInstance, SplitSpec};
use crate::effort::MethodId;
use crate::geometry::{angular_distance, point_distance, Pose, Quat, Vec3};
use crate::mln::{
    learn_weights, map_infer_with_cap, pseudo_log_likelihood, Formula, Grounding, LearnOptions,
    Literal, MlnError, MlnModel, ModelFile, Predicate, Term, World,
};
use crate::optimizer::{select_robot_grasp, ReachModel};
use crate::scene::{MobilityLevel, ObjectModel, Scene, ShapeContext};
use crate::stats::{rank_sum, RankSumResult};

pub const OBJECT_CONST: &str = "O";
pub const QUERY_CONST: &str = "Q";
pub const HAS_SHAPE: &str = "hasShape";
pub const HAS_TASK: &str = "hasTask";
pub const HAS_MOBILITY: &str = "hasMobility";
pub const OBJECT_CONFIGURATION: &str = "objectConfiguration";
pub const GRASP_REGION: &str = "graspRegion";

/// Free-atom cap for handover queries; one atom per prototype and grasp class.
pub const SRL_MAP_ATOM_CAP: usize = 256;

/// Pose tolerance for a correct prediction.
pub const POSE_TOLERANCE_M: f64 = 0.005;
pub const ANGLE_TOLERANCE_DEG: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SrlError {
    #[error(transparent)]
    Mln(#[from] MlnError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("the training split is empty")]
    EmptyTrain,
    #[error("no prototype or domain constant covers `{0}`")]
    UncoveredKey(String),
    #[error("`{value}` is not a known {domain}")]
    UnknownDomainValue { domain: &'static str, value: String },
    #[error("inference left every `{0}` atom false")]
    NoWinningAtom(&'static str),
    #[error("the robot cannot reach grasp `{0}` at the inferred pose")]
    Unreachable(String),
    #[error("object `{0}` has no in-affordance grasp")]
    NoHumanGrasp(String),
    #[error("safety gate `{gate}` failed at step {step}: {distance:.4} m")]
    SafetyGateFailed {
        gate: String,
        distance: f64,
        step: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PrototypeKey {
    pub shape: ShapeContext,
    pub mobility: MobilityLevel,
    pub method: MethodId,
}

impl PrototypeKey {
    pub fn of(inst: &HandoverInstance) -> Self {
        Self {
            shape: inst.shape,
            mobility: inst.mobility,
            method: inst.method,
        }
    }

    /// Constant naming this key in the MLN, e.g. `cubic.H-M.method-B`.
    pub fn config_id(&self) -> String {
        format!("{}.{}.{}", self.shape, self.mobility, self.method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    #[serde(flatten)]
    pub key: PrototypeKey,
    pub config: String,
    pub pose: Pose,
    pub grasp: String,
    pub count: usize,
}

/// Prototypes sorted by key.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PrototypeTable {
    pub entries: Vec<Prototype>,
}

impl PrototypeTable {
    pub fn get(&self, key: &PrototypeKey) -> Option<&Prototype> {
        self.entries
            .binary_search_by(|p| p.key.cmp(key))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn by_config(&self, config: &str) -> Option<&Prototype> {
        self.entries.iter().find(|p| p.config == config)
    }
}

/// Mean of unit quaternions after flipping each into the first one's hemisphere.
fn mean_orientation(qs: &[Quat]) -> Quat {
    let q0 = qs[0];
    let mut acc = Quat::new(0.0, 0.0, 0.0, 0.0);
    for q in qs {
        let q = if q.dot(q0) < 0.0 { q.scale(-1.0) } else { *q };
        acc = Quat::new(acc.w + q.w, acc.x + q.x, acc.y + q.y, acc.z + q.z);
    }
    acc.normalized().unwrap_or(q0)
}

/// Averages target poses and takes the modal grasp per key.
pub fn build_prototypes(train: &[HandoverInstance]) -> PrototypeTable {
    let mut groups: BTreeMap<PrototypeKey, Vec<&HandoverInstance>> = BTreeMap::new();
    for i in train {
        groups.entry(PrototypeKey::of(i)).or_default().push(i);
    }
    let entries = groups
        .into_iter()
        .map(|(key, members)| {
            let n = members.len() as f64;
            let sum = members
                .iter()
                .fold(Vec3::ZERO, |a, i| a + i.target_object_pose.position);
            let qs: Vec<Quat> = members.iter().map(|i| i.target_object_pose.orientation).collect();
            let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
            for i in &members {
                *votes.entry(&i.target_robot_grasp).or_insert(0) += 1;
            }
            let mut grasp = "";
            let mut best = 0;
            for (g, c) in votes {
                if c > best {
                    best = c;
                    grasp = g;
                }
            }
            Prototype {
                key,
                config: key.config_id(),
                pose: Pose::new(sum * (1.0 / n), mean_orientation(&qs)),
                grasp: grasp.to_string(),
                count: members.len(),
            }
        })
        .collect();
    PrototypeTable { entries }
}

fn lit(negated: bool, predicate: &str, a: Term, b: Term) -> Literal {
    Literal {
        negated,
        predicate: predicate.to_string(),
        args: alloc::vec![a, b],
    }
}

fn var(v: &str) -> Term {
    Term::Var(v.to_string())
}

fn cst(c: &str) -> Term {
    Term::Const(c.to_string())
}

/// The handover schema.
///
/// For every (shape, task) pair and mobility level, one soft implication per
/// consequent value `hasShape ^ hasTask ^ hasMobility => objectConfiguration(c)`
/// and likewise for `graspRegion(g)`. Consequents are limited to the
/// prototypes and grasp classes of the same shape. All weights start at zero.
pub fn handover_model(
    pairs: &BTreeSet<(ShapeContext, String)>,
    tasks: &BTreeSet<String>,
    prototypes: &PrototypeTable,
    grasps_by_shape: &BTreeMap<ShapeContext, BTreeSet<String>>,
) -> MlnModel {
    let mut domains = BTreeMap::new();
    domains.insert("obj".to_string(), alloc::vec![OBJECT_CONST.to_string()]);
    domains.insert("query".to_string(), alloc::vec![QUERY_CONST.to_string()]);
    domains.insert(
        "shape".to_string(),
        ShapeContext::ALL.iter().map(|s| s.as_str().to_string()).collect(),
    );
    domains.insert("task".to_string(), tasks.iter().cloned().collect());
    domains.insert(
        "mobility".to_string(),
        MobilityLevel::ALL.iter().map(|l| l.as_str().to_string()).collect(),
    );
    domains.insert(
        "config".to_string(),
        prototypes.entries.iter().map(|p| p.config.clone()).collect(),
    );
    let all_grasps: BTreeSet<String> = grasps_by_shape.values().flatten().cloned().collect();
    domains.insert("grasp".to_string(), all_grasps.into_iter().collect());

    let pred = |name: &str, a: &str, b: &str| Predicate {
        name: name.to_string(),
        arg_domains: alloc::vec![a.to_string(), b.to_string()],
    };
    let predicates = alloc::vec![
        pred(HAS_SHAPE, "obj", "shape"),
        pred(HAS_TASK, "obj", "task"),
        pred(HAS_MOBILITY, "query", "mobility"),
        pred(OBJECT_CONFIGURATION, "query", "config"),
        pred(GRASP_REGION, "query", "grasp"),
    ];

    let mut formulas = Vec::new();
    for (shape, task) in pairs {
        for level in MobilityLevel::ALL {
            let body = [
                lit(true, HAS_SHAPE, var("o"), cst(shape.as_str())),
                lit(true, HAS_TASK, var("o"), cst(task)),
                lit(true, HAS_MOBILITY, var("q"), cst(level.as_str())),
            ];
            let mut push = |predicate: &str, value: &str| {
                let mut clause = body.to_vec();
                clause.push(lit(false, predicate, var("q"), cst(value)));
                formulas.push(Formula { clause, weight: 0.0 });
            };
            for p in prototypes.entries.iter().filter(|p| p.key.shape == *shape) {
                push(OBJECT_CONFIGURATION, &p.config);
            }
            for g in grasps_by_shape.get(shape).into_iter().flatten() {
                push(GRASP_REGION, g);
            }
        }
    }
    MlnModel {
        domains,
        predicates,
        formulas,
        query_predicates: alloc::vec![GRASP_REGION.to_string(), OBJECT_CONFIGURATION.to_string()],
    }
}

fn atom(g: &Grounding, predicate: &str, first: &str, value: &str, domain: &'static str) -> Result<usize, SrlError> {
    g.atom_index(predicate, &[first, value])
        .map_err(|_| SrlError::UnknownDomainValue {
            domain,
            value: value.to_string(),
        })
}

/// Prototype of the instance's shape whose pose lies nearest its target
/// (position first, then angle, then key order).
pub fn nearest_prototype<'a>(
    inst: &HandoverInstance,
    prototypes: &'a PrototypeTable,
) -> Result<&'a Prototype, SrlError> {
    let own = PrototypeKey::of(inst);
    if prototypes.get(&own).is_none() {
        return Err(SrlError::UncoveredKey(own.config_id()));
    }
    let mut best: Option<(&Prototype, f64, f64)> = None;
    for p in prototypes.entries.iter().filter(|p| p.key.shape == inst.shape) {
        let d = point_distance(&p.pose, &inst.target_object_pose);
        let a = angular_distance(&p.pose, &inst.target_object_pose);
        if best.is_none_or(|(_, bd, ba)| d < bd || (d == bd && a < ba)) {
            best = Some((p, d, a));
        }
    }
    Ok(best.map(|b| b.0).expect("own key is present"))
}

/// One world per instance: its shape, task and mobility, the nearest
/// prototype and its grasp class; everything else false.
pub fn corpus_to_worlds(
    corpus: &[HandoverInstance],
    prototypes: &PrototypeTable,
    g: &Grounding,
) -> Result<Vec<World>, SrlError> {
    corpus
        .iter()
        .map(|inst| {
            let proto = nearest_prototype(inst, prototypes)?;
            let mut w = alloc::vec![false; g.atom_count()];
            w[atom(g, HAS_SHAPE, OBJECT_CONST, inst.shape.as_str(), "shape")?] = true;
            w[atom(g, HAS_TASK, OBJECT_CONST, &inst.task, "task")?] = true;
            w[atom(g, HAS_MOBILITY, QUERY_CONST, inst.mobility.as_str(), "mobility")?] = true;
            w[g.atom_index(OBJECT_CONFIGURATION, &[QUERY_CONST, &proto.config])
                .map_err(|_| SrlError::UncoveredKey(proto.config.clone()))?] = true;
            w[g.atom_index(GRASP_REGION, &[QUERY_CONST, &inst.target_robot_grasp])
                .map_err(|_| SrlError::UncoveredKey(inst.target_robot_grasp.clone()))?] = true;
            Ok(w)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub iterations: usize,
    pub converged: bool,
    pub initial_pll: f64,
    pub final_pll: f64,
    pub train_instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub mln: ModelFile,
    pub prototypes: PrototypeTable,
    pub split: SplitSpec,
    pub train_meta: TrainMeta,
}

/// Prototypes and weights from the training side of `spec`.
///
/// Task constants come from the whole corpus so that a test-only object
/// still has a known task; its shape simply has no formulas if unseen.
pub fn train(corpus: &[HandoverInstance], spec: &SplitSpec, opts: &LearnOptions) -> Result<TrainedModel, SrlError> {
    let (train_set, _) = dataset::split(corpus, spec)?;
    if train_set.is_empty() {
        return Err(SrlError::EmptyTrain);
    }
    let prototypes = build_prototypes(&train_set);
    let pairs: BTreeSet<(ShapeContext, String)> =
        train_set.iter().map(|i| (i.shape, i.task.clone())).collect();
    let tasks: BTreeSet<String> = corpus.iter().map(|i| i.task.clone()).collect();
    let mut grasps: BTreeMap<ShapeContext, BTreeSet<String>> = BTreeMap::new();
    for i in &train_set {
        grasps.entry(i.shape).or_default().insert(i.target_robot_grasp.clone());
    }
    let mut model = handover_model(&pairs, &tasks, &prototypes, &grasps);
    let g = Grounding::new(&model)?;
    let worlds = corpus_to_worlds(&train_set, &prototypes, &g)?;
    let zeros = alloc::vec![0.0; model.formulas.len()];
    let report = learn_weights(&g, &zeros, &worlds, opts)?;
    let initial_pll = pseudo_log_likelihood(&g, &zeros, &worlds)?;
    let final_pll = pseudo_log_likelihood(&g, &report.weights, &worlds)?;
    model.set_weights(&report.weights)?;
    Ok(TrainedModel {
        mln: model.to_file(),
        prototypes,
        split: spec.clone(),
        train_meta: TrainMeta {
            iterations: report.iterations,
            converged: report.converged,
            initial_pll,
            final_pll,
            train_instances: train_set.len(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub shape: String,
    pub task: String,
    pub mobility: String,
}

impl Query {
    pub fn new(shape: ShapeContext, task: &str, mobility: MobilityLevel) -> Self {
        Self {
            shape: shape.as_str().to_string(),
            task: task.to_string(),
            mobility: mobility.as_str().to_string(),
        }
    }

    pub fn of(inst: &HandoverInstance) -> Self {
        Self::new(inst.shape, &inst.task, inst.mobility)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub config: String,
    pub key: PrototypeKey,
    /// Hand-relative object pose.
    pub object_pose: Pose,
    pub robot_grasp: String,
}

/// A trained model prepared for repeated queries.
#[derive(Debug, Clone)]
pub struct Predictor {
    grounding: Grounding,
    weights: Vec<f64>,
    prototypes: PrototypeTable,
    evidence_atoms: Vec<usize>,
    config_atoms: Vec<(usize, String)>,
    grasp_atoms: Vec<(usize, String)>,
    pub map_atom_cap: usize,
}

impl Predictor {
    pub fn new(model: &TrainedModel) -> Result<Self, SrlError> {
        let mln = MlnModel::from_file(&model.mln)?;
        let g = Grounding::new(&mln)?;
        let list = |pred: &str, domain: &str, first: &str| -> Result<Vec<(usize, String)>, SrlError> {
            mln.domains
                .get(domain)
                .ok_or_else(|| MlnError::DomainMissing(domain.to_string()))?
                .iter()
                .map(|c| Ok((g.atom_index(pred, &[first, c])?, c.clone())))
                .collect()
        };
        let mut evidence_atoms = Vec::new();
        for (p, d, f) in [
            (HAS_SHAPE, "shape", OBJECT_CONST),
            (HAS_TASK, "task", OBJECT_CONST),
            (HAS_MOBILITY, "mobility", QUERY_CONST),
        ] {
            evidence_atoms.extend(list(p, d, f)?.into_iter().map(|(a, _)| a));
        }
        Ok(Self {
            config_atoms: list(OBJECT_CONFIGURATION, "config", QUERY_CONST)?,
            grasp_atoms: list(GRASP_REGION, "grasp", QUERY_CONST)?,
            evidence_atoms,
            weights: mln.weights(),
            grounding: g,
            prototypes: model.prototypes.clone(),
            map_atom_cap: SRL_MAP_ATOM_CAP,
        })
    }

    /// Weight lost if `atom` alone were switched off in `world`.
    fn support(&self, world: &[bool], atom: usize) -> f64 {
        let mut off = world.to_vec();
        off[atom] = false;
        self.grounding
            .clauses_of(atom)
            .iter()
            .map(|&c| {
                let cl = &self.grounding.clauses[c];
                let w = self.weights[cl.formula];
                w * (cl.satisfied(world) as u8 as f64 - cl.satisfied(&off) as u8 as f64)
            })
            .sum()
    }

    /// Among the true atoms the one with the largest support, first on ties.
    fn winner<'a>(&self, world: &[bool], atoms: &'a [(usize, String)], pred: &'static str) -> Result<&'a str, SrlError> {
        let mut best: Option<(&str, f64)> = None;
        for (a, c) in atoms {
            if world[*a] {
                let s = self.support(world, *a);
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((c, s));
                }
            }
        }
        best.map(|b| b.0).ok_or(SrlError::NoWinningAtom(pred))
    }

    pub fn predict(&self, q: &Query) -> Result<Prediction, SrlError> {
        let g = &self.grounding;
        let mut ev: Vec<Option<bool>> = alloc::vec![None; g.atom_count()];
        for &a in &self.evidence_atoms {
            ev[a] = Some(false);
        }
        ev[atom(g, HAS_SHAPE, OBJECT_CONST, &q.shape, "shape")?] = Some(true);
        ev[atom(g, HAS_TASK, OBJECT_CONST, &q.task, "task")?] = Some(true);
        ev[atom(g, HAS_MOBILITY, QUERY_CONST, &q.mobility, "mobility")?] = Some(true);
        let world = map_infer_with_cap(g, &self.weights, &ev, self.map_atom_cap)?;
        let config = self.winner(&world, &self.config_atoms, OBJECT_CONFIGURATION)?;
        let grasp = self.winner(&world, &self.grasp_atoms, GRASP_REGION)?;
        let proto = self
            .prototypes
            .by_config(config)
            .ok_or_else(|| SrlError::UncoveredKey(config.to_string()))?;
        Ok(Prediction {
            config: config.to_string(),
            key: proto.key,
            object_pose: proto.pose,
            robot_grasp: grasp.to_string(),
        })
    }
}

pub fn infer_handover(model: &TrainedModel, q: &Query) -> Result<Prediction, SrlError> {
    Predictor::new(model)?.predict(q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    /// Shape name, or `overall`.
    pub label: String,
    pub objects: usize,
    pub instances: usize,
    pub pose_accuracy: f64,
    pub grasp_accuracy: f64,
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub rows: Vec<AccuracyRow>,
    /// Instance-weighted over every test instance.
    pub overall: AccuracyRow,
}

/// (pose correct, grasp correct); a failed inference is wrong on both.
pub fn score_prediction(pred: &Result<Prediction, SrlError>, inst: &HandoverInstance) -> (bool, bool) {
    match pred {
        Ok(p) => (
            point_distance(&p.object_pose, &inst.target_object_pose) <= POSE_TOLERANCE_M
                && angular_distance(&p.object_pose, &inst.target_object_pose) <= ANGLE_TOLERANCE_DEG,
            p.robot_grasp == inst.target_robot_grasp,
        ),
        Err(_) => (false, false),
    }
}

fn row(label: &str, items: &[(&HandoverInstance, (bool, bool))]) -> AccuracyRow {
    let n = items.len();
    let pct = |k: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
    let pose = pct(items.iter().filter(|(_, s)| s.0).count());
    let grasp = pct(items.iter().filter(|(_, s)| s.1).count());
    let objects: BTreeSet<&str> = items.iter().map(|(i, _)| i.object_id.as_str()).collect();
    AccuracyRow {
        label: label.to_string(),
        objects: objects.len(),
        instances: n,
        pose_accuracy: pose,
        grasp_accuracy: grasp,
        average: (pose + grasp) / 2.0,
    }
}

/// Aggregates precomputed predictions, one per test instance.
pub fn accuracy_report(test: &[HandoverInstance], preds: &[Result<Prediction, SrlError>]) -> AccuracyReport {
    let scored: Vec<(&HandoverInstance, (bool, bool))> = test
        .iter()
        .zip(preds)
        .map(|(i, p)| (i, score_prediction(p, i)))
        .collect();
    let rows = ShapeContext::ALL
        .iter()
        .filter_map(|s| {
            let items: Vec<_> = scored.iter().filter(|(i, _)| i.shape == *s).cloned().collect();
            (!items.is_empty()).then(|| row(s.as_str(), &items))
        })
        .collect();
    AccuracyReport {
        rows,
        overall: row("overall", &scored),
    }
}

pub fn evaluate(model: &TrainedModel, test: &[HandoverInstance]) -> Result<AccuracyReport, SrlError> {
    let p = Predictor::new(model)?;
    let preds: Vec<_> = test.iter().map(|i| p.predict(&Query::of(i))).collect();
    Ok(accuracy_report(test, &preds))
}

/// Grasp used when the object is picked up for its own task: the
/// in-affordance candidate nearest the object centre, smaller id on ties.
pub fn manipulation_grasp(obj: &ObjectModel) -> Option<&crate::scene::GraspCandidate> {
    let mut best: Option<(&crate::scene::GraspCandidate, f64)> = None;
    for g in obj.grasps.iter().filter(|g| g.in_affordance) {
        let d = g.pose.position.norm();
        if best.is_none_or(|(b, bd)| d < bd || (d == bd && g.id < b.id)) {
            best = Some((g, d));
        }
    }
    best.map(|b| b.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspDistance {
    pub object_id: String,
    pub shape: ShapeContext,
    pub manipulation_cm: f64,
    pub handover_cm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspDistanceRow {
    pub shape: ShapeContext,
    pub objects: usize,
    pub manipulation_cm: f64,
    pub handover_cm: f64,
    pub test: RankSumResult,
}

pub fn grasp_distances(objects: &[ObjectModel]) -> Result<Vec<GraspDistance>, SrlError> {
    objects
        .iter()
        .map(|o| {
            let m = manipulation_grasp(o).ok_or_else(|| SrlError::NoHumanGrasp(o.id.clone()))?;
            let h = select_robot_grasp(o).map_err(|_| SrlError::NoHumanGrasp(o.id.clone()))?;
            Ok(GraspDistance {
                object_id: o.id.clone(),
                shape: o.shape,
                manipulation_cm: 100.0 * m.pose.position.norm(),
                handover_cm: 100.0 * h.pose.position.norm(),
            })
        })
        .collect()
}

/// Mean grasp distance from the object centre per shape and mode, with a
/// rank-sum test between the modes over the shape's objects.
pub fn grasp_distance_report(objects: &[ObjectModel]) -> Result<Vec<GraspDistanceRow>, SrlError> {
    let all = grasp_distances(objects)?;
    let mut out = Vec::new();
    for shape in ShapeContext::ALL {
        let of: Vec<&GraspDistance> = all.iter().filter(|d| d.shape == shape).collect();
        if of.is_empty() {
            continue;
        }
        let m: Vec<f64> = of.iter().map(|d| d.manipulation_cm).collect();
        let h: Vec<f64> = of.iter().map(|d| d.handover_cm).collect();
        let n = of.len() as f64;
        out.push(GraspDistanceRow {
            shape,
            objects: of.len(),
            manipulation_cm: m.iter().sum::<f64>() / n,
            handover_cm: h.iter().sum::<f64>() / n,
            test: rank_sum(&h, &m).expect("both samples are non-empty and finite"),
        });
    }
    Ok(out)
}

/// Start of the guarded approach, measured outward from the receiver's hand.
pub const APPROACH_DISTANCE: f64 = 0.2;
pub const APPROACH_STEPS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateCheck {
    pub step: usize,
    pub gate: String,
    pub distance: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Otc {
    pub robot_grasp: String,
    pub object_pose: Pose,
    pub ee_pose: Pose,
    pub advised_human_grasp: String,
    pub config: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEnd {
    pub otc: Otc,
    pub trace: Vec<GateCheck>,
}

/// Checks every step of the approach; stops at the first failing gate.
pub fn check_gates(scene: &Scene, object_pose: &Pose, ee_pose: &Pose, advised_world: &Pose) -> (Vec<GateCheck>, Option<SrlError>) {
    let dir = (object_pose.position - scene.human.hand.position)
        .normalized()
        .or((scene.robot_base.position - object_pose.position).normalized())
        .unwrap_or(Vec3::new(1.0, 0.0, 0.0));
    let mut trace = Vec::new();
    for step in 0..=APPROACH_STEPS {
        let back = dir * (APPROACH_DISTANCE * (1.0 - step as f64 / APPROACH_STEPS as f64));
        let d = ComponentDistances::between(&object_pose.translated(back), &ee_pose.translated(back), &scene.human);
        for (gate, dist) in [("obj_to_hand", d.obj_to_hand), ("obj_to_face", d.obj_to_face), ("ee_to_hand", d.ee_to_hand)] {
            let passed = dist >= SAFETY_THRESHOLD;
            trace.push(GateCheck {
                step,
                gate: gate.to_string(),
                distance: dist,
                threshold: SAFETY_THRESHOLD,
                passed,
            });
            if !passed {
                return (trace, Some(SrlError::SafetyGateFailed { gate: gate.to_string(), distance: dist, step }));
            }
        }
    }
    let r = reachability(&scene.human.hand, advised_world);
    let dist = point_distance(&scene.human.hand, advised_world);
    let passed = r <= REACH_THRESHOLD;
    trace.push(GateCheck {
        step: APPROACH_STEPS,
        gate: "reach".to_string(),
        distance: dist,
        threshold: REACH_THRESHOLD,
        passed,
    });
    let fail = (!passed).then(|| SrlError::SafetyGateFailed {
        gate: "reach".to_string(),
        distance: dist,
        step: APPROACH_STEPS,
    });
    (trace, fail)
}

/// Infers the transfer configuration for `scene` and runs the gate sequence.
pub fn run_end_to_end<R: ReachModel>(
    scene: &Scene,
    mobility: MobilityLevel,
    task: &str,
    predictor: &Predictor,
    reach: &R,
) -> Result<EndToEnd, SrlError> {
    let pred = predictor.predict(&Query::new(scene.object.shape, task, mobility))?;
    let object_pose = pred.object_pose.translated(scene.human.hand.position);
    let grasp = scene
        .object
        .grasp(&pred.robot_grasp)
        .ok_or_else(|| SrlError::UnknownDomainValue {
            domain: "grasp",
            value: pred.robot_grasp.clone(),
        })?;
    let grasp_world = object_pose.compose(&grasp.pose);
    let ee = reach
        .end_effector_pose(&object_pose, &grasp_world, &scene.robot_base)
        .ok_or_else(|| SrlError::Unreachable(grasp.id.clone()))?;
    let (advised, advised_world) = advised_human_grasp(&scene.object, &object_pose, &scene.human.hand)
        .ok_or_else(|| SrlError::NoHumanGrasp(scene.object.id.clone()))?;
    let (trace, fail) = check_gates(scene, &object_pose, &ee, &advised_world);
    if let Some(e) = fail {
        return Err(e);
    }
    Ok(EndToEnd {
        otc: Otc {
            robot_grasp: grasp.id.clone(),
            object_pose,
            ee_pose: ee,
            advised_human_grasp: advised.id.clone(),
            config: pred.config,
        },
        trace,
    })
}
