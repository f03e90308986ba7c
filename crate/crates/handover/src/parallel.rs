//! Rayon-backed variants of the core batch operations. Each returns exactly
//! what its sequential counterpart returns.

use anyhow::{bail, Context, Result};
use handover_core::costs::appropriateness;
use handover_core::dataset::{generate_base, BaseTable, HandoverInstance};
use handover_core::effort::MethodId;
use handover_core::geometry::voxels_by_hand_proximity;
use handover_core::optimizer::{
    evaluate_voxel, select_robot_grasp, HandoverSolution, PlanError, ReachModel, SamplerConfig,
};
use handover_core::srl::{accuracy_report, AccuracyReport, Predictor, Query};
use handover_core::{MobilityLevel, ObjectModel, Scene};
use rayon::prelude::*;

pub const THREADS_VAR: &str = "HANDOVER_OPT_THREADS";

/// Thread count from `HANDOVER_OPT_THREADS`; unset or 0 means automatic.
pub fn configured_threads() -> Result<usize> {
    match std::env::var(THREADS_VAR) {
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => bail!("{THREADS_VAR}: {e}"),
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_VAR} must be a non-negative integer, got `{v}`")),
    }
}

pub fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads).build()?)
}

/// Voxels are scanned in hand-proximity order; the first feasible one wins,
/// whichever worker finds it.
pub fn optimize_handover_par<R: ReachModel + Sync>(
    scene: &Scene,
    reach: &R,
    cfg: &SamplerConfig,
) -> Result<HandoverSolution, PlanError> {
    cfg.validate()?;
    let grasp = select_robot_grasp(&scene.object)?;
    let a = appropriateness(grasp, &scene.object)?;
    voxels_by_hand_proximity(&scene.map, &scene.human.hand)
        .into_par_iter()
        .find_map_first(|v| evaluate_voxel(scene, grasp, a, reach, cfg, v))
        .ok_or(PlanError::NoFeasibleHandover)
}

pub fn build_base_table_par<R: ReachModel + Sync>(
    objects: &[ObjectModel],
    reach: &R,
    sampler: &SamplerConfig,
) -> BaseTable {
    let keys: Vec<(&ObjectModel, MobilityLevel, MethodId)> = objects
        .iter()
        .flat_map(|o| {
            MobilityLevel::ALL
                .into_iter()
                .flat_map(move |l| MethodId::ALL.into_iter().map(move |m| (o, l, m)))
        })
        .collect();
    let entries: Vec<_> = keys
        .into_par_iter()
        .map(|(o, l, m)| ((o.id.clone(), l, m), generate_base(o, l, m, reach, sampler)))
        .collect();
    BaseTable::from_entries(entries)
}

pub fn evaluate_par(predictor: &Predictor, test: &[HandoverInstance]) -> AccuracyReport {
    let preds: Vec<_> = test.par_iter().map(|i| predictor.predict(&Query::of(i))).collect();
    accuracy_report(test, &preds)
}
