//! Command-line front end. Exit codes: 0 success, 1 error, 2 infeasible or
//! empty result.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use handover_core::dataset::{
    default_split, generate_study_records, make_corpus, split, synthesize, JitterConfig, SplitSpec,
    SynthesisConfig,
};
use handover_core::effort::{compare_methods, EffortOptions, EffortRow};
use handover_core::library::{effort_setups, object_library};
use handover_core::mln::{Grounding, LearnOptions, MlnModel};
use handover_core::optimizer::{PlanError, RadialReach, SamplerConfig};
use handover_core::srl::{
    self, corpus_to_worlds, grasp_distance_report, grasp_distances, run_end_to_end, Predictor, Query, SrlError,
    TrainedModel,
};
use handover_core::stats::{mixed_anova, rank_sum};
use handover_core::MobilityLevel;
use serde::Serialize;

use crate::files::{self, Manifest, ManifestEntry, Measure, RatingRow, Stamp};
use crate::parallel;
use crate::scene_io::load_scene;

#[derive(Debug, Parser)]
#[command(name = "handover", version, about = "Plan, learn and evaluate robot-to-human handovers")]
pub struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Leave the generation time out of output files.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct PlanArgs {
    #[arg(long, default_value_t = 0.35)]
    pub reach_min: f64,
    #[arg(long, default_value_t = 1.10)]
    pub reach_max: f64,
    /// Object pose samples per voxel.
    #[arg(long, default_value_t = 4)]
    pub samples: usize,
}

impl PlanArgs {
    fn reach(&self) -> Result<RadialReach> {
        Ok(RadialReach::new(self.reach_min, self.reach_max)?)
    }

    fn sampler(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            poses_per_voxel: self.samples,
            seed,
            ..SamplerConfig::default()
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct LearnArgs {
    #[arg(long, default_value_t = LearnOptions::default().learning_rate)]
    pub learning_rate: f64,
    /// Standard deviation of the zero-mean Gaussian weight prior.
    #[arg(long, default_value_t = LearnOptions::default().l2_prior_sigma)]
    pub prior_sigma: f64,
    #[arg(long, default_value_t = LearnOptions::default().max_iters)]
    pub max_iters: usize,
    #[arg(long, default_value_t = LearnOptions::default().tol)]
    pub tol: f64,
}

impl LearnArgs {
    fn options(&self) -> LearnOptions {
        LearnOptions {
            learning_rate: self.learning_rate,
            l2_prior_sigma: self.prior_sigma,
            max_iters: self.max_iters,
            tol: self.tol,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize the transfer configuration for one scene.
    Plan {
        #[arg(long)]
        scene: PathBuf,
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, default_value = "solution.json")]
        out: PathBuf,
    },
    /// Receiver arm effort of the three handover methods.
    Effort {
        #[arg(long, default_value_t = 3)]
        setups: usize,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, default_value = "effort.csv")]
        out: PathBuf,
    },
    /// Corpus generation and splitting.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Learn prototypes and MLN weights from the training objects.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[command(flatten)]
        learn: LearnArgs,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
        /// Also write the bare MLN model and its training worlds here.
        #[arg(long)]
        export_mln: Option<PathBuf>,
    },
    /// Predict the transfer pose and robot grasp class for one query.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        shape: String,
        #[arg(long)]
        task: String,
        #[arg(long)]
        mobility: String,
    },
    /// Accuracy on the model's test objects.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "accuracy.csv")]
        out: PathBuf,
    },
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Grasp distance from the object centre, manipulation versus handover.
    GraspReport {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "grasp_report.csv")]
        out: PathBuf,
        /// Per-object distances.
        #[arg(long)]
        distances: Option<PathBuf>,
    },
    /// Infer for a scene and check the safety gates along the approach.
    Run {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Defaults to the scene's mobility level.
        #[arg(long)]
        mobility: Option<MobilityLevel>,
        /// Defaults to the scene's task.
        #[arg(long)]
        task: Option<String>,
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, default_value = "run.json")]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Write corpus.csv, ratings.csv, manifest.json and skipped.csv.
    Gen {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = JitterConfig::default().position_sigma * 1000.0)]
        jitter_mm: f64,
        #[arg(long, default_value_t = JitterConfig::default().angle_sigma_deg)]
        jitter_deg: f64,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Object-disjoint train/test split stratified by shape.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "split.json")]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Two-sided rank-sum test between two methods' ratings.
    Ranksum {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long, value_enum)]
        measure: Measure,
        #[arg(long)]
        a: handover_core::effort::MethodId,
        #[arg(long)]
        b: handover_core::effort::MethodId,
        /// Restrict to one mobility level.
        #[arg(long)]
        mobility: Option<MobilityLevel>,
        #[arg(long, default_value = "ranksum.csv")]
        out: PathBuf,
    },
    /// Method (within) by mobility (between) mixed ANOVA.
    Anova {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long, value_enum)]
        measure: Measure,
        #[arg(long, default_value = "anova.csv")]
        out: PathBuf,
    },
}

/// 2 for outcomes that are valid but empty or infeasible, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(PlanError::NoFeasibleHandover) = cause.downcast_ref::<PlanError>() {
            return 2;
        }
        if let Some(
            SrlError::NoWinningAtom(_) | SrlError::SafetyGateFailed { .. } | SrlError::Unreachable(_),
        ) = cause.downcast_ref::<SrlError>()
        {
            return 2;
        }
    }
    1
}

pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let threads = parallel::configured_threads()?;
    let pool = parallel::pool(threads)?;
    let stamp = Stamp::new(cli.seed, !cli.no_timestamp);
    pool.install(|| dispatch(cli.command, cli.seed, &stamp))
}

fn dispatch(cmd: Command, seed: u64, stamp: &Stamp) -> Result<()> {
    match cmd {
        Command::Plan { scene, plan, out } => cmd_plan(&scene, &plan, seed, stamp, &out),
        Command::Effort {
            setups,
            trials,
            plan,
            out,
        } => cmd_effort(setups, trials, &plan, seed, stamp, &out),
        Command::Dataset(DatasetCommand::Gen {
            out_dir,
            jitter_mm,
            jitter_deg,
            plan,
        }) => cmd_dataset_gen(&out_dir, jitter_mm, jitter_deg, &plan, seed, stamp),
        Command::Dataset(DatasetCommand::Split { manifest, out }) => cmd_split(&manifest, seed, stamp, &out),
        Command::Train {
            corpus,
            split,
            learn,
            out,
            export_mln,
        } => cmd_train(&corpus, &split, &learn, stamp, &out, export_mln.as_deref()),
        Command::Infer {
            model,
            shape,
            task,
            mobility,
        } => cmd_infer(&model, Query { shape, task, mobility }),
        Command::Eval { model, corpus, out } => cmd_eval(&model, &corpus, stamp, &out),
        Command::Stats(StatsCommand::Ranksum {
            ratings,
            measure,
            a,
            b,
            mobility,
            out,
        }) => cmd_ranksum(&ratings, measure, a, b, mobility, stamp, &out),
        Command::Stats(StatsCommand::Anova { ratings, measure, out }) => cmd_anova(&ratings, measure, stamp, &out),
        Command::GraspReport {
            manifest,
            out,
            distances,
        } => cmd_grasp_report(manifest.as_deref(), stamp, &out, distances.as_deref()),
        Command::Run {
            scene,
            model,
            mobility,
            task,
            plan,
            out,
        } => cmd_run(&scene, &model, mobility, task, &plan, stamp, &out),
    }
}

fn cmd_plan(scene: &Path, plan: &PlanArgs, seed: u64, stamp: &Stamp, out: &Path) -> Result<()> {
    let scene = load_scene(scene)?;
    let sol = parallel::optimize_handover_par(&scene, &plan.reach()?, &plan.sampler(seed))?;
    files::write_json(out, stamp, &sol)?;
    let p = sol.object_pose.position;
    println!(
        "robot grasp {} | object at ({:.3}, {:.3}, {:.3}) | voxel ({}, {}, {}) | safety {:.3} reach {:.3}",
        sol.robot_grasp, p.x, p.y, p.z, sol.voxel.ix, sol.voxel.iy, sol.voxel.iz, sol.costs.safety, sol.costs.reachability
    );
    Ok(())
}

fn cmd_effort(setups: usize, trials: usize, plan: &PlanArgs, seed: u64, stamp: &Stamp, out: &Path) -> Result<()> {
    let scenes = effort_setups();
    if setups == 0 || setups > scenes.len() {
        bail!("--setups must be between 1 and {}", scenes.len());
    }
    let reach = plan.reach()?;
    let sampler = plan.sampler(seed);
    let opts = EffortOptions::default();
    let mut rows: Vec<EffortRow> = Vec::new();
    for (id, scene) in scenes.iter().take(setups).enumerate() {
        let t = compare_methods(scene, id, trials, seed, &reach, &sampler, &opts)?;
        println!(
            "setup {id}: method-A {:.2} Nm, method-B {:.2} Nm, Ours {:.2} Nm",
            t.means[0], t.means[1], t.means[2]
        );
        rows.extend(t.rows);
    }
    files::write_csv(out, stamp, &rows)
}

fn library_manifest() -> Manifest {
    Manifest {
        objects: object_library()
            .into_iter()
            .map(|e| ManifestEntry {
                object: e.object,
                study: e.study,
            })
            .collect(),
    }
}

fn cmd_dataset_gen(out_dir: &Path, jitter_mm: f64, jitter_deg: f64, plan: &PlanArgs, seed: u64, stamp: &Stamp) -> Result<()> {
    if !(jitter_mm >= 0.0 && jitter_deg >= 0.0 && jitter_mm.is_finite() && jitter_deg.is_finite()) {
        bail!("jitter must be finite and non-negative");
    }
    let jitter = JitterConfig {
        position_sigma: jitter_mm / 1000.0,
        angle_sigma_deg: jitter_deg,
    };
    let manifest = library_manifest();
    let all = manifest.objects();
    let study: Vec<_> = manifest.objects.iter().filter(|e| e.study).map(|e| e.object.clone()).collect();
    let other: Vec<_> = manifest.objects.iter().filter(|e| !e.study).map(|e| e.object.clone()).collect();
    let table = parallel::build_base_table_par(&all, &plan.reach()?, &plan.sampler(seed));
    let cfg = SynthesisConfig {
        jitter,
        seed,
        ..SynthesisConfig::default()
    };
    let synth = synthesize(&other, &table, &cfg)?;
    files::write_csv(&out_dir.join("skipped.csv"), stamp, &skipped_rows(&synth))?;
    let records = generate_study_records(&study, seed)?;
    let corpus = make_corpus(&records, &synth.instances, &all, &table, &jitter, seed)?;
    files::write_json(&out_dir.join("manifest.json"), stamp, &manifest)?;
    files::write_corpus(&out_dir.join("corpus.csv"), stamp, &corpus)?;
    files::write_csv(&out_dir.join("ratings.csv"), stamp, &files::rating_rows(&records))?;
    println!(
        "{} instances over {} objects ({} skipped) in {}",
        corpus.len(),
        all.len(),
        synth.skipped.len(),
        out_dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SkippedRow {
    index: usize,
    object_id: String,
    reason: String,
}

fn skipped_rows(synth: &handover_core::dataset::Synthesis) -> Vec<SkippedRow> {
    synth
        .skipped
        .iter()
        .map(|s| SkippedRow {
            index: s.index,
            object_id: s.object_id.clone(),
            reason: s.reason.clone(),
        })
        .collect()
}

fn cmd_split(manifest: &Path, seed: u64, stamp: &Stamp, out: &Path) -> Result<()> {
    let m = files::read_manifest(manifest)?;
    let spec = default_split(&m.data.objects(), seed);
    spec.validate()?;
    files::write_json(out, stamp, &spec)?;
    println!(
        "{} train objects, {} test objects",
        spec.train_object_ids.len(),
        spec.test_object_ids.len()
    );
    Ok(())
}

fn cmd_train(corpus: &Path, split_path: &Path, learn: &LearnArgs, stamp: &Stamp, out: &Path, export: Option<&Path>) -> Result<()> {
    let (_, corpus) = files::read_corpus(corpus)?;
    let spec: SplitSpec = files::read_json(split_path)?.data;
    let model = srl::train(&corpus, &spec, &learn.options())?;
    files::write_json(out, stamp, &model)?;
    if let Some(dir) = export {
        let mln = MlnModel::from_file(&model.mln)?;
        let g = Grounding::new(&mln)?;
        let (train_set, _) = split(&corpus, &spec)?;
        let worlds = corpus_to_worlds(&train_set, &model.prototypes, &g)?;
        files::write_json(&dir.join("mln_model.json"), stamp, &model.mln)?;
        let mut text = stamp.csv_line();
        text.push('\n');
        text.push_str(&files::worlds_text(&g, &worlds));
        files::write_text(&dir.join("mln_dataset.txt"), &text)?;
    }
    let m = &model.train_meta;
    println!(
        "trained on {} instances: {} iterations (converged: {}), PLL {:.3} -> {:.3}",
        m.train_instances, m.iterations, m.converged, m.initial_pll, m.final_pll
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<TrainedModel> {
    Ok(files::read_json::<TrainedModel>(path)?.data)
}

#[derive(Serialize)]
struct InferOutput<'a> {
    config: &'a str,
    shape: handover_core::ShapeContext,
    mobility: MobilityLevel,
    method: handover_core::effort::MethodId,
    robot_grasp: &'a str,
    /// Relative to the receiver's hand.
    object_pose: handover_core::geometry::Pose,
}

fn cmd_infer(model: &Path, q: Query) -> Result<()> {
    let model = load_model(model)?;
    let p = Predictor::new(&model)?.predict(&q)?;
    let out = InferOutput {
        config: &p.config,
        shape: p.key.shape,
        mobility: p.key.mobility,
        method: p.key.method,
        robot_grasp: &p.robot_grasp,
        object_pose: p.object_pose,
    };
    println!("{}", serde_json::to_string(&out)?);
    Ok(())
}

#[derive(Serialize)]
struct AccuracyCsvRow<'a> {
    shape: &'a str,
    objects: usize,
    instances: usize,
    pose_acc: f64,
    grasp_acc: f64,
    average: f64,
}

fn cmd_eval(model: &Path, corpus: &Path, stamp: &Stamp, out: &Path) -> Result<()> {
    let model = load_model(model)?;
    let (_, corpus) = files::read_corpus(corpus)?;
    let (_, test) = split(&corpus, &model.split)?;
    if test.is_empty() {
        bail!("the model's test split selects no corpus instance");
    }
    let report = parallel::evaluate_par(&Predictor::new(&model)?, &test);
    let rows: Vec<AccuracyCsvRow> = report
        .rows
        .iter()
        .chain([&report.overall])
        .map(|r| AccuracyCsvRow {
            shape: &r.label,
            objects: r.objects,
            instances: r.instances,
            pose_acc: r.pose_accuracy,
            grasp_acc: r.grasp_accuracy,
            average: r.average,
        })
        .collect();
    let text = files::csv_string(stamp, &rows)?;
    files::write_text(out, &text)?;
    print!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct RankSumRow {
    measure: &'static str,
    mobility: String,
    a: handover_core::effort::MethodId,
    b: handover_core::effort::MethodId,
    n_a: usize,
    n_b: usize,
    statistic: f64,
    p_value: f64,
    method: &'static str,
}

fn cmd_ranksum(
    ratings: &Path,
    measure: Measure,
    a: handover_core::effort::MethodId,
    b: handover_core::effort::MethodId,
    mobility: Option<MobilityLevel>,
    stamp: &Stamp,
    out: &Path,
) -> Result<()> {
    let (_, rows) = files::read_csv::<RatingRow>(ratings)?;
    let pick = |m| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.method == m && mobility.is_none_or(|l| r.mobility == l))
            .map(|r| measure.of(r))
            .collect()
    };
    let (xa, xb) = (pick(a), pick(b));
    let r = rank_sum(&xa, &xb)?;
    let row = RankSumRow {
        measure: measure.as_str(),
        mobility: mobility.map_or("all".to_string(), |l| l.as_str().to_string()),
        a,
        b,
        n_a: xa.len(),
        n_b: xb.len(),
        statistic: r.statistic,
        p_value: r.p_value,
        method: match r.method {
            handover_core::stats::RankSumMethod::Exact => "exact",
            handover_core::stats::RankSumMethod::NormalApprox => "normal_approx",
        },
    };
    let text = files::csv_string(stamp, &[row])?;
    files::write_text(out, &text)?;
    print!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct AnovaCsvRow {
    measure: &'static str,
    effect: &'static str,
    ss: f64,
    f: f64,
    df1: f64,
    df2: f64,
    p_value: f64,
}

fn cmd_anova(ratings: &Path, measure: Measure, stamp: &Stamp, out: &Path) -> Result<()> {
    let (_, rows) = files::read_csv::<RatingRow>(ratings)?;
    let res = mixed_anova(&files::anova_records(&rows, measure))?;
    let out_rows: Vec<AnovaCsvRow> = res
        .rows
        .iter()
        .map(|r| AnovaCsvRow {
            measure: measure.as_str(),
            effect: r.effect.as_str(),
            ss: r.ss,
            f: r.f,
            df1: r.df1 as f64,
            df2: r.df2 as f64,
            p_value: r.p_value,
        })
        .collect();
    let text = files::csv_string(stamp, &out_rows)?;
    files::write_text(out, &text)?;
    print!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct GraspReportRow {
    shape: handover_core::ShapeContext,
    objects: usize,
    manipulation_cm: f64,
    handover_cm: f64,
    statistic: f64,
    p_value: f64,
}

fn cmd_grasp_report(manifest: Option<&Path>, stamp: &Stamp, out: &Path, distances: Option<&Path>) -> Result<()> {
    let objects = match manifest {
        Some(p) => files::read_manifest(p)?.data.objects(),
        None => library_manifest().objects(),
    };
    let rows: Vec<GraspReportRow> = grasp_distance_report(&objects)?
        .into_iter()
        .map(|r| GraspReportRow {
            shape: r.shape,
            objects: r.objects,
            manipulation_cm: r.manipulation_cm,
            handover_cm: r.handover_cm,
            statistic: r.test.statistic,
            p_value: r.test.p_value,
        })
        .collect();
    if let Some(d) = distances {
        files::write_csv(d, stamp, &grasp_distances(&objects)?)?;
    }
    let text = files::csv_string(stamp, &rows)?;
    files::write_text(out, &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_run(
    scene: &Path,
    model: &Path,
    mobility: Option<MobilityLevel>,
    task: Option<String>,
    plan: &PlanArgs,
    stamp: &Stamp,
    out: &Path,
) -> Result<()> {
    let scene = load_scene(scene)?;
    let model = load_model(model)?;
    let predictor = Predictor::new(&model)?;
    let mobility = mobility.unwrap_or(scene.human.mobility);
    let task = task.unwrap_or_else(|| scene.human.task.clone());
    let result = run_end_to_end(&scene, mobility, &task, &predictor, &plan.reach()?)?;
    files::write_json(out, stamp, &result)?;
    let p = result.otc.object_pose.position;
    println!(
        "accepted {} with grasp {} at ({:.3}, {:.3}, {:.3}); {} gate checks passed",
        result.otc.config,
        result.otc.robot_grasp,
        p.x,
        p.y,
        p.z,
        result.trace.len()
    );
    Ok(())
}

/// Parses and runs one command line, returning the error instead of an exit code.
pub fn run_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).context("parsing arguments")?;
    run(cli)
}
