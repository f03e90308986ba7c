//! On-disk formats. Every file carries `schema_version` and the run seed:
//! JSON documents as envelope fields, CSV files as a leading `#` line.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use handover_core::dataset::{HandoverInstance, PreferenceRecord};
use handover_core::effort::MethodId;
use handover_core::geometry::{Pose, Quat, Vec3};
use handover_core::mln::{Grounding, World};
use handover_core::stats::AnovaRecord;
use handover_core::ObjectModel;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Seed and timestamp policy shared by every writer in one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stamp {
    pub seed: u64,
    pub timestamp: bool,
}

impl Stamp {
    pub fn new(seed: u64, timestamp: bool) -> Self {
        Self { seed, timestamp }
    }

    fn generated_at(&self) -> Option<u64> {
        self.timestamp.then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
    }

    pub fn csv_line(&self) -> String {
        let mut s = format!("# schema_version={SCHEMA_VERSION} seed={}", self.seed);
        if let Some(t) = self.generated_at() {
            s.push_str(&format!(" generated_at={t}"));
        }
        s
    }

    pub fn wrap<T>(&self, data: T) -> Envelope<T> {
        Envelope {
            schema_version: SCHEMA_VERSION,
            seed: self.seed,
            generated_at: self.generated_at(),
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<u64>,
    pub data: T,
}

/// Metadata from a CSV `#` line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvHeader {
    pub schema_version: u32,
    pub seed: u64,
}

fn parse_csv_line(line: &str) -> Result<CsvHeader> {
    let Some(rest) = line.strip_prefix('#') else {
        bail!("missing `# schema_version=... seed=...` line");
    };
    let mut version = None;
    let mut seed = None;
    for kv in rest.split_whitespace() {
        match kv.split_once('=') {
            Some(("schema_version", v)) => version = Some(v.parse()?),
            Some(("seed", v)) => seed = Some(v.parse()?),
            _ => {}
        }
    }
    let (Some(schema_version), Some(seed)) = (version, seed) else {
        bail!("metadata line lacks schema_version or seed: `{line}`");
    };
    if schema_version != SCHEMA_VERSION {
        bail!("unsupported schema_version {schema_version}, expected {SCHEMA_VERSION}");
    }
    Ok(CsvHeader { schema_version, seed })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn csv_string<T: Serialize>(stamp: &Stamp, rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    writeln!(buf, "{}", stamp.csv_line())?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(String::from_utf8(buf)?)
}

pub fn write_csv<T: Serialize>(path: &Path, stamp: &Stamp, rows: &[T]) -> Result<()> {
    write_text(path, &csv_string(stamp, rows)?)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<(CsvHeader, Vec<T>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (first, body) = text.split_once('\n').unwrap_or((&text, ""));
    let header = parse_csv_line(first.trim_end()).with_context(|| format!("in {}", path.display()))?;
    let rows = csv::Reader::from_reader(body.as_bytes())
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.with_context(|| format!("{}: data row {}", path.display(), i + 1)))
        .collect::<Result<Vec<T>>>()?;
    Ok((header, rows))
}

pub fn write_json<T: Serialize>(path: &Path, stamp: &Stamp, data: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(&stamp.wrap(data))?;
    s.push('\n');
    write_text(path, &s)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Envelope<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let env: Envelope<T> = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if env.schema_version != SCHEMA_VERSION {
        bail!(
            "{}: unsupported schema_version {}, expected {SCHEMA_VERSION}",
            path.display(),
            env.schema_version
        );
    }
    Ok(env)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRow {
    pub object_id: String,
    pub shape: handover_core::ShapeContext,
    pub mobility: handover_core::MobilityLevel,
    pub task: String,
    pub method: MethodId,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub grasp_id: String,
}

impl From<&HandoverInstance> for CorpusRow {
    fn from(i: &HandoverInstance) -> Self {
        let p = i.target_object_pose.position;
        let q = i.target_object_pose.orientation;
        Self {
            object_id: i.object_id.clone(),
            shape: i.shape,
            mobility: i.mobility,
            task: i.task.clone(),
            method: i.method,
            px: p.x,
            py: p.y,
            pz: p.z,
            qw: q.w,
            qx: q.x,
            qy: q.y,
            qz: q.z,
            grasp_id: i.target_robot_grasp.clone(),
        }
    }
}

impl From<CorpusRow> for HandoverInstance {
    fn from(r: CorpusRow) -> Self {
        Self {
            object_id: r.object_id,
            shape: r.shape,
            mobility: r.mobility,
            task: r.task,
            method: r.method,
            target_object_pose: Pose::new(Vec3::new(r.px, r.py, r.pz), Quat::new(r.qw, r.qx, r.qy, r.qz)),
            target_robot_grasp: r.grasp_id,
        }
    }
}

pub fn write_corpus(path: &Path, stamp: &Stamp, corpus: &[HandoverInstance]) -> Result<()> {
    let rows: Vec<CorpusRow> = corpus.iter().map(CorpusRow::from).collect();
    write_csv(path, stamp, &rows)
}

pub fn read_corpus(path: &Path) -> Result<(CsvHeader, Vec<HandoverInstance>)> {
    let (h, rows) = read_csv::<CorpusRow>(path)?;
    let corpus: Vec<HandoverInstance> = rows.into_iter().map(HandoverInstance::from).collect();
    for (k, i) in corpus.iter().enumerate() {
        i.target_object_pose
            .validate()
            .with_context(|| format!("{}: data row {} pose", path.display(), k + 1))?;
    }
    Ok((h, corpus))
}

/// One row per (record, method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRow {
    pub participant_id: String,
    pub mobility: handover_core::MobilityLevel,
    pub object_id: String,
    pub method: MethodId,
    pub safety: u8,
    pub comfort: u8,
    pub appropriateness: u8,
    pub preferred_method: MethodId,
}

pub fn rating_rows(records: &[PreferenceRecord]) -> Vec<RatingRow> {
    records
        .iter()
        .flat_map(|r| {
            r.ratings.iter().map(move |m| RatingRow {
                participant_id: r.participant_id.clone(),
                mobility: r.mobility,
                object_id: r.object_id.clone(),
                method: m.method,
                safety: m.safety,
                comfort: m.comfort,
                appropriateness: m.appropriateness,
                preferred_method: r.preferred_method,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Measure {
    Safety,
    Comfort,
    Appropriateness,
}

impl Measure {
    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Safety => "safety",
            Measure::Comfort => "comfort",
            Measure::Appropriateness => "appropriateness",
        }
    }

    pub fn of(self, r: &RatingRow) -> f64 {
        f64::from(match self {
            Measure::Safety => r.safety,
            Measure::Comfort => r.comfort,
            Measure::Appropriateness => r.appropriateness,
        })
    }
}

/// Participant as subject, mobility as the between factor, method within.
pub fn anova_records(rows: &[RatingRow], measure: Measure) -> Vec<AnovaRecord> {
    rows.iter()
        .map(|r| AnovaRecord {
            subject: r.participant_id.clone(),
            group: r.mobility.as_str().to_string(),
            condition: r.method.as_str().to_string(),
            rating: measure.of(r),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(flatten)]
    pub object: ObjectModel,
    pub study: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub objects: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn objects(&self) -> Vec<ObjectModel> {
        self.objects.iter().map(|e| e.object.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (i, e) in self.objects.iter().enumerate() {
            e.object
                .validate()
                .with_context(|| format!("objects[{i}] (`{}`)", e.object.id))?;
            if !seen.insert(e.object.id.as_str()) {
                bail!("objects[{i}]: duplicate object id `{}`", e.object.id);
            }
        }
        Ok(())
    }
}

pub fn read_manifest(path: &Path) -> Result<Envelope<Manifest>> {
    let m = read_json::<Manifest>(path)?;
    m.data.validate().with_context(|| format!("in {}", path.display()))?;
    Ok(m)
}

/// One world per line: its true ground atoms, tab-separated. An empty line
/// is the all-false world; lines starting with `#` are metadata.
pub fn worlds_text(g: &Grounding, worlds: &[World]) -> String {
    let mut s = String::new();
    for w in worlds {
        s.push_str(&g.true_atoms(w).join("\t"));
        s.push('\n');
    }
    s
}

pub fn parse_worlds(g: &Grounding, text: &str) -> Result<Vec<World>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#'))
        .map(|(n, line)| {
            let atoms: Vec<&str> = line.split('\t').map(str::trim).filter(|a| !a.is_empty()).collect();
            g.world_from_true_atoms(atoms.iter().copied()).with_context(|| format!("dataset line {}", n + 1))
        })
        .collect()
}
