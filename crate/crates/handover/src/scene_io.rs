//! Scene documents: schema check, then typed parse, then invariant check.

use std::path::Path;
use std::sync::OnceLock;

use handover_core::scene::ValidationError;
use handover_core::Scene;
use serde_json::Value;
use thiserror::Error;

pub const SCENE_SCHEMA: &str = include_str!("../schemas/scene.schema.json");

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scene document: {0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCENE_SCHEMA).expect("bundled schema is JSON");
        jsonschema::validator_for(&schema).expect("bundled schema compiles")
    })
}

/// `/object/grasps/0/pose` becomes `object.grasps[0].pose`.
fn dotted(pointer: &str) -> String {
    let mut out = String::new();
    for part in pointer.split('/').filter(|p| !p.is_empty()) {
        if part.bytes().all(|b| b.is_ascii_digit()) {
            out.push_str(&format!("[{part}]"));
        } else {
            if !out.is_empty() {
                out.push('.');
            }
            out.push_str(part);
        }
    }
    if out.is_empty() {
        out.push_str("(root)");
    }
    out
}

pub fn parse_scene(text: &str) -> Result<Scene, SceneError> {
    let value: Value = serde_json::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))?;
    if let Some(err) = validator().iter_errors(&value).next() {
        return Err(SceneError::Schema {
            path: dotted(&err.instance_path.to_string()),
            message: err.to_string(),
        });
    }
    let scene: Scene = serde_json::from_value(value).map_err(|e| SceneError::Parse(e.to_string()))?;
    scene.validate()?;
    Ok(scene)
}

pub fn load_scene(path: &Path) -> Result<Scene, SceneError> {
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scene(&text)
}
