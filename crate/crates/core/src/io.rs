//! File formats: the JSON Lines corpus, JSON model/scene/config files and
//! CSV traces.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::CdEpoch;
use crate::model::{LearnedModel, MODEL_VERSION};
use crate::sampler::TraceRecord;
use crate::scene::{SceneLayout, SCENE_VERSION};

pub const CORPUS_VERSION: u32 = 1;

/// One object of a corpus scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusInstance {
    pub category: String,
    pub size: [f64; 3],
    pub position: [f64; 3],
    pub yaw: f64,
    /// Index of the supporting instance within the same scene.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supported_by: Option<usize>,
    /// Annotated human positions in room coordinates.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub humans: Vec<[f64; 2]>,
}

/// One line of a corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusScene {
    pub version: u32,
    pub id: String,
    pub scene_type: String,
    /// (w, l, h) in meters.
    pub room: [f64; 3],
    pub instances: Vec<CorpusInstance>,
}

impl CorpusScene {
    /// Schema checks that do not need the grammar.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.version != CORPUS_VERSION {
            return Err(format!("unsupported corpus version {}", self.version));
        }
        if self.room.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err("room size must be positive and finite".into());
        }
        for (i, inst) in self.instances.iter().enumerate() {
            let finite = inst.size.iter().chain(&inst.position).all(|v| v.is_finite())
                && inst.yaw.is_finite()
                && inst.humans.iter().flatten().all(|v| v.is_finite());
            if !finite {
                return Err(format!("instance {i} ({}) has a non-finite value", inst.category));
            }
            if inst.size.iter().any(|&s| s <= 0.0) {
                return Err(format!("instance {i} ({}) has a non-positive size", inst.category));
            }
            if let Some(s) = inst.supported_by {
                if s >= self.instances.len() || s == i {
                    return Err(format!(
                        "instance {i} ({}) has dangling supported_by index {s}",
                        inst.category
                    ));
                }
            }
        }
        Ok(())
    }
}

fn corpus_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

/// Reads a corpus file, or every `*.jsonl` file of a directory in name
/// order. Blank lines are skipped.
pub fn load_corpus(path: &Path) -> Result<Vec<CorpusScene>> {
    let mut scenes = Vec::new();
    for file in corpus_files(path)? {
        let f = fs::File::open(&file).map_err(|e| Error::io(&file, e))?;
        for (n, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&file, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let locus = format!("{}:{}", file.display(), n + 1);
            let scene: CorpusScene =
                serde_json::from_str(&line).map_err(|e| Error::format(&locus, e.to_string()))?;
            scene
                .check()
                .map_err(|m| Error::format(format!("{locus} (scene {})", scene.id), m))?;
            scenes.push(scene);
        }
    }
    if scenes.is_empty() {
        return Err(Error::format(path.display().to_string(), "corpus contains no scenes"));
    }
    Ok(scenes)
}

pub fn save_corpus(path: &Path, scenes: &[CorpusScene]) -> Result<()> {
    let mut out = Vec::new();
    for s in scenes {
        serde_json::to_writer(&mut out, s).map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Canonical JSON text: pretty-printed with a trailing newline. Map keys are
/// sorted because every map in the data model is ordered.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::format("<memory>", e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = to_canonical_json(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

pub fn save_model(path: &Path, model: &LearnedModel) -> Result<()> {
    write_json(path, model)
}

pub fn load_model(path: &Path) -> Result<LearnedModel> {
    let model: LearnedModel = read_json(path)?;
    if model.version != MODEL_VERSION {
        return Err(Error::format(
            path.display().to_string(),
            format!("unsupported model version {}", model.version),
        ));
    }
    Ok(model)
}

pub fn export_scene(path: &Path, scene: &SceneLayout) -> Result<()> {
    write_json(path, scene)
}

pub fn load_scene(path: &Path) -> Result<SceneLayout> {
    let scene: SceneLayout = read_json(path)?;
    if scene.version != SCENE_VERSION {
        return Err(Error::format(
            path.display().to_string(),
            format!("unsupported scene version {}", scene.version),
        ));
    }
    Ok(scene)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::format(path.display().to_string(), e.to_string())
}

/// One row per iteration: iteration, move, accepted, temperature, energy,
/// best_energy.
pub fn write_trace(path: &Path, records: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per epoch: epoch, step size, then the eight data-loss means, the
/// eight sample-loss means and the eight weights.
pub fn write_cd_trace(path: &Path, trace: &[CdEpoch]) -> Result<()> {
    use crate::energy::SLOT_NAMES;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["epoch".to_string(), "eta".to_string()];
    for prefix in ["data", "sample", "lambda"] {
        header.extend(SLOT_NAMES.iter().map(|s| format!("{prefix}_{s}")));
    }
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for e in trace {
        let mut row = vec![e.epoch.to_string(), e.eta.to_string()];
        for v in e.data_loss.0.iter().chain(&e.sample_loss.0).chain(&e.weights.to_vector()) {
            row.push(v.to_string());
        }
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes bytes, creating parent directories.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
