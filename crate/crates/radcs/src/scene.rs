//! Scene directories: a `scene.toml` manifest, numbered frames and an
//! optional JSON-lines annotation file.
//!
//! ```toml
//! scene_name = "city_0"
//! weather = "city"
//! annotations = "annotations.jsonl"
//! frames = ["frame_0001.radf", "frame_0002.radf"]
//!
//! [geometry]
//! max_range_m = 100.0
//! ```
//!
//! Each annotation line is one box:
//! `{"frame_id":1,"center_x_m":3.0,"center_y_m":40.0,"width_m":1.9,"height_m":4.5}`.
//! Frames are numbered from 1 in manifest order and spaced 0.25 s apart.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use radcs_core::detector::GroundTruthBox;
use radcs_core::geometry::{FrameGeometry, PolarFrame, FRAME_PERIOD_S};
use radcs_core::synthetic::SyntheticScene;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{read_frame, write_radf};

pub const MANIFEST_FILE: &str = "scene.toml";
pub const ANNOTATION_FILE: &str = "annotations.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryOverride {
    pub max_range_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub scene_name: String,
    /// Free text, e.g. city, fog, snow, night, motorway.
    #[serde(default)]
    pub weather: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<PathBuf>,
    pub frames: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryOverride>,
}

impl SceneManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn geometry(&self) -> Result<FrameGeometry> {
        match &self.geometry {
            None => Ok(FrameGeometry::default()),
            Some(g) => Ok(FrameGeometry::with_max_range(g.max_range_m)?),
        }
    }
}

/// Annotation line as stored on disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub frame_id: u64,
    pub center_x_m: f64,
    pub center_y_m: f64,
    pub width_m: f64,
    pub height_m: f64,
}

impl From<GroundTruthBox> for AnnotationRecord {
    fn from(b: GroundTruthBox) -> Self {
        Self {
            frame_id: b.frame_id,
            center_x_m: b.center_x_m,
            center_y_m: b.center_y_m,
            width_m: b.width_m,
            height_m: b.height_m,
        }
    }
}

impl From<AnnotationRecord> for GroundTruthBox {
    fn from(r: AnnotationRecord) -> Self {
        Self {
            frame_id: r.frame_id,
            center_x_m: r.center_x_m,
            center_y_m: r.center_y_m,
            width_m: r.width_m,
            height_m: r.height_m,
        }
    }
}

pub fn read_annotations(path: &Path, geom: &FrameGeometry) -> Result<Vec<GroundTruthBox>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: AnnotationRecord =
            serde_json::from_str(line).map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
        let b = GroundTruthBox::from(rec);
        b.validate(geom)
            .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
        out.push(b);
    }
    Ok(out)
}

pub fn annotations_jsonl(boxes: &[GroundTruthBox]) -> Vec<u8> {
    let mut out = Vec::new();
    for &b in boxes {
        serde_json::to_writer(&mut out, &AnnotationRecord::from(b)).expect("serialize to memory");
        out.push(b'\n');
    }
    out
}

/// A loaded scene directory.
#[derive(Debug, Clone)]
pub struct Scene {
    /// Canonical path of the scene directory.
    pub dir: PathBuf,
    pub manifest: SceneManifest,
    pub geometry: FrameGeometry,
    pub frames: Vec<PolarFrame>,
    /// `None` when the manifest names no annotation file.
    pub annotations: Option<Vec<GroundTruthBox>>,
}

impl Scene {
    pub fn load(dir: &Path) -> Result<Self> {
        let dir = dir.canonicalize().map_err(Error::io(dir))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest = SceneManifest::read(&manifest_path)?;
        if manifest.frames.is_empty() {
            return Err(Error::format(&manifest_path, "scene lists no frames"));
        }
        let geometry = manifest.geometry()?;
        let frames = manifest
            .frames
            .iter()
            .enumerate()
            .map(|(k, f)| read_frame(&dir.join(f), k as u64 + 1, k as f64 * FRAME_PERIOD_S))
            .collect::<Result<Vec<_>>>()?;
        let annotations = match &manifest.annotations {
            Some(p) => Some(read_annotations(&dir.join(p), &geometry)?),
            None => None,
        };
        Ok(Self {
            dir,
            manifest,
            geometry,
            frames,
            annotations,
        })
    }

    pub fn annotation_boxes(&self) -> &[GroundTruthBox] {
        self.annotations.as_deref().unwrap_or(&[])
    }
}

pub fn frame_file_name(frame_id: u64) -> String {
    format!("frame_{frame_id:04}.radf")
}

/// Write a generated scene as a scene directory.
pub fn write_scene(dir: &Path, name: &str, weather: &str, scene: &SyntheticScene) -> Result<SceneManifest> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let mut frames = Vec::with_capacity(scene.frames.len());
    for f in &scene.frames {
        let file = frame_file_name(f.frame_id);
        write_radf(&dir.join(&file), f.data())?;
        frames.push(PathBuf::from(file));
    }
    let ann_path = dir.join(ANNOTATION_FILE);
    fs::write(&ann_path, annotations_jsonl(&scene.annotations)).map_err(Error::io(&ann_path))?;
    let manifest = SceneManifest {
        scene_name: name.to_string(),
        weather: weather.to_string(),
        annotations: Some(PathBuf::from(ANNOTATION_FILE)),
        frames,
        geometry: None,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    let mut f = fs::File::create(&path).map_err(Error::io(&path))?;
    f.write_all(text.as_bytes()).map_err(Error::io(&path))?;
    Ok(manifest)
}
