//! On-disk formats.
//!
//! Datasets are directories of line-delimited JSON files, one detector or
//! scene per file. The first line of every file is a [`Header`]; each later
//! line is one world (detector files) or one frame (scene files). Category
//! labels are stored by name and resolved against the header's table.
//!
//! Tables are CSV files whose first line is a `#` comment carrying the
//! format version, seed and config hash.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::FORMAT_VERSION;
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, CameraPose, Vec3};
use crate::lightweight::{LwDetectorData, LwFrame, LwTheta, LwWorldRecord, LwWorldState};
use crate::model::{CategoryTable, Detection2D, FrameObservation, GroundTruthBox, Object3D, SceneData, Theta, WorldState};

pub const LW_FORMAT: &str = "metacog-lw-detector";
pub const SCENE_FORMAT: &str = "metacog-scene";
pub const WORLDS_FORMAT: &str = "metacog-worlds";

/// First line of every JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub categories: CategoryTable,
    /// Detector id (detector files).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<u64>,
    /// True presence-detector rates (detector files, when known).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lw_theta: Option<LwTheta>,
    /// Scene index (scene files).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsics: Option<CameraIntrinsics>,
    /// Rates of the detector that produced the detections, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Theta>,
    /// Ground-truth objects of the scene, for evaluation only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<ObjectRecord>>,
    /// Name of the video a scene was ingested from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl Header {
    pub fn new(format: &str, seed: u64, config_hash: &str, categories: &CategoryTable) -> Self {
        Header {
            format: format.to_string(),
            version: FORMAT_VERSION,
            seed,
            config_hash: config_hash.to_string(),
            categories: categories.clone(),
            detector: None,
            lw_theta: None,
            scene: None,
            intrinsics: None,
            theta: None,
            ground_truth: None,
            source: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LwWorldLine {
    pub world: usize,
    /// Presence bits in category order, e.g. `"10100"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<String>,
    pub frames: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectRecord {
    pub label: String,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub x: f64,
    pub y: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRecord {
    pub label: String,
    pub center: [f64; 2],
    pub half_width: f64,
    pub half_height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameLine {
    pub frame: usize,
    pub camera: CameraPose,
    pub detections: Vec<DetectionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_boxes: Option<Vec<BoxRecord>>,
}

/// One inferred world in a results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldLine {
    pub scene: u64,
    pub model: String,
    pub order: usize,
    pub objects: Vec<ObjectRecord>,
}

fn schema(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Write a header and records as JSONL.
pub fn write_jsonl<T: Serialize>(path: &Path, header: &Header, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |v: String| writeln!(w, "{v}").map_err(|e| Error::io(path, e));
    put(serde_json::to_string(header)?)?;
    for r in records {
        put(serde_json::to_string(r)?)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a JSONL file written by [`write_jsonl`]. Blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path, format: &str) -> Result<(Header, Vec<(usize, T)>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = None;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            let h: Header = serde_json::from_str(&line).map_err(|e| schema(path, n, format!("header: {e}")))?;
            if h.format != format {
                return Err(schema(path, n, format!("expected format {format:?}, found {:?}", h.format)));
            }
            if h.version != FORMAT_VERSION {
                return Err(schema(path, n, format!("unsupported format version {}", h.version)));
            }
            header = Some(h);
        } else {
            records.push((n, serde_json::from_str(&line).map_err(|e| schema(path, n, e.to_string()))?));
        }
    }
    let header = header.ok_or_else(|| schema(path, 1, "missing header line"))?;
    Ok((header, records))
}

/// Files in `dir` with extension `jsonl`, sorted by name.
pub fn list_jsonl(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|e| e == "jsonl") {
            out.push(p);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::data(format!("{}: no .jsonl files", dir.display())));
    }
    Ok(out)
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn parse_bits(s: &str, n: usize, path: &Path, line: usize) -> Result<Vec<bool>> {
    if s.len() != n {
        return Err(schema(path, line, format!("bit string {s:?} should have {n} characters")));
    }
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(schema(path, line, format!("bit string {s:?} contains {c:?}"))),
        })
        .collect()
}

fn label_index(t: &CategoryTable, label: &str, path: &Path, line: usize) -> Result<usize> {
    t.index_of(label)
        .ok_or_else(|| schema(path, line, format!("unknown category label {label:?}")))
}

fn label(t: &CategoryTable, c: usize) -> String {
    t.name(c).expect("category index within table").to_string()
}

pub fn objects_to_records(world: &WorldState, t: &CategoryTable) -> Vec<ObjectRecord> {
    world
        .objects
        .iter()
        .map(|o| ObjectRecord {
            label: label(t, o.category),
            position: [o.position.x, o.position.y, o.position.z],
        })
        .collect()
}

pub fn records_to_world(records: &[ObjectRecord], t: &CategoryTable, path: &Path, line: usize) -> Result<WorldState> {
    let objects = records
        .iter()
        .map(|r| {
            let c = label_index(t, &r.label, path, line)?;
            let p = Vec3::new(r.position[0], r.position[1], r.position[2]);
            if !p.iter().all(|v| v.is_finite()) {
                return Err(schema(path, line, "object position is not finite"));
            }
            Ok(Object3D::new(p, c))
        })
        .collect::<Result<_>>()?;
    Ok(WorldState::new(objects))
}

/// Write one presence-detector dataset file.
pub fn write_lw_detector(path: &Path, mut header: Header, data: &LwDetectorData) -> Result<()> {
    header.format = LW_FORMAT.to_string();
    header.detector = Some(data.id);
    header.lw_theta = data.theta.clone();
    let lines: Vec<LwWorldLine> = data
        .worlds
        .iter()
        .enumerate()
        .map(|(i, w)| LwWorldLine {
            world: i,
            truth: w.truth.as_ref().map(|t| bits_to_string(&t.presence)),
            frames: w.frames.iter().map(|f| bits_to_string(&f.detected)).collect(),
        })
        .collect();
    write_jsonl(path, &header, &lines)
}

pub fn read_lw_detector(path: &Path) -> Result<(Header, LwDetectorData)> {
    let (header, lines) = read_jsonl::<LwWorldLine>(path, LW_FORMAT)?;
    let n = header.categories.len();
    let id = header.detector.ok_or_else(|| schema(path, 1, "header lacks detector id"))?;
    if let Some(t) = &header.lw_theta {
        if t.num_categories() != n {
            return Err(schema(path, 1, "detector rates do not match the category table"));
        }
        t.validate().map_err(|e| schema(path, 1, e.to_string()))?;
    }
    if lines.is_empty() {
        return Err(schema(path, 1, "detector file has no worlds"));
    }
    let mut worlds = Vec::with_capacity(lines.len());
    for (k, (line, w)) in lines.iter().enumerate() {
        if w.world != k {
            return Err(schema(path, *line, format!("expected world {k}, found {}", w.world)));
        }
        if w.frames.is_empty() {
            return Err(schema(path, *line, "world has no frames"));
        }
        let truth = match &w.truth {
            Some(s) => Some(LwWorldState { presence: parse_bits(s, n, path, *line)? }),
            None => None,
        };
        let frames = w
            .frames
            .iter()
            .map(|s| Ok(LwFrame { detected: parse_bits(s, n, path, *line)? }))
            .collect::<Result<_>>()?;
        worlds.push(LwWorldRecord { truth, frames });
    }
    let theta = header.lw_theta.clone();
    Ok((header, LwDetectorData { id, theta, worlds }))
}

/// Write one scene file.
pub fn write_scene(path: &Path, mut header: Header, scene_index: u64, scene: &SceneData) -> Result<()> {
    let t = header.categories.clone();
    header.format = SCENE_FORMAT.to_string();
    header.scene = Some(scene_index);
    header.ground_truth = scene.ground_truth.as_ref().map(|w| objects_to_records(w, &t));
    let lines: Vec<FrameLine> = scene
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| FrameLine {
            frame: i,
            camera: f.camera,
            detections: f
                .detections
                .iter()
                .map(|d| DetectionRecord { x: d.x, y: d.y, label: label(&t, d.category) })
                .collect(),
            truth_boxes: scene.truth_boxes.as_ref().map(|b| {
                b[i].iter()
                    .map(|b| BoxRecord {
                        label: label(&t, b.category),
                        center: [b.center.0, b.center.1],
                        half_width: b.half_width,
                        half_height: b.half_height,
                    })
                    .collect()
            }),
        })
        .collect();
    write_jsonl(path, &header, &lines)
}

pub fn read_scene(path: &Path) -> Result<(Header, SceneData)> {
    let (header, lines) = read_jsonl::<FrameLine>(path, SCENE_FORMAT)?;
    let t = &header.categories;
    if header.scene.is_none() {
        return Err(schema(path, 1, "header lacks scene index"));
    }
    if header.intrinsics.is_none() {
        return Err(schema(path, 1, "header lacks camera intrinsics"));
    }
    let ground_truth = match &header.ground_truth {
        Some(r) => Some(records_to_world(r, t, path, 1)?),
        None => None,
    };
    let mut frames = Vec::with_capacity(lines.len());
    let mut boxes: Vec<Vec<GroundTruthBox>> = Vec::new();
    let with_boxes = lines.first().is_some_and(|(_, f)| f.truth_boxes.is_some());
    for (k, (line, f)) in lines.iter().enumerate() {
        if f.frame != k {
            return Err(schema(path, *line, format!("expected frame {k}, found {}", f.frame)));
        }
        f.camera.validate().map_err(|e| schema(path, *line, e.to_string()))?;
        let detections = f
            .detections
            .iter()
            .map(|d| {
                if !(d.x.is_finite() && d.y.is_finite()) {
                    return Err(schema(path, *line, "detection coordinates are not finite"));
                }
                Ok(Detection2D::new(d.x, d.y, label_index(t, &d.label, path, *line)?))
            })
            .collect::<Result<_>>()?;
        frames.push(FrameObservation { camera: f.camera, detections });
        match (&f.truth_boxes, with_boxes) {
            (Some(b), true) => boxes.push(
                b.iter()
                    .map(|b| {
                        Ok(GroundTruthBox {
                            center: (b.center[0], b.center[1]),
                            half_width: b.half_width,
                            half_height: b.half_height,
                            category: label_index(t, &b.label, path, *line)?,
                        })
                    })
                    .collect::<Result<_>>()?,
            ),
            (None, false) => {}
            _ => return Err(schema(path, *line, "truth boxes must be given for every frame or none")),
        }
    }
    if frames.is_empty() {
        return Err(schema(path, 1, "scene file has no frames"));
    }
    let scene = SceneData {
        frames,
        ground_truth,
        truth_boxes: with_boxes.then_some(boxes),
    };
    Ok((header, scene))
}

/// Read every scene file in `dir`, returning each scene with the index from
/// its header. All files must share one category table and one set of
/// intrinsics, and indices must be unique.
pub fn read_scene_dir(dir: &Path) -> Result<(Header, Vec<(u64, SceneData)>)> {
    let mut first: Option<Header> = None;
    let mut scenes: Vec<(u64, SceneData)> = Vec::new();
    for p in list_jsonl(dir)? {
        let (h, s) = read_scene(&p)?;
        let id = h.scene.expect("checked by read_scene");
        if scenes.iter().any(|(i, _)| *i == id) {
            return Err(schema(&p, 1, format!("scene index {id} appears twice")));
        }
        if let Some(f) = &first {
            if f.categories != h.categories || f.intrinsics != h.intrinsics {
                return Err(schema(&p, 1, "category table or intrinsics differ from the first scene file"));
            }
        } else {
            first = Some(h);
        }
        scenes.push((id, s));
    }
    Ok((first.expect("at least one file"), scenes))
}

/// Read every detector file in `dir`.
pub fn read_lw_dir(dir: &Path) -> Result<(Header, Vec<LwDetectorData>)> {
    let mut first: Option<Header> = None;
    let mut out = Vec::new();
    for p in list_jsonl(dir)? {
        let (h, d) = read_lw_detector(&p)?;
        if let Some(f) = &first {
            if f.categories != h.categories {
                return Err(schema(&p, 1, "category table differs from the first detector file"));
            }
        } else {
            first = Some(h);
        }
        out.push(d);
    }
    Ok((first.expect("at least one file"), out))
}

pub fn scene_file_name(i: u64) -> String {
    format!("scene_{i:05}.jsonl")
}

pub fn detector_file_name(i: u64) -> String {
    format!("detector_{i:05}.jsonl")
}

/// A CSV writer whose first line is the provenance comment.
pub fn csv_writer(path: &Path, seed: u64, config_hash: &str) -> Result<csv::Writer<File>> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(file, "# metacog format={FORMAT_VERSION} seed={seed} config_hash={config_hash}")
        .map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// Read CSV records, skipping `#` comment lines. Errors carry the line.
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => schema(path, 0, e.to_string()),
        })?;
    let headers = rdr.headers().map_err(|e| schema(path, 1, e.to_string()))?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| schema(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let value = rec.deserialize(Some(&headers)).map_err(|e| schema(path, line, e.to_string()))?;
        out.push((line, value));
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
