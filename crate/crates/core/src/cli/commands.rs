//! The command implementations behind the `metacog` binary. Each command
//! reads its inputs, runs one experiment stage and writes its outputs plus a
//! `manifest.json` into the output directory.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, FORMAT_VERSION};
use super::formats::{
    create_dir, csv_writer, detector_file_name, objects_to_records, read_csv, read_jsonl, read_lw_dir, read_scene_dir,
    records_to_world, scene_file_name, write_json, write_jsonl, write_lw_detector, write_scene, Header, WorldLine,
    LW_FORMAT, SCENE_FORMAT, WORLDS_FORMAT,
};
use super::full::{run_full_experiment, score_worlds, summarize_scores, FullReport, FullSetup, Model, ModelSummary, SceneScore};
use super::lw::{evaluate_lw_dataset, summarize_lw, LwDetectorReport, LwSummary};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, CameraPose, Vec3};
use crate::lightweight::LwDetectorData;
use crate::model::{CategoryTable, Detection2D, FrameObservation, GroundTruthBox, SceneData, WorldState};
use crate::simulator::{synthesize_3d_scene_data, synthesize_lw_detector, synthesize_lw_dataset};

/// Written last by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
    pub files: Vec<String>,
}

fn write_manifest(out: &Path, command: &str, cfg: &RunConfig, mut files: Vec<String>) -> Result<()> {
    files.sort();
    let m = Manifest {
        command: command.to_string(),
        version: FORMAT_VERSION,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        config: cfg.clone(),
        files,
    };
    write_json(&out.join("manifest.json"), &m)
}

/// A JSON result with the provenance fields every output carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub version: u32,
    pub seed: u64,
    pub config_hash: String,
    #[serde(flatten)]
    pub body: T,
}

fn write_stamped<T: Serialize + Clone>(path: &Path, cfg: &RunConfig, body: &T) -> Result<()> {
    let s = Stamped {
        version: FORMAT_VERSION,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        body: body.clone(),
    };
    write_json(path, &s)
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, std::io::Error::other(e.to_string()))
}

/// Write a table: `header` then `rows`, each cell already formatted.
fn write_table(path: &Path, cfg: &RunConfig, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path, cfg.seed, &cfg.hash())?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Generate the presence-detector dataset: one file per detector under
/// `out/detectors`.
pub fn gen_lw(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let dir = out.join("detectors");
    create_dir(&dir)?;
    let hash = cfg.hash();
    let files = (0..cfg.lw.detectors as u64)
        .into_par_iter()
        .map(|id| {
            let data = synthesize_lw_detector(cfg.seed, id, &cfg.lw.dataset)?;
            let path = dir.join(detector_file_name(id));
            write_lw_detector(&path, Header::new(LW_FORMAT, cfg.seed, &hash, &cfg.categories), &data)?;
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;
    let names = files.iter().map(|p| format!("detectors/{}", p.file_name().unwrap().to_string_lossy())).collect();
    write_manifest(out, "gen-lw", cfg, names)?;
    Ok(files)
}

fn load_lw(cfg: &RunConfig, input: Option<&Path>) -> Result<(CategoryTable, Vec<LwDetectorData>)> {
    match input {
        Some(dir) => {
            let (h, data) = read_lw_dir(dir)?;
            Ok((h.categories, data))
        }
        None => Ok((cfg.categories.clone(), synthesize_lw_dataset(cfg.lw.detectors, cfg.seed, &cfg.lw.dataset)?)),
    }
}

/// Everything `run-lw` computes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LwRunOutput {
    pub summary: LwSummary,
    pub reports: Vec<LwDetectorReport>,
}

/// Run the learning, final and lesioned presence models on every detector
/// of a dataset (read from `input`, or generated from the config) and write
/// the curves.
pub fn run_lw(cfg: &RunConfig, input: Option<&Path>, out: &Path) -> Result<LwRunOutput> {
    cfg.validate()?;
    let (table, data) = load_lw(cfg, input)?;
    cfg.lw.filter.validate(table.len())?;
    let reports = evaluate_lw_dataset(&data, &cfg.lw.filter, cfg.seed)?;
    let summary = summarize_lw(&reports)?;
    create_dir(out)?;
    write_lw_outputs(cfg, &table, &summary, &reports, out)?;
    write_stamped(&out.join("summary.json"), cfg, &summary)?;
    write_manifest(
        out,
        "run-lw",
        cfg,
        strings(&["lw_learning_curve.csv", "lw_faultiness.csv", "lw_detectors.csv", "summary.json"]),
    )?;
    Ok(LwRunOutput { summary, reports })
}

fn write_lw_outputs(
    cfg: &RunConfig,
    table: &CategoryTable,
    s: &LwSummary,
    reports: &[LwDetectorReport],
    out: &Path,
) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..s.mse_curve.len())
        .map(|t| {
            vec![
                (t + 1).to_string(),
                fmt(s.mse_curve[t]),
                fmt(s.lesioned_mse),
                fmt(s.learning_curve[t]),
                fmt(s.final_curve[t]),
                fmt(s.lesioned_curve[t]),
            ]
        })
        .collect();
    write_table(
        &out.join("lw_learning_curve.csv"),
        cfg,
        &strings(&["world", "mse", "lesioned_mse", "learning_accuracy", "final_accuracy", "lesioned_accuracy"]),
        &rows,
    )?;
    let at = |c: &crate::eval::AccuracyCurve, x: f64| c.points.iter().find(|p| p.0 == x).map(|p| (p.1, p.2));
    let rows: Vec<Vec<String>> = s
        .learning_by_faultiness
        .points
        .iter()
        .map(|&(x, learning, count)| {
            let fin = at(&s.final_by_faultiness, x).map(|p| p.0);
            let les = at(&s.lesioned_by_faultiness, x).map(|p| p.0);
            let diff = s.difference_by_faultiness.iter().find(|d| d.0 == x).map(|d| d.1);
            vec![
                format!("{x:.2}"),
                fmt(learning),
                fmt_opt(fin),
                fmt_opt(les),
                fmt_opt(diff),
                count.to_string(),
            ]
        })
        .collect();
    write_table(
        &out.join("lw_faultiness.csv"),
        cfg,
        &strings(&["faultiness", "learning_accuracy", "final_accuracy", "lesioned_accuracy", "difference", "worlds"]),
        &rows,
    )?;
    let n = table.len();
    let mut header = strings(&[
        "detector",
        "mean_faultiness",
        "final_mse",
        "lesioned_mse",
        "learning_accuracy",
        "final_accuracy",
        "lesioned_accuracy",
    ]);
    for prefix in ["hallucination_true", "miss_true", "hallucination_final", "miss_final"] {
        header.extend((0..n).map(|c| format!("{prefix}_{c}")));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![
                r.id.to_string(),
                fmt(r.mean_faultiness()),
                fmt(r.final_mse()),
                fmt(r.lesioned_mse),
                fmt(mean(&r.learning_accuracy)),
                fmt(mean(&r.final_accuracy)),
                fmt(mean(&r.lesioned_accuracy)),
            ];
            for v in [
                &r.theta_true.hallucination,
                &r.theta_true.miss,
                &r.theta_final.hallucination,
                &r.theta_final.miss,
            ] {
                row.extend(v.iter().map(|x| fmt(*x)));
            }
            row
        })
        .collect();
    write_table(&out.join("lw_detectors.csv"), cfg, &header, &rows)
}

fn scene_header(cfg: &RunConfig, table: &CategoryTable, intr: &CameraIntrinsics) -> Header {
    let mut h = Header::new(SCENE_FORMAT, cfg.seed, &cfg.hash(), table);
    h.intrinsics = Some(*intr);
    h
}

/// Generate the synthetic 3D dataset: one file per scene under
/// `out/scenes`.
pub fn gen_3d(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let f = &cfg.full;
    let dir = out.join("scenes");
    create_dir(&dir)?;
    let mut header = scene_header(cfg, &cfg.categories, &f.synth.intrinsics);
    header.theta = Some(f.theta_true.clone());
    let files = (0..f.scenes as u64)
        .into_par_iter()
        .map(|i| {
            let scene = synthesize_3d_scene_data(cfg.seed, i, &f.theta_true, &f.synth)?;
            let path = dir.join(scene_file_name(i));
            write_scene(&path, header.clone(), i, &scene)?;
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;
    let names = files.iter().map(|p| format!("scenes/{}", p.file_name().unwrap().to_string_lossy())).collect();
    write_manifest(out, "gen-3d", cfg, names)?;
    Ok(files)
}

/// Scenes with their ids, the category table, intrinsics and (when known)
/// the generating rates.
struct SceneSet {
    ids: Vec<u64>,
    scenes: Vec<SceneData>,
    table: CategoryTable,
    intrinsics: CameraIntrinsics,
    theta: Option<crate::model::Theta>,
}

fn load_scenes(cfg: &RunConfig, input: Option<&Path>) -> Result<SceneSet> {
    match input {
        Some(dir) => {
            let (h, scenes) = read_scene_dir(dir)?;
            let (ids, scenes) = scenes.into_iter().unzip();
            Ok(SceneSet {
                ids,
                scenes,
                intrinsics: h.intrinsics.expect("checked by read_scene"),
                theta: h.theta,
                table: h.categories,
            })
        }
        None => {
            let f = &cfg.full;
            let scenes = crate::simulator::synthesize_3d_dataset(f.scenes, cfg.seed, &f.theta_true, &f.synth)?;
            Ok(SceneSet {
                ids: (0..scenes.len() as u64).collect(),
                scenes,
                table: cfg.categories.clone(),
                intrinsics: f.synth.intrinsics,
                theta: Some(f.theta_true.clone()),
            })
        }
    }
}

fn write_worlds(path: &Path, cfg: &RunConfig, table: &CategoryTable, lines: &[WorldLine]) -> Result<()> {
    write_jsonl(path, &Header::new(WORLDS_FORMAT, cfg.seed, &cfg.hash(), table), lines)
}

fn score_rows(scores: &[SceneScore], ids: &[u64]) -> Vec<Vec<String>> {
    scores
        .iter()
        .map(|s| {
            vec![
                s.order.to_string(),
                ids[s.scene].to_string(),
                s.model.name().to_string(),
                fmt_opt(s.accuracy_2d),
                fmt_opt(s.jaccard),
                fmt_opt(s.distance),
            ]
        })
        .collect()
}

fn model_rows(models: &[ModelSummary]) -> Vec<Vec<String>> {
    models
        .iter()
        .map(|m| {
            vec![
                m.model.name().to_string(),
                fmt_opt(m.accuracy_2d),
                fmt_opt(m.jaccard),
                fmt_opt(m.distance),
            ]
        })
        .collect()
}

const SCORE_COLUMNS: [&str; 6] = ["order", "scene", "model", "accuracy_2d", "jaccard", "distance"];
const MODEL_COLUMNS: [&str; 4] = ["model", "accuracy_2d", "jaccard", "distance"];

/// Run the closed-loop 3D experiment on scenes read from `input` (or
/// generated from the config).
pub fn run_3d(cfg: &RunConfig, input: Option<&Path>, out: &Path) -> Result<FullReport> {
    cfg.validate()?;
    let set = load_scenes(cfg, input)?;
    let f = &cfg.full;
    let setup = FullSetup {
        num_categories: set.table.len(),
        intrinsics: &set.intrinsics,
        noise: &f.noise,
        filter: &f.filter,
        theta_true: set.theta.as_ref(),
        train_fraction: f.train_fraction,
        orders: f.orders,
        bootstrap_resamples: f.bootstrap_resamples,
        seed: cfg.seed,
    };
    let report = run_full_experiment(&set.scenes, &setup)?;
    create_dir(out)?;
    let mut rows = Vec::new();
    for o in &report.orders {
        for (t, theta) in o.theta_hat.iter().enumerate() {
            let mut row = vec![
                o.order.to_string(),
                (t + 1).to_string(),
                set.ids[o.sequence[t]].to_string(),
                fmt_opt(o.mse_true.as_ref().map(|v| v[t])),
                fmt_opt(o.mse_measured.as_ref().map(|v| v[t])),
                fmt(o.ess[t]),
            ];
            row.extend(theta.hallucination.iter().map(|v| fmt(*v)));
            row.extend(theta.detection.iter().map(|v| fmt(*v)));
            rows.push(row);
        }
    }
    let n = set.table.len();
    let mut header = strings(&["order", "step", "scene", "mse_true", "mse_measured", "ess"]);
    header.extend((0..n).map(|c| format!("hallucination_{c}")));
    header.extend((0..n).map(|c| format!("detection_{c}")));
    write_table(&out.join("full_theta_curve.csv"), cfg, &header, &rows)?;
    write_table(&out.join("full_scores.csv"), cfg, &strings(&SCORE_COLUMNS), &score_rows(&report.scores, &set.ids))?;
    let mut models = model_rows(&report.models);
    if report.degenerate {
        models.push(vec!["degenerate-no-rejuvenation".into(), String::new(), String::new(), String::new()]);
    }
    write_table(&out.join("full_models.csv"), cfg, &strings(&MODEL_COLUMNS), &models)?;
    let lines: Vec<WorldLine> = report
        .worlds
        .iter()
        .map(|w| WorldLine {
            scene: set.ids[w.scene],
            model: w.model.name().to_string(),
            order: w.order,
            objects: objects_to_records(&w.world, &set.table),
        })
        .collect();
    write_worlds(&out.join("worlds.jsonl"), cfg, &set.table, &lines)?;
    let mut summary = report.clone();
    summary.worlds.clear();
    write_stamped(&out.join("summary.json"), cfg, &summary)?;
    write_manifest(
        out,
        "run-3d",
        cfg,
        strings(&["full_theta_curve.csv", "full_scores.csv", "full_models.csv", "worlds.jsonl", "summary.json"]),
    )?;
    Ok(report)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxRow {
    video: String,
    frame: usize,
    label: String,
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRow {
    video: String,
    frame: usize,
    px: f64,
    py: f64,
    pz: f64,
    fx: f64,
    fy: f64,
    fz: f64,
}

/// Inputs of `ingest`.
#[derive(Debug, Clone)]
pub struct IngestInput<'a> {
    /// Detections: `video,frame,label,x_min,y_min,x_max,y_max`.
    pub detections: &'a Path,
    /// Camera poses: `video,frame,px,py,pz,fx,fy,fz`.
    pub poses: &'a Path,
    /// Optional ground-truth boxes, same columns as detections.
    pub truth: Option<&'a Path>,
}

fn data_at(path: &Path, line: usize, msg: String) -> Error {
    Error::data(format!("{}: line {line}: {msg}", path.display()))
}

/// Per-video frame lookup built from the pose file.
struct Videos {
    names: Vec<String>,
    frames: Vec<Vec<CameraPose>>,
    index: HashMap<(String, usize), (usize, usize)>,
}

fn read_poses(path: &Path) -> Result<Videos> {
    let rows: Vec<(usize, PoseRow)> = read_csv(path)?;
    let mut names: Vec<String> = Vec::new();
    let mut by_video: Vec<Vec<(usize, usize, CameraPose)>> = Vec::new();
    for (line, r) in rows {
        let pose = CameraPose::new(Vec3::new(r.px, r.py, r.pz), Vec3::new(r.fx, r.fy, r.fz))
            .map_err(|e| data_at(path, line, format!("video {} frame {}: {e}", r.video, r.frame)))?;
        let v = match names.iter().position(|n| *n == r.video) {
            Some(v) => v,
            None => {
                names.push(r.video.clone());
                by_video.push(Vec::new());
                names.len() - 1
            }
        };
        by_video[v].push((r.frame, line, pose));
    }
    if names.is_empty() {
        return Err(Error::data(format!("{}: no poses", path.display())));
    }
    let mut frames = Vec::new();
    let mut index = HashMap::new();
    for (v, mut rows) in by_video.into_iter().enumerate() {
        rows.sort_by_key(|r| r.0);
        for w in rows.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(data_at(path, w[1].1, format!("video {} has two poses for frame {}", names[v], w[1].0)));
            }
        }
        for (k, (frame, _, _)) in rows.iter().enumerate() {
            index.insert((names[v].clone(), *frame), (v, k));
        }
        frames.push(rows.into_iter().map(|r| r.2).collect());
    }
    Ok(Videos { names, frames, index })
}

/// Boxes grouped by video and frame position.
fn read_boxes(path: &Path, videos: &Videos, table: &CategoryTable) -> Result<Vec<Vec<Vec<(BoxRow, usize)>>>> {
    let mut out: Vec<Vec<Vec<(BoxRow, usize)>>> = videos.frames.iter().map(|f| vec![Vec::new(); f.len()]).collect();
    for (line, r) in read_csv::<BoxRow>(path)? {
        let c = table.index_of(&r.label).ok_or_else(|| {
            data_at(path, line, format!("video {} frame {}: unknown category label {:?}", r.video, r.frame, r.label))
        })?;
        if !(r.x_min <= r.x_max && r.y_min <= r.y_max) || ![r.x_min, r.y_min, r.x_max, r.y_max].iter().all(|v| v.is_finite()) {
            return Err(data_at(path, line, format!("video {} frame {}: malformed box", r.video, r.frame)));
        }
        let &(v, k) = videos
            .index
            .get(&(r.video.clone(), r.frame))
            .ok_or_else(|| data_at(path, line, format!("video {}: no camera pose for frame {}", r.video, r.frame)))?;
        out[v][k].push((r, c));
    }
    Ok(out)
}

fn centroid(r: &BoxRow) -> (f64, f64) {
    (0.5 * (r.x_min + r.x_max), 0.5 * (r.y_min + r.y_max))
}

/// Convert external detector output and camera poses into scene files. Each
/// video becomes one scene, numbered in order of first appearance in the
/// pose file; frames follow their frame numbers.
pub fn ingest(cfg: &RunConfig, input: &IngestInput, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.full.synth.intrinsics.validate()?;
    let table = &cfg.categories;
    let videos = read_poses(input.poses)?;
    let dets = read_boxes(input.detections, &videos, table)?;
    let truth = input.truth.map(|p| read_boxes(p, &videos, table)).transpose()?;
    let dir = out.join("scenes");
    create_dir(&dir)?;
    let mut files = Vec::new();
    for (v, name) in videos.names.iter().enumerate() {
        let frames = videos.frames[v]
            .iter()
            .zip(&dets[v])
            .map(|(pose, ds)| FrameObservation {
                camera: *pose,
                detections: ds
                    .iter()
                    .map(|(r, c)| {
                        let (x, y) = centroid(r);
                        Detection2D::new(x, y, *c)
                    })
                    .collect(),
            })
            .collect();
        let truth_boxes = truth.as_ref().map(|t| {
            t[v].iter()
                .map(|bs| {
                    bs.iter()
                        .map(|(r, c)| GroundTruthBox {
                            center: centroid(r),
                            half_width: 0.5 * (r.x_max - r.x_min),
                            half_height: 0.5 * (r.y_max - r.y_min),
                            category: *c,
                        })
                        .collect()
                })
                .collect()
        });
        let scene = SceneData { frames, ground_truth: None, truth_boxes };
        let mut header = scene_header(cfg, table, &cfg.full.synth.intrinsics);
        header.source = Some(name.clone());
        let path = dir.join(scene_file_name(v as u64));
        write_scene(&path, header, v as u64, &scene)?;
        files.push(path);
    }
    let names = files.iter().map(|p| format!("scenes/{}", p.file_name().unwrap().to_string_lossy())).collect();
    write_manifest(out, "ingest", cfg, names)?;
    Ok(files)
}

/// Re-score a saved `worlds.jsonl` against the scenes it was inferred from.
/// The raw-detection baseline is scored on the same scenes.
pub fn eval(cfg: &RunConfig, scenes_dir: &Path, worlds_file: &Path, out: &Path) -> Result<Vec<ModelSummary>> {
    let (header, scenes) = read_scene_dir(scenes_dir)?;
    let intr = header.intrinsics.expect("checked by read_scene");
    let (wh, lines) = read_jsonl::<WorldLine>(worlds_file, WORLDS_FORMAT)?;
    if wh.categories != header.categories {
        return Err(Error::data("worlds and scenes use different category tables"));
    }
    let ids: Vec<u64> = scenes.iter().map(|s| s.0).collect();
    let scene_data: Vec<SceneData> = scenes.into_iter().map(|s| s.1).collect();
    let position: HashMap<u64, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut scores = Vec::new();
    let mut seen = Vec::new();
    for (line, w) in &lines {
        let model = match w.model.as_str() {
            "metacog" => Model::Metacog,
            "lesioned" => Model::Lesioned,
            other => return Err(data_at(worlds_file, *line, format!("unknown model {other:?}"))),
        };
        let &s = position
            .get(&w.scene)
            .ok_or_else(|| data_at(worlds_file, *line, format!("scene {} is not in {}", w.scene, scenes_dir.display())))?;
        let world: WorldState = records_to_world(&w.objects, &header.categories, worlds_file, *line)?;
        scores.extend(score_worlds(&scene_data, &[s], Some(&[world]), model, w.order, &intr)?);
        if !seen.contains(&s) {
            seen.push(s);
        }
    }
    seen.sort_unstable();
    scores.extend(score_worlds(&scene_data, &seen, None, Model::Detections, 0, &intr)?);
    let models = summarize_scores(&scores);
    create_dir(out)?;
    write_table(&out.join("eval_scores.csv"), cfg, &strings(&SCORE_COLUMNS), &score_rows(&scores, &ids))?;
    write_table(&out.join("eval_models.csv"), cfg, &strings(&MODEL_COLUMNS), &model_rows(&models))?;
    write_manifest(out, "eval", cfg, strings(&["eval_scores.csv", "eval_models.csv"]))?;
    Ok(models)
}
