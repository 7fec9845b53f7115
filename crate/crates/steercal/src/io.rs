//! File formats and the unified run configuration.
//!
//! Every artifact file carries a format name and version; loaders reject
//! unknown major versions with a diagnostic naming the file. Pose streams
//! are JSON lines with a header line; configs, manifests, reports, and rigs
//! are single JSON documents; metric tables are CSV.

use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::multiview::{MultiViewResult, Track};
use crate::calib::{CalibConfig, TwoViewResult};
use crate::camera::Intrinsics;
use crate::matching::MatchSet;
use crate::pose::{Pose2D, Pose3D};
use crate::rotation::RotationSO3;
use crate::skeleton::Skeleton;
use crate::steerer::train::{TrainConfig, TrainReport};
use crate::steerer::SteererConfig;
use crate::synth::{AugmentationConfig, RollMode, SceneConfig, SplitDataset, TrainingPair};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}: expected format {expected:?}, found {found:?}")]
    WrongFormat {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}: unsupported {format} version {found} (this build reads {supported})")]
    UnsupportedVersion {
        path: PathBuf,
        format: String,
        found: u32,
        supported: u32,
    },
    #[error("{path}: missing header line")]
    MissingHeader { path: PathBuf },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn json_err(path: &Path, line: usize) -> impl FnOnce(serde_json::Error) -> IoError + '_ {
    move |source| IoError::Json {
        path: path.to_path_buf(),
        line,
        source,
    }
}

/// Writes bytes atomically: temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let tmp = path.with_extension("tmp-write");
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

/// Resolves an output path against `STEERCAL_CACHE_DIR` when it is set and
/// the path is relative.
pub fn resolve_cache_path(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("STEERCAL_CACHE_DIR") {
        Some(dir) => Path::new(&dir).join(path),
        None => path.to_path_buf(),
    }
}

// ── Generic versioned JSON-lines streams ─────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
struct StreamHeader<Extra> {
    format: String,
    version: u32,
    #[serde(flatten)]
    extra: Extra,
}

fn check_header<Extra: serde::de::DeserializeOwned>(
    path: &Path,
    line: &str,
    format: &str,
    version: u32,
) -> Result<Extra, IoError> {
    let header: StreamHeader<serde_json::Value> =
        serde_json::from_str(line).map_err(json_err(path, 1))?;
    if header.format != format {
        return Err(IoError::WrongFormat {
            path: path.to_path_buf(),
            expected: format.to_string(),
            found: header.format,
        });
    }
    if header.version != version {
        return Err(IoError::UnsupportedVersion {
            path: path.to_path_buf(),
            format: format.to_string(),
            found: header.version,
            supported: version,
        });
    }
    serde_json::from_value(header.extra).map_err(json_err(path, 1))
}

// ── 3D pose datasets ─────────────────────────────────────────────────────────

const POSES3D_FORMAT: &str = "steercal-poses3d";
const POSES3D_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Poses3dExtra {
    skeleton: Skeleton,
}

pub fn write_poses3d(path: &Path, skeleton: &Skeleton, poses: &[Pose3D]) -> Result<(), IoError> {
    let mut out = Vec::new();
    let header = StreamHeader {
        format: POSES3D_FORMAT.into(),
        version: POSES3D_VERSION,
        extra: Poses3dExtra {
            skeleton: skeleton.clone(),
        },
    };
    out.extend_from_slice(&serde_json::to_vec(&header).expect("header"));
    out.push(b'\n');
    for p in poses {
        out.extend_from_slice(&serde_json::to_vec(p).expect("pose"));
        out.push(b'\n');
    }
    atomic_write(path, &out)
}

pub fn read_poses3d(path: &Path) -> Result<(Skeleton, Vec<Pose3D>), IoError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut lines = std::io::BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| IoError::MissingHeader {
            path: path.to_path_buf(),
        })?
        .map_err(io_err(path))?;
    let extra: Poses3dExtra = check_header(path, &first, POSES3D_FORMAT, POSES3D_VERSION)?;
    let mut poses = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let pose: Pose3D = serde_json::from_str(&line).map_err(json_err(path, i + 2))?;
        if pose.n_joints() != extra.skeleton.n_joints() {
            return Err(IoError::Invalid {
                path: path.to_path_buf(),
                message: format!(
                    "pose on line {} has {} joints, skeleton has {}",
                    i + 2,
                    pose.n_joints(),
                    extra.skeleton.n_joints()
                ),
            });
        }
        poses.push(pose);
    }
    Ok((extra.skeleton, poses))
}

// ── Training-pair cache and split manifest ───────────────────────────────────

const PAIRS_FORMAT: &str = "steercal-pairs";
const PAIRS_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct PairsExtra {
    skeleton: Skeleton,
    n_pairs: usize,
}

pub fn write_pairs(path: &Path, skeleton: &Skeleton, pairs: &[TrainingPair]) -> Result<(), IoError> {
    let mut out = Vec::new();
    let header = StreamHeader {
        format: PAIRS_FORMAT.into(),
        version: PAIRS_VERSION,
        extra: PairsExtra {
            skeleton: skeleton.clone(),
            n_pairs: pairs.len(),
        },
    };
    out.extend_from_slice(&serde_json::to_vec(&header).expect("header"));
    out.push(b'\n');
    for p in pairs {
        out.extend_from_slice(&serde_json::to_vec(p).expect("pair"));
        out.push(b'\n');
    }
    atomic_write(path, &out)
}

pub fn read_pairs(path: &Path) -> Result<(Skeleton, Vec<TrainingPair>), IoError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut lines = std::io::BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| IoError::MissingHeader {
            path: path.to_path_buf(),
        })?
        .map_err(io_err(path))?;
    let extra: PairsExtra = check_header(path, &first, PAIRS_FORMAT, PAIRS_VERSION)?;
    let mut pairs = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        pairs.push(serde_json::from_str(&line).map_err(json_err(path, i + 2))?);
    }
    Ok((extra.skeleton, pairs))
}

const MANIFEST_FORMAT: &str = "steercal-split-manifest";
const MANIFEST_VERSION: u32 = 1;

/// Cache-line indices of each split, in split order.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    pub format: String,
    pub version: u32,
    pub pairs_file: String,
    pub ratios: [f64; 3],
    pub counts: [usize; 3],
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn write_manifest(path: &Path, manifest: &SplitManifest) -> Result<(), IoError> {
    atomic_write(
        path,
        &serde_json::to_vec_pretty(manifest).expect("manifest"),
    )
}

pub fn read_manifest(path: &Path) -> Result<SplitManifest, IoError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let manifest: SplitManifest =
        serde_json::from_slice(&bytes).map_err(json_err(path, 1))?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(IoError::WrongFormat {
            path: path.to_path_buf(),
            expected: MANIFEST_FORMAT.into(),
            found: manifest.format,
        });
    }
    if manifest.version != MANIFEST_VERSION {
        return Err(IoError::UnsupportedVersion {
            path: path.to_path_buf(),
            format: MANIFEST_FORMAT.into(),
            found: manifest.version,
            supported: MANIFEST_VERSION,
        });
    }
    Ok(manifest)
}

/// Reassembles a split from a cache, preserving split order.
pub fn apply_manifest(
    pairs: Vec<TrainingPair>,
    manifest: &SplitManifest,
    path: &Path,
) -> Result<SplitDataset, IoError> {
    let covered = manifest.train.len() + manifest.val.len() + manifest.test.len();
    if pairs.len() != covered {
        return Err(IoError::Invalid {
            path: path.to_path_buf(),
            message: format!("manifest covers {covered} pairs, cache has {}", pairs.len()),
        });
    }
    let take = |indices: &[usize]| -> Result<Vec<TrainingPair>, IoError> {
        indices
            .iter()
            .map(|&i| {
                pairs.get(i).cloned().ok_or_else(|| IoError::Invalid {
                    path: path.to_path_buf(),
                    message: format!("manifest index {i} beyond cache"),
                })
            })
            .collect()
    };
    Ok(SplitDataset {
        train: take(&manifest.train)?,
        val: take(&manifest.val)?,
        test: take(&manifest.test)?,
        ratios: manifest.ratios,
    })
}

/// Builds a manifest from a split, matching pairs back to cache order.
pub fn manifest_from_split(
    split: &SplitDataset,
    cache_order: &[TrainingPair],
    pairs_file: &str,
) -> SplitManifest {
    use std::collections::HashMap;
    let mut index: HashMap<Vec<u8>, Vec<usize>> = HashMap::new();
    for (i, p) in cache_order.iter().enumerate() {
        index
            .entry(serde_json::to_vec(p).expect("pair"))
            .or_default()
            .push(i);
    }
    let mut locate = |pairs: &[TrainingPair]| -> Vec<usize> {
        pairs
            .iter()
            .map(|p| {
                let key = serde_json::to_vec(p).expect("pair");
                index
                    .get_mut(&key)
                    .and_then(|v| v.pop())
                    .expect("split pair present in cache")
            })
            .collect()
    };
    SplitManifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        pairs_file: pairs_file.to_string(),
        ratios: split.ratios,
        counts: [split.train.len(), split.val.len(), split.test.len()],
        train: locate(&split.train),
        val: locate(&split.val),
        test: locate(&split.test),
    }
}

// ── Detection files ──────────────────────────────────────────────────────────

const DETECTIONS_FORMAT: &str = "steercal-detections";
const DETECTIONS_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewDeclaration {
    pub view: usize,
    pub intrinsics: Intrinsics,
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionsExtra {
    skeleton: Skeleton,
    views: Vec<ViewDeclaration>,
}

/// One detected instance in one frame and view.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub frame: usize,
    pub view: usize,
    pub instance: usize,
    pub coords: Vec<[f64; 2]>,
    pub visible: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    /// Ground-truth identity for synthetic data; absent for real detections.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_instance: Option<usize>,
}

/// In-memory detection set: `frames[f][v]` lists instances in view `v`.
#[derive(Debug, Clone)]
pub struct Detections {
    pub skeleton: Skeleton,
    pub views: Vec<ViewDeclaration>,
    pub frames: Vec<Vec<Vec<DetectionRecord>>>,
}

impl Detections {
    pub fn pose(record: &DetectionRecord) -> Pose2D {
        Pose2D::new(
            record.coords.clone(),
            record.visible.clone(),
            crate::pose::CoordFrame2D::Pixel,
        )
    }

    /// Per-frame instance poses of one view.
    pub fn view_poses(&self, view: usize) -> Vec<Vec<Pose2D>> {
        self.frames
            .iter()
            .map(|f| f[view].iter().map(Self::pose).collect())
            .collect()
    }

    /// Ground-truth identities aligned with [`view_poses`], when present.
    pub fn view_gt(&self, view: usize) -> Vec<Vec<Option<usize>>> {
        self.frames
            .iter()
            .map(|f| f[view].iter().map(|r| r.gt_instance).collect())
            .collect()
    }
}

pub fn write_detections(
    path: &Path,
    skeleton: &Skeleton,
    views: &[ViewDeclaration],
    records: &[DetectionRecord],
) -> Result<(), IoError> {
    let file = std::fs::File::create(path.with_extension("tmp-write")).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let header = StreamHeader {
        format: DETECTIONS_FORMAT.into(),
        version: DETECTIONS_VERSION,
        extra: DetectionsExtra {
            skeleton: skeleton.clone(),
            views: views.to_vec(),
        },
    };
    serde_json::to_writer(&mut w, &header).map_err(json_err(path, 1))?;
    w.write_all(b"\n").map_err(io_err(path))?;
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(json_err(path, 0))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.into_inner()
        .map_err(|e| IoError::Io {
            path: path.to_path_buf(),
            source: e.into_error(),
        })?
        .sync_all()
        .map_err(io_err(path))?;
    std::fs::rename(path.with_extension("tmp-write"), path).map_err(io_err(path))?;
    Ok(())
}

pub fn read_detections(path: &Path) -> Result<Detections, IoError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut lines = std::io::BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| IoError::MissingHeader {
            path: path.to_path_buf(),
        })?
        .map_err(io_err(path))?;
    let extra: DetectionsExtra =
        check_header(path, &first, DETECTIONS_FORMAT, DETECTIONS_VERSION)?;
    let n_views = extra.views.len();
    let n_joints = extra.skeleton.n_joints();
    let mut records: Vec<DetectionRecord> = Vec::new();
    let mut n_frames = 0usize;
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: DetectionRecord = serde_json::from_str(&line).map_err(json_err(path, i + 2))?;
        if r.view >= n_views {
            return Err(IoError::Invalid {
                path: path.to_path_buf(),
                message: format!("line {}: view {} not declared", i + 2, r.view),
            });
        }
        if r.coords.len() != n_joints || r.visible.len() != n_joints {
            return Err(IoError::Invalid {
                path: path.to_path_buf(),
                message: format!(
                    "line {}: record has {} joints, skeleton has {n_joints}",
                    i + 2,
                    r.coords.len()
                ),
            });
        }
        n_frames = n_frames.max(r.frame + 1);
        records.push(r);
    }
    let mut frames = vec![vec![Vec::new(); n_views]; n_frames];
    for r in records {
        frames[r.frame][r.view].push(r);
    }
    for frame in frames.iter_mut() {
        for view in frame.iter_mut() {
            view.sort_by_key(|r| r.instance);
        }
    }
    Ok(Detections {
        skeleton: extra.skeleton,
        views: extra.views,
        frames,
    })
}

// ── Calibration reports and rig files ────────────────────────────────────────

const PAIR_REPORT_FORMAT: &str = "steercal-pair-report";
const PAIR_REPORT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairReport {
    pub format: String,
    pub version: u32,
    pub view_a: usize,
    pub view_b: usize,
    pub rotation_rodrigues: [f64; 3],
    pub rotation_matrix: [[f64; 3]; 3],
    pub translation_direction: [f64; 3],
    pub success: bool,
    pub attempts_used: usize,
    #[serde(with = "crate::serde_util::nullable_f64")]
    pub median_reproj_px: f64,
    pub frame_indices: Vec<usize>,
    /// Per sampled frame: hard matches `(instance A, instance B, weight)`.
    pub matches: Vec<MatchSet>,
    pub loss_trace: Vec<(f64, f64)>,
    pub config: CalibConfig,
}

impl PairReport {
    pub fn from_result(
        result: &TwoViewResult,
        view_a: usize,
        view_b: usize,
        config: &CalibConfig,
    ) -> Self {
        let m = result.relative_pose.rotation.to_matrix();
        Self {
            format: PAIR_REPORT_FORMAT.into(),
            version: PAIR_REPORT_VERSION,
            view_a,
            view_b,
            rotation_rodrigues: result.relative_pose.rotation.rodrigues,
            rotation_matrix: [
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ],
            translation_direction: result.relative_pose.translation,
            success: result.success,
            attempts_used: result.attempts_used,
            median_reproj_px: result.median_reproj_px,
            frame_indices: result.frame_indices.clone(),
            matches: result.matches.clone(),
            loss_trace: result.loss_trace.clone(),
            config: config.clone(),
        }
    }
}

pub fn write_pair_report(path: &Path, report: &PairReport) -> Result<(), IoError> {
    atomic_write(path, &serde_json::to_vec_pretty(report).expect("report"))
}

pub fn read_pair_report(path: &Path) -> Result<PairReport, IoError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let report: PairReport = serde_json::from_slice(&bytes).map_err(json_err(path, 1))?;
    if report.format != PAIR_REPORT_FORMAT {
        return Err(IoError::WrongFormat {
            path: path.to_path_buf(),
            expected: PAIR_REPORT_FORMAT.into(),
            found: report.format,
        });
    }
    if report.version != PAIR_REPORT_VERSION {
        return Err(IoError::UnsupportedVersion {
            path: path.to_path_buf(),
            format: PAIR_REPORT_FORMAT.into(),
            found: report.version,
            supported: PAIR_REPORT_VERSION,
        });
    }
    Ok(report)
}

const RIG_FORMAT: &str = "steercal-rig";
const RIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigCamera {
    pub rotation_rodrigues: [f64; 3],
    pub position: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigFile {
    pub format: String,
    pub version: u32,
    /// Gauge declaration: camera 0 at identity, unit distance 0 to 1.
    pub gauge: String,
    pub cameras: Vec<RigCamera>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_ba_median_e2d_px: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_ba_median_e2d_px: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tracks: Vec<Vec<Track>>,
}

impl RigFile {
    pub fn from_result(result: &MultiViewResult) -> Self {
        Self {
            format: RIG_FORMAT.into(),
            version: RIG_VERSION,
            gauge: "camera0_identity_unit_distance_0_1".into(),
            cameras: result
                .rotations
                .iter()
                .zip(&result.positions)
                .map(|(r, p)| RigCamera {
                    rotation_rodrigues: r.rodrigues,
                    position: *p,
                })
                .collect(),
            pre_ba_median_e2d_px: Some(result.pre_ba_median_e2d_px),
            post_ba_median_e2d_px: Some(result.post_ba_median_e2d_px),
            tracks: result.tracks.clone(),
        }
    }

    pub fn rotation(&self, v: usize) -> RotationSO3 {
        RotationSO3 {
            rodrigues: self.cameras[v].rotation_rodrigues,
        }
    }
}

pub fn write_rig(path: &Path, rig: &RigFile) -> Result<(), IoError> {
    atomic_write(path, &serde_json::to_vec_pretty(rig).expect("rig"))
}

pub fn read_rig(path: &Path) -> Result<RigFile, IoError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let rig: RigFile = serde_json::from_slice(&bytes).map_err(json_err(path, 1))?;
    if rig.format != RIG_FORMAT {
        return Err(IoError::WrongFormat {
            path: path.to_path_buf(),
            expected: RIG_FORMAT.into(),
            found: rig.format,
        });
    }
    if rig.version != RIG_VERSION {
        return Err(IoError::UnsupportedVersion {
            path: path.to_path_buf(),
            format: RIG_FORMAT.into(),
            found: rig.version,
            supported: RIG_VERSION,
        });
    }
    Ok(rig)
}

// ── Run configuration ────────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub n_poses: usize,
    pub n_views: usize,
    pub n_rolls: usize,
    pub roll_mode: RollMode,
    pub n_pairs: usize,
    pub ratios: [f64; 3],
    /// Optional synthetic calibration scene to emit alongside the pairs.
    pub scene: Option<SceneConfig>,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            n_poses: 100,
            n_views: 100,
            n_rolls: 20,
            roll_mode: RollMode::Random,
            n_pairs: 3000,
            ratios: [0.7, 0.2, 0.1],
            scene: None,
        }
    }
}

/// The unified configuration document consumed by every subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Skeleton file; the builtin quadruped when absent.
    pub skeleton_file: Option<String>,
    pub synth: SynthSection,
    pub augment: AugmentationConfig,
    pub steerer: SteererConfig,
    pub train: TrainConfig,
    pub calib: CalibConfig,
    /// Accuracy thresholds (degrees) reported by `evaluate`.
    pub tau_deg: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            skeleton_file: None,
            synth: SynthSection::default(),
            augment: AugmentationConfig::default(),
            steerer: SteererConfig::default(),
            train: TrainConfig::default(),
            calib: CalibConfig::default(),
            tau_deg: vec![20.0, 30.0],
        }
    }
}

pub fn read_config(path: &Path) -> Result<RunConfig, IoError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(json_err(path, 1))
}

pub fn read_skeleton(path: &Path) -> Result<Skeleton, IoError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let skeleton: Skeleton = serde_json::from_slice(&bytes).map_err(json_err(path, 1))?;
    skeleton.validate().map_err(|e| IoError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(skeleton)
}

pub fn write_skeleton(path: &Path, skeleton: &Skeleton) -> Result<(), IoError> {
    atomic_write(
        path,
        &serde_json::to_vec_pretty(skeleton).expect("skeleton"),
    )
}

pub fn write_train_report(path: &Path, report: &TrainReport) -> Result<(), IoError> {
    atomic_write(path, &serde_json::to_vec_pretty(report).expect("report"))
}

// ── Metric tables ────────────────────────────────────────────────────────────

/// One evaluated camera pair for the CSV table.
#[derive(Debug, Serialize)]
pub struct MetricsRow {
    pub pair: String,
    pub e_rot_deg: f64,
    pub e_trans_deg: f64,
    pub median_reproj_px: f64,
    pub precision: Option<f64>,
}

/// Writes the per-pair table and threshold summary as CSV.
pub fn write_metrics_csv(
    path: &Path,
    rows: &[MetricsRow],
    summary: &[(String, f64)],
) -> Result<(), IoError> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["pair", "e_rot_deg", "e_trans_deg", "median_reproj_px", "precision"])
            .map_err(|e| csv_err(path, e))?;
        for r in rows {
            w.write_record([
                r.pair.clone(),
                format!("{:.9}", r.e_rot_deg),
                format!("{:.9}", r.e_trans_deg),
                format!("{:.9}", r.median_reproj_px),
                r.precision.map_or(String::from("no-match"), |p| format!("{p:.9}")),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
        w.write_record(["metric", "value", "", "", ""])
            .map_err(|e| csv_err(path, e))?;
        for (name, value) in summary {
            w.write_record([name.clone(), format!("{value:.9}"), String::new(), String::new(), String::new()])
                .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(io_err(path))?;
    }
    atomic_write(path, &buf)
}

fn csv_err(path: &Path, e: csv::Error) -> IoError {
    IoError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::quadruped_skeleton;
    use crate::synth::{
        generate_training_pairs, procedural_quadruped_poses, sample_camera_set, split_dataset,
        RollMode,
    };

    #[test]
    fn poses3d_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poses.jsonl");
        let skeleton = quadruped_skeleton();
        let poses = procedural_quadruped_poses(5, 1);
        write_poses3d(&path, &skeleton, &poses).unwrap();
        let (s, p) = read_poses3d(&path).unwrap();
        assert_eq!(s, skeleton);
        assert_eq!(p, poses);
    }

    #[test]
    fn pairs_and_manifest_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let skeleton = quadruped_skeleton();
        let poses = procedural_quadruped_poses(4, 2);
        let cams = sample_camera_set(6, 1, RollMode::Random, 2);
        let pairs = generate_training_pairs(&poses, &cams, 20, 2).unwrap();
        let split = split_dataset(pairs.clone(), [0.7, 0.2, 0.1], 2).unwrap();

        let pairs_path = dir.path().join("pairs.jsonl");
        write_pairs(&pairs_path, &skeleton, &pairs).unwrap();
        let manifest = manifest_from_split(&split, &pairs, "pairs.jsonl");
        let manifest_path = dir.path().join("manifest.json");
        write_manifest(&manifest_path, &manifest).unwrap();

        let (_, cached) = read_pairs(&pairs_path).unwrap();
        let manifest = read_manifest(&manifest_path).unwrap();
        let restored = apply_manifest(cached, &manifest, &pairs_path).unwrap();
        assert_eq!(restored.train.len(), split.train.len());
        assert_eq!(restored.val.len(), split.val.len());
        assert_eq!(restored.test.len(), split.test.len());
        // Same multiset of pairs per split.
        for (a, b) in restored.train.iter().zip(&split.train) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn detections_roundtrip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("detections.jsonl");
        let skeleton = quadruped_skeleton();
        let views = vec![
            ViewDeclaration {
                view: 0,
                intrinsics: Intrinsics {
                    fx: 1000.0,
                    fy: 1000.0,
                    cx: 500.0,
                    cy: 500.0,
                },
            },
            ViewDeclaration {
                view: 1,
                intrinsics: Intrinsics {
                    fx: 900.0,
                    fy: 900.0,
                    cx: 480.0,
                    cy: 480.0,
                },
            },
        ];
        let record = DetectionRecord {
            frame: 0,
            view: 1,
            instance: 0,
            coords: vec![[1.0, 2.0]; 16],
            visible: vec![true; 16],
            confidence: Some(0.9),
            gt_instance: Some(3),
        };
        write_detections(&path, &skeleton, &views, &[record]).unwrap();
        let d = read_detections(&path).unwrap();
        assert_eq!(d.frames.len(), 1);
        assert_eq!(d.frames[0][1].len(), 1);
        assert_eq!(d.frames[0][0].len(), 0);
        assert_eq!(d.frames[0][1][0].gt_instance, Some(3));
    }

    #[test]
    fn unknown_versions_are_rejected_with_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        std::fs::write(
            &path,
            b"{\"format\":\"steercal-pairs\",\"version\":9,\"skeleton\":null,\"n_pairs\":0}\n",
        )
        .unwrap();
        match read_pairs(&path) {
            Err(IoError::UnsupportedVersion { found: 9, .. }) => {}
            other => panic!("expected version rejection, got {other:?}"),
        }
    }

    #[test]
    fn wrong_format_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        std::fs::write(&path, b"{\"format\":\"something-else\",\"version\":1}\n").unwrap();
        assert!(matches!(
            read_poses3d(&path),
            Err(IoError::WrongFormat { .. })
        ));
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, b"{\"seed\": 1, \"typo_field\": 2}").unwrap();
        assert!(read_config(&path).is_err());
        std::fs::write(&path, b"{\"seed\": 1}").unwrap();
        let cfg = read_config(&path).unwrap();
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.calib.n_iterations, 1000);
    }

    #[test]
    fn metrics_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let rows = vec![MetricsRow {
            pair: "0-1".into(),
            e_rot_deg: 1.5,
            e_trans_deg: 2.5,
            median_reproj_px: 3.0,
            precision: None,
        }];
        write_metrics_csv(&path, &rows, &[("rra@20".into(), 1.0)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("no-match"));
        assert!(text.contains("rra@20"));
    }
}
