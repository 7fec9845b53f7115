//! Command-line interface: synthesize training data, train the
//! pose-rotation network, calibrate camera pairs or rigs from detection
//! files, evaluate against ground truth, and complete occluded keypoints.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;

use steercal::calib::multiview::{calibrate_multiview, MultiViewInput, MultiViewResult};
use steercal::calib::{calibrate_pair, CalibError, PairObservations};
use steercal::io::{self, DetectionRecord, Detections, MetricsRow, PairReport, RigFile, ViewDeclaration};
use steercal::matching::MatchSet;
use steercal::metrics::{
    rotation_error_deg, rra_rta_auc, translation_error_deg, PairPoseError,
};
use steercal::pose::{denormalize_pose_centric, normalize_pose_centric, CoordFrame2D};
use steercal::rotation::RotationSO3;
use steercal::skeleton::quadruped_skeleton;
use steercal::steerer::checkpoint::{load as load_checkpoint, save as save_checkpoint};
use steercal::steerer::train::{train, train_from, Adam};
use steercal::steerer::{complete_keypoints, SteererParams};
use steercal::synth::{
    generate_training_pairs, procedural_quadruped_poses, render_scene, sample_camera_set,
    split_dataset, SyntheticScene,
};
use steercal::{plot, Skeleton};

#[derive(Parser)]
#[command(name = "steercal", version, about = "Extrinsic multi-camera calibration from 2D articulated poses")]
struct Cli {
    /// Worker threads for internal parallelism (0 = automatic).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CalibrateMode {
    Pair,
    Multi,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a training-pair cache (and optionally a synthetic scene).
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// 3D pose dataset file; the procedural generator when absent.
        #[arg(long)]
        poses: Option<PathBuf>,
    },
    /// Train the pose-rotation network on a pair cache.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Continue from the checkpoint at --out if it exists.
        #[arg(long)]
        resume: bool,
    },
    /// Calibrate a camera pair or a whole rig from detections.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        mode: CalibrateMode,
        #[arg(long)]
        out: PathBuf,
        /// Rig file destination (multi mode).
        #[arg(long)]
        rig: Option<PathBuf>,
        /// Views for pair mode, e.g. "0,1".
        #[arg(long, default_value = "0,1")]
        views: String,
    },
    /// Compare a calibration report against a ground-truth rig.
    Evaluate {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        /// Detections with ground-truth identities, for match precision.
        #[arg(long)]
        detections: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fill occluded keypoints by steering with the identity rotation.
    Complete {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep visible input joints verbatim (default); off predicts all.
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        keep_visible: bool,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .ok();
    }
    match cli.command {
        Command::Synth {
            config,
            out_dir,
            poses,
        } => cmd_synth(&config, &out_dir, poses.as_deref()),
        Command::Train {
            config,
            pairs,
            manifest,
            out,
            report,
            resume,
        } => cmd_train(&config, &pairs, &manifest, &out, report.as_deref(), resume),
        Command::Calibrate {
            config,
            detections,
            checkpoint,
            mode,
            out,
            rig,
            views,
        } => cmd_calibrate(&config, &detections, &checkpoint, mode, &out, rig.as_deref(), &views),
        Command::Evaluate {
            report,
            ground_truth,
            detections,
            out_dir,
            config,
        } => cmd_evaluate(
            &report,
            &ground_truth,
            detections.as_deref(),
            &out_dir,
            config.as_deref(),
        ),
        Command::Complete {
            checkpoint,
            detections,
            out,
            keep_visible,
        } => cmd_complete(&checkpoint, &detections, &out, keep_visible),
    }
}

fn load_skeleton(config: &io::RunConfig) -> Result<Skeleton> {
    match &config.skeleton_file {
        Some(path) => Ok(io::read_skeleton(Path::new(path))
            .with_context(|| format!("loading skeleton {path}"))?),
        None => Ok(quadruped_skeleton()),
    }
}

fn scene_to_records(scene: &SyntheticScene) -> (Vec<ViewDeclaration>, Vec<DetectionRecord>) {
    let views: Vec<ViewDeclaration> = scene
        .cameras
        .iter()
        .enumerate()
        .map(|(v, cam)| ViewDeclaration {
            view: v,
            intrinsics: cam.intrinsics,
        })
        .collect();
    let mut records = Vec::new();
    for (f, frame) in scene.frames.iter().enumerate() {
        for (v, dets) in frame.views.iter().enumerate() {
            for (i, det) in dets.iter().enumerate() {
                records.push(DetectionRecord {
                    frame: f,
                    view: v,
                    instance: i,
                    coords: det.pose_px.coords.clone(),
                    visible: det.pose_px.visible.clone(),
                    confidence: None,
                    gt_instance: Some(det.gt_instance),
                });
            }
        }
    }
    (views, records)
}

fn scene_to_rig(scene: &SyntheticScene) -> RigFile {
    // Express cameras in the gauge of camera 0 with unit distance 0 -> 1.
    let r0 = scene.cameras[0].pose.rotation.to_matrix();
    let c0 = scene.cameras[0].pose.center();
    let scale = (scene.cameras[1].pose.center() - c0).norm();
    let cameras = scene
        .cameras
        .iter()
        .map(|cam| {
            let r = cam.pose.rotation.to_matrix();
            let c = cam.pose.center();
            let r_gauge = r * r0.transpose();
            let c_gauge = r0 * (c - c0) / scale;
            io::RigCamera {
                rotation_rodrigues: RotationSO3::from_matrix(&r_gauge)
                    .expect("rotation")
                    .rodrigues,
                position: [c_gauge.x, c_gauge.y, c_gauge.z],
            }
        })
        .collect();
    RigFile {
        format: "steercal-rig".into(),
        version: 1,
        gauge: "camera0_identity_unit_distance_0_1".into(),
        cameras,
        pre_ba_median_e2d_px: None,
        post_ba_median_e2d_px: None,
        tracks: Vec::new(),
    }
}

fn cmd_synth(config_path: &Path, out_dir: &Path, poses_file: Option<&Path>) -> Result<()> {
    let config = io::read_config(config_path)?;
    let out_dir = io::resolve_cache_path(out_dir);
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let (skeleton, poses) = match poses_file {
        Some(path) => io::read_poses3d(path)?,
        None => {
            let skeleton = load_skeleton(&config)?;
            if skeleton != quadruped_skeleton() {
                bail!(
                    "the procedural pose generator only supports the builtin quadruped \
                     skeleton; supply --poses for skeleton {:?}",
                    skeleton.name
                );
            }
            (
                skeleton,
                procedural_quadruped_poses(config.synth.n_poses, config.seed),
            )
        }
    };

    let cameras = sample_camera_set(
        config.synth.n_views,
        config.synth.n_rolls,
        config.synth.roll_mode,
        config.seed,
    );
    let pairs = generate_training_pairs(&poses, &cameras, config.synth.n_pairs, config.seed)
        .context("generating training pairs")?;
    let split = split_dataset(pairs.clone(), config.synth.ratios, config.seed)
        .context("splitting dataset")?;

    let pairs_path = out_dir.join("pairs.jsonl");
    io::write_pairs(&pairs_path, &skeleton, &pairs)?;
    let manifest = io::manifest_from_split(&split, &pairs, "pairs.jsonl");
    io::write_manifest(&out_dir.join("manifest.json"), &manifest)?;
    println!(
        "wrote {} pairs ({} train / {} val / {} test) to {}",
        pairs.len(),
        split.train.len(),
        split.val.len(),
        split.test.len(),
        pairs_path.display()
    );

    if let Some(scene_cfg) = &config.synth.scene {
        let scene = render_scene(scene_cfg);
        let (views, records) = scene_to_records(&scene);
        io::write_detections(
            &out_dir.join("scene_detections.jsonl"),
            &scene.skeleton,
            &views,
            &records,
        )?;
        io::write_rig(&out_dir.join("scene_rig.json"), &scene_to_rig(&scene))?;
        println!(
            "wrote synthetic scene: {} views, {} frames, {} instances",
            scene_cfg.n_views, scene_cfg.n_frames, scene_cfg.n_instances
        );
    }
    Ok(())
}

fn cmd_train(
    config_path: &Path,
    pairs_path: &Path,
    manifest_path: &Path,
    out: &Path,
    report_path: Option<&Path>,
    resume: bool,
) -> Result<()> {
    let config = io::read_config(config_path)?;
    let (skeleton, pairs) = io::read_pairs(pairs_path)?;
    let manifest = io::read_manifest(manifest_path)?;
    let dataset = io::apply_manifest(pairs, &manifest, pairs_path)?;
    let mut steerer_cfg = config.steerer;
    steerer_cfg.n_joints = skeleton.n_joints();
    let mut aug = config.augment;
    aug.rng_seed = config.seed;
    let mut topt = config.train;
    topt.seed = config.seed;

    let out = io::resolve_cache_path(out);
    let (params, report) = if resume && out.exists() {
        let ckpt = load_checkpoint(&out)?;
        let state = ckpt
            .train_state
            .context("checkpoint has no optimizer state to resume from")?;
        let (m, v) = ckpt.adam_moments.context("missing optimizer moments")?;
        let mut adam = Adam::new(state.learning_rate, ckpt.params.n_params());
        adam.m = m;
        adam.v = v;
        adam.step = state.adam_step;
        let prior = ckpt.report.unwrap_or_default();
        println!("resuming from epoch {}", state.epoch);
        train_from(ckpt.params, adam, state.epoch, prior, &dataset, &aug, &topt)?
    } else {
        train(&dataset, &steerer_cfg, &aug, &topt, &skeleton.hash())?
    };

    // Persist with fresh optimizer state so the run can continue later.
    let adam = Adam::new(topt.learning_rate, params.n_params());
    save_checkpoint(
        &out,
        &params,
        &skeleton,
        Some(&report),
        Some((&adam, report.epochs_run)),
    )?;
    if let Some(rp) = report_path {
        io::write_train_report(&io::resolve_cache_path(rp), &report)?;
    }
    println!(
        "trained {} epochs: best val {:.4} (epoch {}), test {:.4}; checkpoint {}",
        report.epochs_run,
        report.best_val_loss,
        report.best_epoch,
        report.test_loss,
        out.display()
    );
    Ok(())
}

fn parse_views(views: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = views.split(',').collect();
    if parts.len() != 2 {
        bail!("--views expects two comma-separated indices, got {views:?}");
    }
    Ok((parts[0].trim().parse()?, parts[1].trim().parse()?))
}

fn pair_observations_from(detections: &Detections, a: usize, b: usize) -> PairObservations {
    PairObservations {
        frames: detections
            .frames
            .iter()
            .map(|f| {
                (
                    f[a].iter().map(Detections::pose).collect(),
                    f[b].iter().map(Detections::pose).collect(),
                )
            })
            .collect(),
        intrinsics_a: detections.views[a].intrinsics,
        intrinsics_b: detections.views[b].intrinsics,
    }
}

fn load_model(checkpoint: &Path, detections: &Detections) -> Result<(SteererParams, Skeleton)> {
    let ckpt = load_checkpoint(checkpoint)?;
    let det_hash = detections.skeleton.hash();
    if det_hash != ckpt.params.skeleton_hash {
        bail!(
            "skeleton mismatch: detections carry {} ({det_hash}), checkpoint was trained on {} ({})",
            detections.skeleton.name,
            ckpt.skeleton.name,
            ckpt.params.skeleton_hash
        );
    }
    Ok((ckpt.params, ckpt.skeleton))
}

fn cmd_calibrate(
    config_path: &Path,
    detections_path: &Path,
    checkpoint: &Path,
    mode: CalibrateMode,
    out: &Path,
    rig_path: Option<&Path>,
    views: &str,
) -> Result<()> {
    let config = io::read_config(config_path)?;
    let detections = io::read_detections(detections_path)?;
    let (params, skeleton) = load_model(checkpoint, &detections)?;
    let mut calib_cfg = config.calib.clone();
    calib_cfg.seed = config.seed;
    let out = io::resolve_cache_path(out);

    match mode {
        CalibrateMode::Pair => {
            let (a, b) = parse_views(views)?;
            if a >= detections.views.len() || b >= detections.views.len() {
                bail!(
                    "views {a},{b} out of range: detections declare {} views",
                    detections.views.len()
                );
            }
            let obs = pair_observations_from(&detections, a, b);
            match calibrate_pair(&obs, &params, &skeleton, &calib_cfg) {
                Ok(result) => {
                    let report = PairReport::from_result(&result, a, b, &calib_cfg);
                    io::write_pair_report(&out, &report)?;
                    println!(
                        "pair {a}-{b}: success in {} attempt(s), median reprojection {:.2} px",
                        result.attempts_used, result.median_reproj_px
                    );
                    Ok(())
                }
                Err(CalibError::CalibrationFailed {
                    attempts,
                    best_reproj_px,
                    best,
                }) => {
                    let report = PairReport::from_result(&best, a, b, &calib_cfg);
                    io::write_pair_report(&out, &report)?;
                    bail!(
                        "calibration failed after {attempts} attempts; best median \
                         reprojection {best_reproj_px:.2} px (report written to {})",
                        out.display()
                    );
                }
                Err(e) => Err(e.into()),
            }
        }
        CalibrateMode::Multi => {
            let input = MultiViewInput {
                frames: detections
                    .frames
                    .iter()
                    .map(|f| {
                        f.iter()
                            .map(|view| view.iter().map(Detections::pose).collect())
                            .collect()
                    })
                    .collect(),
                intrinsics: detections.views.iter().map(|v| v.intrinsics).collect(),
            };
            let result = calibrate_multiview(&input, &params, &skeleton, &calib_cfg)?;
            io::atomic_write(&out, &serde_json::to_vec_pretty(&result)?)?;
            let rig = RigFile::from_result(&result);
            let rig_out = rig_path
                .map(io::resolve_cache_path)
                .unwrap_or_else(|| out.with_extension("rig.json"));
            io::write_rig(&rig_out, &rig)?;
            println!(
                "rig of {} cameras: median reprojection {:.2} px -> {:.2} px after adjustment",
                result.rotations.len(),
                result.pre_ba_median_e2d_px,
                result.post_ba_median_e2d_px
            );
            Ok(())
        }
    }
}

/// Ground-truth relative transform between two rig cameras.
fn gt_relative(rig: &RigFile, a: usize, b: usize) -> (RotationSO3, Vector3<f64>) {
    let ra = rig.rotation(a).to_matrix();
    let rb = rig.rotation(b).to_matrix();
    let ca = Vector3::from(rig.cameras[a].position);
    let cb = Vector3::from(rig.cameras[b].position);
    let r_rel = rb * ra.transpose();
    // t_rel = t_b - R_rel t_a with t = -R C.
    let t_rel = -(rb * cb) + r_rel * (ra * ca);
    (
        RotationSO3::from_matrix(&r_rel).expect("gt rotation"),
        t_rel,
    )
}

/// Ground-truth correspondence pairs of one frame from labeled detections.
fn gt_pairs_for_frame(
    detections: &Detections,
    frame: usize,
    view_a: usize,
    view_b: usize,
) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    let fa = &detections.frames[frame][view_a];
    let fb = &detections.frames[frame][view_b];
    for (ia, ra) in fa.iter().enumerate() {
        let Some(ga) = ra.gt_instance else { continue };
        for (ib, rb) in fb.iter().enumerate() {
            if rb.gt_instance == Some(ga) {
                pairs.push((ia, ib));
            }
        }
    }
    pairs
}

fn pooled_precision(
    matches: &[MatchSet],
    frame_indices: &[usize],
    detections: &Detections,
    view_a: usize,
    view_b: usize,
) -> Option<f64> {
    let mut predicted = 0usize;
    let mut correct = 0usize;
    for (m, &fi) in matches.iter().zip(frame_indices) {
        if fi >= detections.frames.len() {
            continue;
        }
        let gt = gt_pairs_for_frame(detections, fi, view_a, view_b);
        for (ia, ib, _) in &m.pairs {
            predicted += 1;
            if gt.contains(&(*ia, *ib)) {
                correct += 1;
            }
        }
    }
    (predicted > 0).then(|| correct as f64 / predicted as f64)
}

fn cmd_evaluate(
    report_path: &Path,
    gt_path: &Path,
    detections_path: Option<&Path>,
    out_dir: &Path,
    config_path: Option<&Path>,
) -> Result<()> {
    let gt = io::read_rig(gt_path)?;
    let out_dir = io::resolve_cache_path(out_dir);
    std::fs::create_dir_all(&out_dir)?;
    let detections = detections_path.map(io::read_detections).transpose()?;
    let taus = match config_path {
        Some(p) => io::read_config(p)?.tau_deg,
        None => vec![20.0, 30.0],
    };

    // Identify the report flavor by its format field.
    let bytes = std::fs::read(report_path)
        .with_context(|| format!("reading {}", report_path.display()))?;
    let probe: serde_json::Value = serde_json::from_slice(&bytes)?;
    let format = probe
        .get("format")
        .and_then(|f| f.as_str())
        .unwrap_or_default()
        .to_string();

    let mut rows: Vec<MetricsRow> = Vec::new();
    let mut errors: Vec<PairPoseError> = Vec::new();
    let mut est_cams: Vec<(RotationSO3, Vector3<f64>)> = Vec::new();

    if format == "steercal-pair-report" {
        let report = io::read_pair_report(report_path)?;
        if report.view_a >= gt.cameras.len() || report.view_b >= gt.cameras.len() {
            bail!(
                "ground-truth rig has {} cameras, report references views {} and {}",
                gt.cameras.len(),
                report.view_a,
                report.view_b
            );
        }
        let (gt_rot, gt_t) = gt_relative(&gt, report.view_a, report.view_b);
        let est_rot = RotationSO3 {
            rodrigues: report.rotation_rodrigues,
        };
        let est_t = Vector3::from(report.translation_direction);
        let e_rot = rotation_error_deg(&est_rot, &gt_rot);
        let e_trans = translation_error_deg(&est_t, &gt_t).unwrap_or(180.0);
        let precision = detections.as_ref().and_then(|d| {
            pooled_precision(
                &report.matches,
                &report.frame_indices,
                d,
                report.view_a,
                report.view_b,
            )
        });
        rows.push(MetricsRow {
            pair: format!("{}-{}", report.view_a, report.view_b),
            e_rot_deg: e_rot,
            e_trans_deg: e_trans,
            median_reproj_px: report.median_reproj_px,
            precision,
        });
        errors.push(PairPoseError {
            e_rot_deg: e_rot,
            e_trans_deg: e_trans,
            median_reproj_px: report.median_reproj_px,
            match_precision: precision,
        });
        plot::plot_loss_trace(&out_dir.join("loss_trace.svg"), &report.loss_trace)?;
        // Camera plot in the gauge of view A.
        est_cams.push((RotationSO3::identity(), Vector3::zeros()));
        let est_center = -(est_rot.to_matrix().transpose() * est_t);
        est_cams.push((est_rot, est_center));
        let gt_center = -(gt_rot.to_matrix().transpose() * gt_t.normalize());
        plot::plot_camera_poses(
            &out_dir.join("camera_poses.svg"),
            &[
                (RotationSO3::identity(), Vector3::zeros()),
                (gt_rot, gt_center),
            ],
            &est_cams,
        )?;
    } else if format == "steercal-rig" || probe.get("rotations").is_some() {
        // A rig file or a raw multi-view report.
        let rig = if format == "steercal-rig" {
            io::read_rig(report_path)?
        } else {
            let result: MultiViewResult = serde_json::from_slice(&bytes)?;
            RigFile::from_result(&result)
        };
        if rig.cameras.len() != gt.cameras.len() {
            bail!(
                "camera count mismatch: estimate has {}, ground truth has {}",
                rig.cameras.len(),
                gt.cameras.len()
            );
        }
        let e2d = rig.post_ba_median_e2d_px.unwrap_or(f64::NAN);
        for a in 0..rig.cameras.len() {
            for b in (a + 1)..rig.cameras.len() {
                let (gt_rot, gt_t) = gt_relative(&gt, a, b);
                let (est_rot, est_t) = gt_relative(&rig, a, b);
                let e_rot = rotation_error_deg(&est_rot, &gt_rot);
                let e_trans = translation_error_deg(&est_t, &gt_t).unwrap_or(180.0);
                rows.push(MetricsRow {
                    pair: format!("{a}-{b}"),
                    e_rot_deg: e_rot,
                    e_trans_deg: e_trans,
                    median_reproj_px: e2d,
                    precision: None,
                });
                errors.push(PairPoseError {
                    e_rot_deg: e_rot,
                    e_trans_deg: e_trans,
                    median_reproj_px: e2d,
                    match_precision: None,
                });
            }
        }
        let gt_cams: Vec<(RotationSO3, Vector3<f64>)> = (0..gt.cameras.len())
            .map(|v| (gt.rotation(v), Vector3::from(gt.cameras[v].position)))
            .collect();
        let est: Vec<(RotationSO3, Vector3<f64>)> = (0..rig.cameras.len())
            .map(|v| (rig.rotation(v), Vector3::from(rig.cameras[v].position)))
            .collect();
        plot::plot_camera_poses(&out_dir.join("camera_poses.svg"), &gt_cams, &est)?;
    } else {
        bail!(
            "{}: unrecognized report format {format:?}",
            report_path.display()
        );
    }

    let mut summary: Vec<(String, f64)> = Vec::new();
    for tau in &taus {
        let (rra, rta, auc) = rra_rta_auc(&errors, *tau)?;
        summary.push((format!("rra@{tau:.0}"), rra));
        summary.push((format!("rta@{tau:.0}"), rta));
        summary.push((format!("auc@{tau:.0}"), auc));
    }
    let mean_rot = errors.iter().map(|e| e.e_rot_deg).sum::<f64>() / errors.len() as f64;
    let mean_trans = errors.iter().map(|e| e.e_trans_deg).sum::<f64>() / errors.len() as f64;
    summary.push(("mean_e_rot_deg".into(), mean_rot));
    summary.push(("mean_e_trans_deg".into(), mean_trans));
    let precisions: Vec<f64> = errors.iter().filter_map(|e| e.match_precision).collect();
    if !precisions.is_empty() {
        summary.push((
            "mean_precision".into(),
            precisions.iter().sum::<f64>() / precisions.len() as f64,
        ));
    }
    io::write_metrics_csv(&out_dir.join("metrics.csv"), &rows, &summary)?;
    for (name, value) in &summary {
        println!("{name} = {value:.4}");
    }
    println!("metrics written to {}", out_dir.join("metrics.csv").display());
    Ok(())
}

fn cmd_complete(
    checkpoint: &Path,
    detections_path: &Path,
    out: &Path,
    keep_visible: bool,
) -> Result<()> {
    let detections = io::read_detections(detections_path)?;
    let (params, skeleton) = load_model(checkpoint, &detections)?;
    let mut records = Vec::new();
    let mut skipped = 0usize;
    for frame in &detections.frames {
        for view in frame {
            for record in view {
                let pose_px = Detections::pose(record);
                let k = &detections.views[record.view].intrinsics;
                let normalized = steercal::camera::pixel_to_normalized(&pose_px, k);
                let completed = match normalize_pose_centric(&normalized) {
                    Ok((centric, norm)) => match complete_keypoints(&params, &centric, keep_visible)
                    {
                        Ok(done) => {
                            let denorm =
                                denormalize_pose_centric(&done, &norm, CoordFrame2D::Normalized);
                            Some(steercal::camera::normalized_to_pixel(&denorm, k))
                        }
                        Err(_) => None,
                    },
                    Err(_) => None,
                };
                match completed {
                    Some(pose) => records.push(DetectionRecord {
                        coords: pose.coords,
                        visible: pose.visible,
                        ..record.clone()
                    }),
                    None => {
                        skipped += 1;
                        records.push(record.clone());
                    }
                }
            }
        }
    }
    let out = io::resolve_cache_path(out);
    io::write_detections(&out, &skeleton, &detections.views, &records)?;
    println!(
        "completed {} records ({} kept unchanged) -> {}",
        records.len(),
        skipped,
        out.display()
    );
    Ok(())
}
