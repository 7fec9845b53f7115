//! Two-view calibration: joint inference-time optimization of the relative
//! rotation and the cross-view instance matching.
//!
//! Per iteration, every instance of view A is steered under the current
//! rotation and matched against view B (and symmetrically under the inverse
//! rotation), giving a bidirectional matching loss summed over the sampled
//! frame pairs. Once enough reliable mutual matches exist and 40% of the
//! iterations have passed, the translation-feasibility loss on the matched
//! keypoints joins in. Gradients flow to the three Rodrigues parameters
//! only; the network stays frozen. The translation is recovered afterwards
//! from the stacked system, checked by triangulation, and the whole attempt
//! is retried from a fresh random rotation if the reprojection gate fails.

pub mod multiview;

use nalgebra::Vector3;
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Dual3;
use crate::camera::{bearing, pixel_to_normalized, Intrinsics};
use crate::epipolar::{
    assemble_translation_system, assemble_translation_system_dual, geom_loss, median,
    recover_translation, triangulate,
};
use crate::matching::{
    extract_matches, matching_loss, similarity_matrix, sinkhorn_with_temperature, MatchSet,
    SteeredPose,
};
use crate::pose::{normalize_pose_centric, Pose2D};
use crate::rotation::{rodrigues_to_matrix_dual, RigidTransform, RotationSO3};
use crate::skeleton::Skeleton;
use crate::steerer::{BatchInput, SteererParams};
use crate::synth::derive_seed;

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("calibration failed after {attempts} attempts (best median reprojection {best_reproj_px:.2} px)")]
    CalibrationFailed {
        attempts: usize,
        best_reproj_px: f64,
        best: Box<TwoViewResult>,
    },
    #[error("skeleton mismatch: detections have {detections}, checkpoint has {checkpoint}")]
    SkeletonMismatch {
        detections: String,
        checkpoint: String,
    },
    #[error("no successful candidate to select from")]
    NoSuccessfulCandidate,
    #[error("camera pair graph is disconnected: camera {0} unreachable")]
    DisconnectedGraph(usize),
    #[error("steerer error: {0}")]
    Steerer(#[from] crate::steerer::SteererError),
    #[error("not enough data: {0}")]
    NotEnoughData(&'static str),
}

/// Settings of the inference-time optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibConfig {
    pub learning_rate: f64,
    pub n_iterations: usize,
    pub lr_start_factor: f64,
    pub lr_end_factor: f64,
    /// Fraction of iterations before the geometric loss can activate.
    pub geom_activation_fraction: f64,
    pub lambda_geom: f64,
    pub alpha: f64,
    pub max_attempts: usize,
    pub success_reproj_px: f64,
    /// Range of frame pairs sampled per optimization.
    pub n_frame_pairs: [usize; 2],
    pub sinkhorn_iterations: usize,
    /// Sharpness of the soft assignment. Log-similarities are divided by
    /// this before Sinkhorn normalization.
    pub sinkhorn_temperature: f64,
    pub dummy_score: f64,
    /// Weight bound of the reliability gate that enables the geometric loss.
    pub match_min_weight: f64,
    /// Weight bound for extracting hard matches (geometric-loss keypoints,
    /// translation recovery, triangulation).
    pub extract_min_weight: f64,
    /// Reliable-match gate: this many mutual matches enable the geometric loss.
    pub min_mutual_matches: usize,
    /// Feasibility-ratio bound for translation recovery.
    pub solvability_threshold: f64,
    /// Frame pairs entering each iteration's loss; None uses all sampled
    /// frames every iteration (the paper's regime).
    pub frames_per_iteration: Option<usize>,
    /// Stop an attempt once the rotation moved less than this many radians
    /// over the trailing 25 iterations; 0 disables.
    pub plateau_tolerance: f64,
    pub seed: u64,
}

impl Default for CalibConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            n_iterations: 1000,
            lr_start_factor: 1.0,
            lr_end_factor: 0.01,
            geom_activation_fraction: 0.4,
            lambda_geom: 1.0,
            alpha: 3.0,
            max_attempts: 5,
            success_reproj_px: 10.0,
            n_frame_pairs: [100, 120],
            sinkhorn_iterations: 100,
            sinkhorn_temperature: 0.4,
            dummy_score: 0.1,
            match_min_weight: 0.5,
            extract_min_weight: 0.25,
            min_mutual_matches: 2,
            solvability_threshold: 0.05,
            frames_per_iteration: None,
            plateau_tolerance: 0.0,
            seed: 0,
        }
    }
}

/// Detections of one camera pair: pixel-frame instance poses per frame.
#[derive(Debug, Clone)]
pub struct PairObservations {
    pub frames: Vec<(Vec<Pose2D>, Vec<Pose2D>)>,
    pub intrinsics_a: Intrinsics,
    pub intrinsics_b: Intrinsics,
}

/// Result of a two-view calibration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoViewResult {
    /// `x_b = R x_a + t`, translation unit-norm.
    pub relative_pose: RigidTransform,
    /// Hard matches per sampled frame pair.
    pub matches: Vec<MatchSet>,
    /// Indices of the sampled frame pairs.
    pub frame_indices: Vec<usize>,
    /// Per-iteration `(matching loss, geometric loss)` of the winning attempt.
    pub loss_trace: Vec<(f64, f64)>,
    pub success: bool,
    pub attempts_used: usize,
    #[serde(with = "crate::serde_util::nullable_f64")]
    pub median_reproj_px: f64,
}

/// One instance prepared for the optimization loop.
struct PreppedInstance {
    /// Pose-centric coordinates for steering and matching.
    centric: Pose2D,
    /// Unit bearings per joint (normalized camera coordinates).
    bearings: Vec<Option<Vector3<f64>>>,
    /// Normalized coordinates per joint for triangulation.
    normalized: Vec<Option<[f64; 2]>>,
}

struct PreppedFrame {
    a: Vec<PreppedInstance>,
    b: Vec<PreppedInstance>,
}

fn prep_instance(pose_px: &Pose2D, k: &Intrinsics) -> Option<PreppedInstance> {
    let normalized = pixel_to_normalized(pose_px, k);
    let (centric, _) = normalize_pose_centric(&normalized).ok()?;
    let bearings = (0..normalized.n_joints())
        .map(|j| normalized.visible[j].then(|| bearing(normalized.coords[j])))
        .collect();
    let coords = (0..normalized.n_joints())
        .map(|j| normalized.visible[j].then_some(normalized.coords[j]))
        .collect();
    Some(PreppedInstance {
        centric,
        bearings,
        normalized: coords,
    })
}

/// Steers a set of pose-centric instances in one batched forward pass.
///
/// `seed_sign` is +1 to differentiate with respect to the rotation itself
/// and -1 when steering by the inverse rotation.
fn steer_batch(
    steerer: &SteererParams,
    poses: &[&Pose2D],
    rodrigues: [f64; 3],
    seed_sign: f64,
    with_tangents: bool,
) -> Result<Vec<SteeredPose>, CalibError> {
    let n = steerer.config.n_joints;
    let b = poses.len();
    let coords = Array3::from_shape_fn((b, n, 2), |(bi, j, c)| poses[bi].coords[j][c]);
    let visible = Array2::from_shape_fn((b, n), |(bi, j)| poses[bi].visible[j]);
    let rod = Array2::from_shape_fn((b, 3), |(_, c)| rodrigues[c]);
    let seed = with_tangents.then(|| {
        Array3::from_shape_fn((b, 3, 3), |(_, r, c)| {
            if r == c {
                seed_sign
            } else {
                0.0
            }
        })
    });
    let out = steerer.forward_batch(&BatchInput {
        coords: &coords,
        visible: &visible,
        rodrigues: &rod,
        rot_tangent_seed: seed.as_ref(),
    })?;
    Ok((0..b)
        .map(|bi| SteeredPose {
            coords: (0..n)
                .map(|j| {
                    let mk = |c: usize| {
                        let t = out
                            .tangents
                            .as_ref()
                            .map(|ts| std::array::from_fn(|ch| ts[ch][(bi, j, c)]))
                            .unwrap_or([0.0; 3]);
                        Dual3::new(out.coords[(bi, j, c)], t)
                    };
                    [mk(0), mk(1)]
                })
                .collect(),
        })
        .collect())
}

/// Matched-keypoint bearing pairs of one frame under the given hard matches.
fn matched_bearings(
    frame: &PreppedFrame,
    matches: &MatchSet,
) -> Vec<(Vector3<f64>, Vector3<f64>)> {
    let mut out = Vec::new();
    for &(ia, ib, _) in &matches.pairs {
        let a = &frame.a[ia];
        let b = &frame.b[ib];
        for j in 0..a.bearings.len() {
            if let (Some(ua), Some(ub)) = (&a.bearings[j], &b.bearings[j]) {
                out.push((*ua, *ub));
            }
        }
    }
    out
}

/// Matched normalized-coordinate pairs of one frame for triangulation.
fn matched_normalized(
    frame: &PreppedFrame,
    matches: &MatchSet,
) -> Vec<([f64; 2], [f64; 2])> {
    let mut out = Vec::new();
    for &(ia, ib, _) in &matches.pairs {
        let a = &frame.a[ia];
        let b = &frame.b[ib];
        for j in 0..a.normalized.len() {
            if let (Some(na), Some(nb)) = (a.normalized[j], b.normalized[j]) {
                out.push((na, nb));
            }
        }
    }
    out
}

/// Steering, matching, and per-frame assignments for a rotation hypothesis.
struct MatchingPass {
    loss: Dual3,
    /// Forward-direction hard matches per frame.
    matches: Vec<MatchSet>,
    n_mutual: usize,
}

fn matching_pass(
    frames: &[&PreppedFrame],
    steerer: &SteererParams,
    rodrigues: [f64; 3],
    config: &CalibConfig,
    with_tangents: bool,
) -> Result<MatchingPass, CalibError> {
    // Batch all steered poses of both directions in two forward passes.
    let fwd_inputs: Vec<&Pose2D> = frames
        .iter()
        .flat_map(|f| f.a.iter().map(|i| &i.centric))
        .collect();
    let bwd_inputs: Vec<&Pose2D> = frames
        .iter()
        .flat_map(|f| f.b.iter().map(|i| &i.centric))
        .collect();
    let inv = [-rodrigues[0], -rodrigues[1], -rodrigues[2]];
    let steered_fwd = steer_batch(steerer, &fwd_inputs, rodrigues, 1.0, with_tangents)?;
    let steered_bwd = steer_batch(steerer, &bwd_inputs, inv, -1.0, with_tangents)?;

    let mut loss = Dual3::constant(0.0);
    let mut matches = Vec::with_capacity(frames.len());
    let mut n_mutual = 0usize;
    let mut off_f = 0usize;
    let mut off_b = 0usize;
    for frame in frames {
        let na = frame.a.len();
        let nb = frame.b.len();
        let q_fwd = &steered_fwd[off_f..off_f + na];
        let q_bwd = &steered_bwd[off_b..off_b + nb];
        off_f += na;
        off_b += nb;
        if na == 0 || nb == 0 {
            matches.push(MatchSet::default());
            continue;
        }
        let obs_b: Vec<Pose2D> = frame.b.iter().map(|i| i.centric.clone()).collect();
        let obs_a: Vec<Pose2D> = frame.a.iter().map(|i| i.centric.clone()).collect();
        let sim_fwd = similarity_matrix(q_fwd, &obs_b, config.alpha)
            .map_err(|_| CalibError::NotEnoughData("no jointly visible joints"))?;
        let sim_bwd = similarity_matrix(q_bwd, &obs_a, config.alpha)
            .map_err(|_| CalibError::NotEnoughData("no jointly visible joints"))?;
        let assign_fwd = sinkhorn_with_temperature(
            &sim_fwd,
            config.dummy_score,
            config.sinkhorn_iterations,
            config.sinkhorn_temperature,
        );
        let assign_bwd = sinkhorn_with_temperature(
            &sim_bwd,
            config.dummy_score,
            config.sinkhorn_iterations,
            config.sinkhorn_temperature,
        );
        loss += (matching_loss(&assign_fwd, &sim_fwd) + matching_loss(&assign_bwd, &sim_bwd))
            * 0.5;
        // Reliable matches (gate) versus usable hard matches (geometry).
        let reliable = extract_matches(&assign_fwd, config.match_min_weight, true);
        n_mutual += reliable.pairs.len();
        let hard = extract_matches(&assign_fwd, config.extract_min_weight, true);
        matches.push(hard);
    }
    Ok(MatchingPass {
        loss,
        matches,
        n_mutual,
    })
}

/// Adam over the three rotation parameters.
struct RotAdam {
    m: [f64; 3],
    v: [f64; 3],
    step: u64,
}

impl RotAdam {
    fn new() -> Self {
        Self {
            m: [0.0; 3],
            v: [0.0; 3],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64; 3], grad: [f64; 3], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.step += 1;
        let b1c = 1.0 - B1.powi(self.step as i32);
        let b2c = 1.0 - B2.powi(self.step as i32);
        for i in 0..3 {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / b1c) / ((self.v[i] / b2c).sqrt() + EPS);
        }
    }
}

struct AttemptOutcome {
    result: TwoViewResult,
}

/// One optimization attempt from a given initial rotation.
fn run_attempt(
    frames: &[PreppedFrame],
    frame_indices: &[usize],
    steerer: &SteererParams,
    config: &CalibConfig,
    init: RotationSO3,
    intrinsics: (&Intrinsics, &Intrinsics),
) -> Result<AttemptOutcome, CalibError> {
    let mut rod = init.rodrigues;
    let mut adam = RotAdam::new();
    let mut trace = Vec::with_capacity(config.n_iterations);
    let gate_iter =
        (config.n_iterations as f64 * config.geom_activation_fraction).floor() as usize;
    let mut frame_rng = ChaCha8Rng::seed_from_u64(derive_seed(
        config.seed,
        0xf7a0_0000 ^ init.rodrigues[0].to_bits(),
    ));
    let mut recent: std::collections::VecDeque<[f64; 3]> = std::collections::VecDeque::new();

    for iter in 0..config.n_iterations {
        let t = if config.n_iterations > 1 {
            iter as f64 / (config.n_iterations - 1) as f64
        } else {
            0.0
        };
        let lr = config.learning_rate
            * (config.lr_start_factor + t * (config.lr_end_factor - config.lr_start_factor));

        // Optional stochastic frame subset for this iteration's gradient.
        let subset: Vec<usize> = match config.frames_per_iteration {
            Some(k) if k < frames.len() => {
                use rand::seq::index::sample;
                let mut idx = sample(&mut frame_rng, frames.len(), k).into_vec();
                idx.sort_unstable();
                idx
            }
            _ => (0..frames.len()).collect(),
        };
        let iter_frames: Vec<&PreppedFrame> = subset.iter().map(|&i| &frames[i]).collect();
        let pass = matching_pass(&iter_frames, steerer, rod, config, true)?;
        let mut total = pass.loss;
        let mut geom_value = 0.0;
        if iter >= gate_iter && pass.n_mutual >= config.min_mutual_matches {
            let dual_rod: [Dual3; 3] =
                std::array::from_fn(|i| Dual3::variable(rod[i], i));
            let dual_r = rodrigues_to_matrix_dual(&dual_rod);
            let mut geom = Dual3::constant(0.0);
            let mut n_frames_geom = 0usize;
            for (frame, m) in iter_frames.iter().zip(&pass.matches) {
                let pairs = matched_bearings(frame, m);
                if pairs.len() < 2 {
                    continue;
                }
                if let Ok(sys) = assemble_translation_system_dual(&pairs, &dual_r) {
                    if let Ok(l) = geom_loss(&sys) {
                        geom += l;
                        n_frames_geom += 1;
                    }
                }
            }
            if n_frames_geom > 0 {
                let geom_mean = geom / n_frames_geom as f64;
                geom_value = geom_mean.value;
                total += geom_mean * config.lambda_geom;
            }
        }
        trace.push((pass.loss.value, geom_value));
        adam.update(&mut rod, total.tangent, lr);
        if !rod.iter().all(|v| v.is_finite()) {
            break;
        }
        // Keep the parameter inside the canonical ball the network was
        // trained on; beyond it the steerer extrapolates arbitrarily.
        let angle = (rod[0] * rod[0] + rod[1] * rod[1] + rod[2] * rod[2]).sqrt();
        if angle > std::f64::consts::PI {
            let wrapped = RotationSO3 { rodrigues: rod }.canonical().rodrigues;
            rod = wrapped;
        }
        if config.plateau_tolerance > 0.0 {
            recent.push_back(rod);
            if recent.len() > 25 {
                let old = recent.pop_front().unwrap();
                let moved = (0..3)
                    .map(|i| (rod[i] - old[i]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if iter > gate_iter && moved < config.plateau_tolerance {
                    break;
                }
            }
        }
    }

    // Final hard matches under the optimized rotation, over every frame.
    let rotation = RotationSO3 { rodrigues: rod }.canonical();
    let all_frames: Vec<&PreppedFrame> = frames.iter().collect();
    let final_pass = matching_pass(&all_frames, steerer, rotation.rodrigues, config, false)?;
    let r_mat = rotation.to_matrix();

    // Translation from the stacked system over all matched keypoints.
    let mut all_bearings = Vec::new();
    for (frame, m) in frames.iter().zip(&final_pass.matches) {
        all_bearings.extend(matched_bearings(frame, m));
    }
    let recovered = if all_bearings.len() >= 2 {
        assemble_translation_system(&all_bearings, &r_mat)
            .ok()
            .and_then(|sys| recover_translation(&sys, config.solvability_threshold).ok())
    } else {
        None
    };

    let (translation, median_px) = match recovered {
        Some(rec) => {
            let pose_a = RigidTransform::identity();
            let pose_b = RigidTransform::new(rotation, rec.translation.into());
            let mut residuals = Vec::new();
            for (frame, m) in frames.iter().zip(&final_pass.matches) {
                let corr = matched_normalized(frame, m);
                if corr.is_empty() {
                    continue;
                }
                if let Ok(points) =
                    triangulate(&pose_a, &pose_b, &corr, Some(intrinsics))
                {
                    for p in points {
                        for r in p.residual {
                            if r.is_finite() {
                                residuals.push(r);
                            }
                        }
                    }
                }
            }
            (rec.translation, median(&residuals))
        }
        None => (Vector3::zeros(), f64::INFINITY),
    };

    let success = median_px < config.success_reproj_px;
    Ok(AttemptOutcome {
        result: TwoViewResult {
            relative_pose: RigidTransform::new_scale_free(rotation, translation.into()),
            matches: final_pass.matches,
            frame_indices: frame_indices.to_vec(),
            loss_trace: trace,
            success,
            attempts_used: 0,
            median_reproj_px: median_px,
        },
    })
}

fn check_skeleton(
    skeleton: &Skeleton,
    steerer: &SteererParams,
) -> Result<(), CalibError> {
    let hash = skeleton.hash();
    if hash != steerer.skeleton_hash {
        return Err(CalibError::SkeletonMismatch {
            detections: hash,
            checkpoint: steerer.skeleton_hash.clone(),
        });
    }
    if skeleton.n_joints() != steerer.config.n_joints {
        return Err(CalibError::SkeletonMismatch {
            detections: format!("{} joints", skeleton.n_joints()),
            checkpoint: format!("{} joints", steerer.config.n_joints),
        });
    }
    Ok(())
}

/// Calibrates a camera pair from per-frame 2D pose detections.
///
/// The steerer stays frozen; on reprojection-gate failure the optimization
/// restarts from a fresh random rotation, up to `max_attempts` times. The
/// error case still carries the best attempt for reporting.
pub fn calibrate_pair(
    obs: &PairObservations,
    steerer: &SteererParams,
    skeleton: &Skeleton,
    config: &CalibConfig,
) -> Result<TwoViewResult, CalibError> {
    check_skeleton(skeleton, steerer)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x7061_6972));

    // Sample the frame pairs this optimization will see.
    let [lo, hi] = config.n_frame_pairs;
    let n_frames = obs.frames.len();
    if n_frames == 0 {
        return Err(CalibError::NotEnoughData("no frames"));
    }
    let want = if n_frames <= lo {
        n_frames
    } else {
        rng.random_range(lo..=hi.min(n_frames))
    };
    let mut frame_indices: Vec<usize> = (0..n_frames).collect();
    if want < n_frames {
        use rand::seq::SliceRandom;
        frame_indices.shuffle(&mut rng);
        frame_indices.truncate(want);
        frame_indices.sort_unstable();
    }

    let frames: Vec<PreppedFrame> = frame_indices
        .iter()
        .map(|&fi| {
            let (a, b) = &obs.frames[fi];
            PreppedFrame {
                a: a.iter()
                    .filter_map(|p| prep_instance(p, &obs.intrinsics_a))
                    .collect(),
                b: b.iter()
                    .filter_map(|p| prep_instance(p, &obs.intrinsics_b))
                    .collect(),
            }
        })
        .collect();
    if frames.iter().all(|f| f.a.is_empty() || f.b.is_empty()) {
        return Err(CalibError::NotEnoughData("no frame with instances in both views"));
    }

    let mut best: Option<TwoViewResult> = None;
    for attempt in 1..=config.max_attempts {
        let mut attempt_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0xa77e_0000 + attempt as u64));
        let init = RotationSO3::random_uniform(&mut attempt_rng);
        let outcome = run_attempt(
            &frames,
            &frame_indices,
            steerer,
            config,
            init,
            (&obs.intrinsics_a, &obs.intrinsics_b),
        )?;
        let mut result = outcome.result;
        result.attempts_used = attempt;
        let better = best
            .as_ref()
            .map_or(true, |b| result.median_reproj_px < b.median_reproj_px);
        if better {
            best = Some(result.clone());
        }
        if result.success {
            return Ok(result);
        }
    }
    let best = best.expect("at least one attempt ran");
    Err(CalibError::CalibrationFailed {
        attempts: config.max_attempts,
        best_reproj_px: best.median_reproj_px,
        best: Box::new(best),
    })
}

/// Evaluates a fixed relative pose on a set of frames: matches under the
/// rotation, triangulates, and reports the median pixel reprojection error.
pub fn evaluate_pose_on_frames(
    pose: &RigidTransform,
    obs: &PairObservations,
    steerer: &SteererParams,
    config: &CalibConfig,
) -> Result<(f64, Vec<MatchSet>), CalibError> {
    let frames: Vec<PreppedFrame> = obs
        .frames
        .iter()
        .map(|(a, b)| PreppedFrame {
            a: a.iter()
                .filter_map(|p| prep_instance(p, &obs.intrinsics_a))
                .collect(),
            b: b.iter()
                .filter_map(|p| prep_instance(p, &obs.intrinsics_b))
                .collect(),
        })
        .collect();
    let frame_refs: Vec<&PreppedFrame> = frames.iter().collect();
    let pass = matching_pass(&frame_refs, steerer, pose.rotation.rodrigues, config, false)?;
    let pose_a = RigidTransform::identity();
    let pose_b = RigidTransform::new(pose.rotation, pose.translation);
    let mut residuals = Vec::new();
    for (frame, m) in frames.iter().zip(&pass.matches) {
        let corr = matched_normalized(frame, m);
        if corr.is_empty() {
            continue;
        }
        if let Ok(points) = triangulate(
            &pose_a,
            &pose_b,
            &corr,
            Some((&obs.intrinsics_a, &obs.intrinsics_b)),
        ) {
            for p in points {
                for r in p.residual {
                    if r.is_finite() {
                        residuals.push(r);
                    }
                }
            }
        }
    }
    Ok((median(&residuals), pass.matches))
}

/// Picks the candidate with the lowest median reprojection error over the
/// full frame set; ties break on attempt count, then candidate order.
pub fn select_best_pair_solution(
    candidates: &[TwoViewResult],
    obs: &PairObservations,
    steerer: &SteererParams,
    config: &CalibConfig,
) -> Result<TwoViewResult, CalibError> {
    let successful: Vec<(usize, &TwoViewResult)> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.success)
        .collect();
    if successful.is_empty() {
        return Err(CalibError::NoSuccessfulCandidate);
    }
    let mut scored: Vec<(f64, usize, usize)> = Vec::new();
    for (idx, cand) in &successful {
        let (med, _) = evaluate_pose_on_frames(&cand.relative_pose, obs, steerer, config)?;
        scored.push((med, cand.attempts_used, *idx));
    }
    scored.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let (med, _, idx) = scored[0];
    let mut winner = candidates[idx].clone();
    winner.median_reproj_px = med;
    Ok(winner)
}
