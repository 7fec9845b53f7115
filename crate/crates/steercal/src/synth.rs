//! Synthetic data generation: supervised training pairs from 3D poses,
//! procedural quadruped poses, and noisy multi-view detection scenes for
//! calibration evaluation.
//!
//! Training pairs are orthographic projections of a 3D pose under two
//! sampled camera rotations plus the relative rotation between them, all in
//! pose-centric coordinates. Every generator is a pure function of its
//! inputs and seed.

use nalgebra::{Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{project, CameraModel, Intrinsics};
use crate::pose::{normalize_pose_centric, CoordFrame2D, CoordFrame3D, Pose2D, Pose3D};
use crate::rotation::{RigidTransform, RotationSO3};
use crate::skeleton::{quadruped_skeleton, Skeleton};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    BadRatios([f64; 3]),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

/// Derives an independent stream seed from a base seed and a tag.
///
/// SplitMix64 finalizer; used everywhere a task needs its own rng.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One supervised example: a source pose, the same pose seen after a
/// relative camera rotation, and that rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub source: Pose2D,
    pub target: Pose2D,
    pub relative_rotation: RotationSO3,
    pub pose_id: usize,
}

/// Train/val/test partition of generated pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<TrainingPair>,
    pub val: Vec<TrainingPair>,
    pub test: Vec<TrainingPair>,
    pub ratios: [f64; 3],
}

/// Units of the keypoint noise standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseUnits {
    PoseCentric,
    Pixel,
}

/// Occlusion masking and keypoint noise applied to training sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    pub mask_fraction_range: [f64; 2],
    pub keypoint_noise_std: f64,
    pub noise_units: NoiseUnits,
    pub rng_seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            mask_fraction_range: [0.1, 0.3],
            keypoint_noise_std: 0.03,
            noise_units: NoiseUnits::PoseCentric,
            rng_seed: 0,
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let [lo, hi] = self.mask_fraction_range;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(SynthError::EmptyInput("mask_fraction_range out of order"));
        }
        Ok(())
    }
}

/// `n` unit vectors on the upper hemisphere along the Fibonacci spiral.
pub fn fibonacci_hemisphere(n: usize) -> Vec<Vector3<f64>> {
    assert!(n >= 1);
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// World-to-camera rotation for a camera at `position` looking at the origin
/// with the optical axis on +z.
///
/// Handedness: rows are the camera x/y/z axes; the up hint is world +z,
/// falling back to +y near the poles. A camera at `(0,0,1)` therefore maps
/// world +z to camera -z.
pub fn look_at_rotation(position: &Vector3<f64>) -> RotationSO3 {
    let z_cam = (-position).normalize();
    let up = if z_cam.z.abs() > 0.999 {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let x_cam = up.cross(&z_cam).normalize();
    let y_cam = z_cam.cross(&x_cam);
    let m = Matrix3::from_rows(&[x_cam.transpose(), y_cam.transpose(), z_cam.transpose()]);
    RotationSO3::from_matrix(&m).expect("look-at basis is orthonormal")
}

/// How roll angles around the optical axis are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RollMode {
    /// Uniform random in `[0, 2pi)` (default).
    Random,
    /// Even grid of `n_rolls` angles.
    Grid,
}

/// Samples `n_views * n_rolls` world-to-camera rotations: hemisphere
/// viewpoints looking at the origin, each with `n_rolls` rolls about the
/// optical axis.
pub fn sample_camera_set(
    n_views: usize,
    n_rolls: usize,
    mode: RollMode,
    seed: u64,
) -> Vec<RotationSO3> {
    assert!(n_views >= 1 && n_rolls >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x6361_6d73));
    let mut out = Vec::with_capacity(n_views * n_rolls);
    for dir in fibonacci_hemisphere(n_views) {
        let base = look_at_rotation(&dir);
        for r in 0..n_rolls {
            let roll = match mode {
                RollMode::Random => rng.random_range(0.0..std::f64::consts::TAU),
                RollMode::Grid => std::f64::consts::TAU * r as f64 / n_rolls as f64,
            };
            let rz = RotationSO3::new([0.0, 0.0, roll]);
            out.push(rz.compose(&base));
        }
    }
    out
}

/// Orthographic pose-centric projection of a world pose under a camera
/// rotation. Returns `None` for degenerate (collinear-to-axis) projections.
pub fn project_pose_centric(pose: &Pose3D, cam: &RotationSO3) -> Option<Pose2D> {
    let m = cam.to_matrix();
    let coords: Vec<[f64; 2]> = (0..pose.n_joints())
        .map(|i| {
            let p = m * pose.joint(i);
            [p.x, p.y]
        })
        .collect();
    let p2 = Pose2D::new(coords, pose.visible.clone(), CoordFrame2D::Normalized);
    normalize_pose_centric(&p2).ok().map(|(q, _)| q)
}

/// Random (pose, camera pair) samples projected to pose-centric 2D with the
/// relative rotation between the two cameras.
pub fn generate_training_pairs(
    poses3d: &[Pose3D],
    cameras: &[RotationSO3],
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<TrainingPair>, SynthError> {
    if poses3d.is_empty() {
        return Err(SynthError::EmptyInput("poses3d"));
    }
    if cameras.is_empty() {
        return Err(SynthError::EmptyInput("cameras"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7061_6972));
    let mut out = Vec::with_capacity(n_pairs);
    while out.len() < n_pairs {
        let pose_id = rng.random_range(0..poses3d.len());
        let a = rng.random_range(0..cameras.len());
        let b = rng.random_range(0..cameras.len());
        let (Some(source), Some(target)) = (
            project_pose_centric(&poses3d[pose_id], &cameras[a]),
            project_pose_centric(&poses3d[pose_id], &cameras[b]),
        ) else {
            continue;
        };
        out.push(TrainingPair {
            source,
            target,
            relative_rotation: cameras[b].compose(&cameras[a].inverse()),
            pose_id,
        });
    }
    Ok(out)
}

/// Shuffles and partitions pairs into disjoint train/val/test splits.
pub fn split_dataset(
    pairs: Vec<TrainingPair>,
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitDataset, SynthError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|&r| r <= 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(SynthError::BadRatios(ratios));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7370_6c74));
    let mut pairs = pairs;
    pairs.shuffle(&mut rng);
    let n = pairs.len();
    let n_train = (n as f64 * ratios[0]).round() as usize;
    let n_val = ((n as f64 * ratios[1]).round() as usize).min(n - n_train);
    let rest = pairs.split_off(n_train);
    let (val, test) = {
        let mut rest = rest;
        let test = rest.split_off(n_val.min(rest.len()));
        (rest, test)
    };
    Ok(SplitDataset {
        train: pairs,
        val,
        test,
        ratios,
    })
}

/// Masks a random fraction of source joints and adds Gaussian noise to the
/// visible source coordinates. The target is untouched.
pub fn augment<R: Rng>(pair: &TrainingPair, cfg: &AugmentationConfig, rng: &mut R) -> TrainingPair {
    let [lo, hi] = cfg.mask_fraction_range;
    let n = pair.source.n_joints();
    let fraction = if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    };
    let n_mask = (fraction * n as f64).round() as usize;
    let mut visible = pair.source.visible.clone();
    let visible_idx: Vec<usize> = (0..n).filter(|&i| visible[i]).collect();
    // Never mask below the two visible joints normalization needs.
    let n_mask = n_mask.min(visible_idx.len().saturating_sub(2));
    let mut idx = visible_idx;
    idx.shuffle(rng);
    for &i in idx.iter().take(n_mask) {
        visible[i] = false;
    }
    let mut coords = pair.source.coords.clone();
    if cfg.keypoint_noise_std > 0.0 {
        let normal = Normal::new(0.0, cfg.keypoint_noise_std).expect("std >= 0");
        for (i, c) in coords.iter_mut().enumerate() {
            if visible[i] {
                c[0] += normal.sample(rng);
                c[1] += normal.sample(rng);
            }
        }
    }
    TrainingPair {
        source: Pose2D::new(coords, visible, pair.source.frame),
        target: pair.target.clone(),
        relative_rotation: pair.relative_rotation,
        pose_id: pair.pose_id,
    }
}

/// Seeded convenience wrapper over [`augment`] using the config seed.
pub fn augment_with_seed(pair: &TrainingPair, cfg: &AugmentationConfig) -> TrainingPair {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, pair.pose_id as u64));
    augment(pair, cfg, &mut rng)
}

// ── Procedural quadruped sampler ─────────────────────────────────────────────

struct Bone {
    child: usize,
    parent: usize,
    rest_dir: Vector3<f64>,
    length: f64,
    max_swing: f64,
}

fn quadruped_bones() -> Vec<Bone> {
    let b = |child: usize, parent: usize, d: [f64; 3], length: f64, max_swing: f64| Bone {
        child,
        parent,
        rest_dir: Vector3::new(d[0], d[1], d[2]).normalize(),
        length,
        max_swing,
    };
    vec![
        b(1, 0, [1.0, 0.0, 0.05], 0.25, 0.3),    // spine_mid
        b(2, 1, [1.0, 0.0, 0.05], 0.25, 0.3),    // chest
        b(3, 2, [0.8, 0.0, 0.6], 0.15, 0.5),     // neck
        b(4, 3, [0.9, 0.0, 0.44], 0.12, 0.5),    // head
        b(5, 0, [-0.95, 0.0, 0.3], 0.25, 0.6),   // tail_tip
        b(6, 2, [0.1, 0.6, -0.79], 0.2, 0.7),    // lf_upper
        b(7, 6, [0.0, 0.1, -1.0], 0.2, 0.7),     // lf_paw
        b(8, 2, [0.1, -0.6, -0.79], 0.2, 0.7),   // rf_upper
        b(9, 8, [0.0, -0.1, -1.0], 0.2, 0.7),    // rf_paw
        b(10, 0, [-0.1, 0.6, -0.79], 0.2, 0.7),  // lh_upper
        b(11, 10, [0.0, 0.1, -1.0], 0.2, 0.7),   // lh_paw
        b(12, 0, [-0.1, -0.6, -0.79], 0.2, 0.7), // rh_upper
        b(13, 12, [0.0, -0.1, -1.0], 0.2, 0.7),  // rh_paw
        b(14, 4, [0.15, 0.65, 0.74], 0.1, 0.45), // left_ear
        b(15, 4, [0.15, -0.65, 0.74], 0.1, 0.45), // right_ear
    ]
}

/// Rotates `dir` by a random axis-angle with angle uniform in `[0, max_swing]`.
fn swing<R: Rng>(dir: &Vector3<f64>, max_swing: f64, rng: &mut R) -> Vector3<f64> {
    let axis: Vector3<f64> = loop {
        let v = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        if v.norm() > 1e-6 {
            break v.normalize();
        }
    };
    let angle: f64 = rng.random_range(0.0..max_swing);
    let r = crate::rotation::rodrigues_to_matrix(&(axis * angle));
    r * dir
}

/// Samples `n` world-frame quadruped poses over the fixed 16-joint skeleton.
///
/// Bone lengths are constant; joint angles are drawn from bounded ranges so
/// every pose is non-degenerate and genuinely three-dimensional.
pub fn procedural_quadruped_poses(n: usize, seed: u64) -> Vec<Pose3D> {
    assert!(n >= 1);
    let bones = quadruped_bones();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7175_6164));
    (0..n)
        .map(|_| {
            let mut coords = vec![[0.0f64; 3]; 16];
            for bone in &bones {
                let dir = swing(&bone.rest_dir, bone.max_swing, &mut rng);
                let parent = Vector3::from(coords[bone.parent]);
                let joint = parent + dir * bone.length;
                coords[bone.child] = [joint.x, joint.y, joint.z];
            }
            // Center at the centroid so cameras aimed at the origin frame it.
            let c: Vector3<f64> = coords
                .iter()
                .map(|p| Vector3::new(p[0], p[1], p[2]))
                .sum::<Vector3<f64>>()
                / 16.0;
            for p in coords.iter_mut() {
                p[0] -= c.x;
                p[1] -= c.y;
                p[2] -= c.z;
            }
            Pose3D::fully_visible(coords, CoordFrame3D::World)
        })
        .collect()
}

// ── Synthetic calibration scenes ─────────────────────────────────────────────

/// Configuration of a noisy multi-view detection scene.
///
/// Ground-truth 3D poses are placed in the world, projected into perspective
/// views aimed at the scene center, and perturbed by Gaussian pixel noise,
/// mirroring the synthetic evaluation protocol the toolkit is tested with.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub n_views: usize,
    pub n_instances: usize,
    pub n_frames: usize,
    /// Azimuths of the cameras in degrees; empty means evenly spaced.
    pub camera_azimuths_deg: Vec<f64>,
    pub camera_distance: f64,
    pub camera_elevation: f64,
    pub focal_px: f64,
    pub image_size_px: f64,
    pub noise_px_std: f64,
    /// Radius of the disc instances are scattered over.
    pub instance_spread: f64,
    /// Uniform scale applied to every instance pose.
    pub instance_scale: f64,
    /// Half-width of the per-instance relative size variation; each
    /// instance's scale is drawn once from `1 +- this` and kept across
    /// frames, mimicking subjects of different sizes.
    pub instance_scale_jitter: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_views: 2,
            n_instances: 4,
            n_frames: 8,
            camera_azimuths_deg: Vec::new(),
            camera_distance: 5.0,
            camera_elevation: 1.5,
            focal_px: 1000.0,
            image_size_px: 1000.0,
            noise_px_std: 3.0,
            instance_spread: 0.8,
            instance_scale: 1.0,
            instance_scale_jitter: 0.2,
            seed: 0,
        }
    }
}

/// One detected instance in one view of one frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceDetection {
    pub pose_px: Pose2D,
    /// Ground-truth instance identity (hidden from the calibrator).
    pub gt_instance: usize,
}

/// Per-frame detections: `views[v]` lists the instances seen in view `v`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameDetections {
    pub views: Vec<Vec<InstanceDetection>>,
}

/// A rendered scene: ground-truth cameras, per-frame detections, and the
/// ground-truth world poses behind them.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub skeleton: Skeleton,
    pub cameras: Vec<CameraModel>,
    pub frames: Vec<FrameDetections>,
    pub gt_world_poses: Vec<Vec<Pose3D>>,
}

impl SyntheticScene {
    /// Ground-truth relative transform from view `a` to view `b`
    /// (`x_b = R x_a + t`), with unit-norm translation.
    pub fn gt_relative(&self, a: usize, b: usize) -> RigidTransform {
        let ra = self.cameras[a].pose.rotation.to_matrix();
        let rb = self.cameras[b].pose.rotation.to_matrix();
        let ta = Vector3::from(self.cameras[a].pose.translation);
        let tb = Vector3::from(self.cameras[b].pose.translation);
        let r_rel = rb * ra.transpose();
        let t_rel = tb - r_rel * ta;
        RigidTransform::new_scale_free(
            RotationSO3::from_matrix(&r_rel).expect("relative rotation"),
            t_rel.into(),
        )
    }
}

/// Renders a scene per the config; deterministic given the seed.
pub fn render_scene(cfg: &SceneConfig) -> SyntheticScene {
    let skeleton = quadruped_skeleton();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x7363_656e));
    let azimuths: Vec<f64> = if cfg.camera_azimuths_deg.is_empty() {
        (0..cfg.n_views)
            .map(|v| 360.0 * v as f64 / cfg.n_views as f64)
            .collect()
    } else {
        cfg.camera_azimuths_deg.clone()
    };
    assert_eq!(azimuths.len(), cfg.n_views, "one azimuth per view");
    let intr = Intrinsics {
        fx: cfg.focal_px,
        fy: cfg.focal_px,
        cx: cfg.image_size_px / 2.0,
        cy: cfg.image_size_px / 2.0,
    };
    let cameras: Vec<CameraModel> = azimuths
        .iter()
        .enumerate()
        .map(|(v, az)| {
            let a = az.to_radians();
            // Per-view elevation jitter keeps multi-camera rigs off a common plane.
            let elev = cfg.camera_elevation * (1.0 + 0.15 * ((v as f64 * 2.399) % 1.0));
            let pos = Vector3::new(
                cfg.camera_distance * a.cos(),
                cfg.camera_distance * a.sin(),
                elev,
            );
            let rot = look_at_rotation(&pos);
            let t = -(rot.to_matrix() * pos);
            CameraModel::perspective(intr, RigidTransform::new(rot, t.into()))
        })
        .collect();

    let noise = Normal::new(0.0, cfg.noise_px_std.max(0.0)).expect("std >= 0");
    let instance_sizes: Vec<f64> = (0..cfg.n_instances)
        .map(|_| {
            let j = cfg.instance_scale_jitter.clamp(0.0, 0.9);
            cfg.instance_scale * (1.0 + rng.random_range(-j..=j))
        })
        .collect();
    let mut frames = Vec::with_capacity(cfg.n_frames);
    let mut gt_world_poses = Vec::with_capacity(cfg.n_frames);
    for _ in 0..cfg.n_frames {
        let base = procedural_quadruped_poses(cfg.n_instances, rng.random());
        let placed: Vec<Pose3D> = base
            .iter()
            .enumerate()
            .map(|(inst, pose)| {
                let yaw = rng.random_range(0.0..std::f64::consts::TAU);
                let rz = crate::rotation::rodrigues_to_matrix(&Vector3::new(0.0, 0.0, yaw));
                let radius = cfg.instance_spread * rng.random_range(0.0..1.0f64).sqrt();
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                let offset = Vector3::new(radius * theta.cos(), radius * theta.sin(), 0.0);
                let coords = pose
                    .coords
                    .iter()
                    .map(|c| {
                        let p = rz * Vector3::new(c[0], c[1], c[2]) * instance_sizes[inst] + offset;
                        [p.x, p.y, p.z]
                    })
                    .collect();
                Pose3D::fully_visible(coords, CoordFrame3D::World)
            })
            .collect();

        let mut views = Vec::with_capacity(cfg.n_views);
        for cam in &cameras {
            let mut dets: Vec<InstanceDetection> = placed
                .iter()
                .enumerate()
                .map(|(i, pose)| {
                    let cam_pose = cam.to_camera_frame(pose);
                    let mut px = project(&cam_pose, cam).expect("scene within view");
                    for c in px.coords.iter_mut() {
                        c[0] += noise.sample(&mut rng);
                        c[1] += noise.sample(&mut rng);
                    }
                    InstanceDetection {
                        pose_px: px,
                        gt_instance: i,
                    }
                })
                .collect();
            dets.shuffle(&mut rng);
            views.push(dets);
        }
        frames.push(FrameDetections { views });
        gt_world_poses.push(placed);
    }
    SyntheticScene {
        skeleton,
        cameras,
        frames,
        gt_world_poses,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_fibonacci_point_sits_at_half_height() {
        let v = fibonacci_hemisphere(1);
        assert_eq!(v.len(), 1);
        assert_relative_eq!(v[0].z, 0.5);
        assert_relative_eq!(v[0].norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hemisphere_points_are_unit_and_upper() {
        let vs = fibonacci_hemisphere(100);
        for v in &vs {
            assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-12);
            assert!(v.z >= 0.0 && v.z <= 1.0);
        }
    }

    #[test]
    fn hemisphere_separation_is_near_uniform_packing() {
        let vs = fibonacci_hemisphere(100);
        let mut min_angle = f64::INFINITY;
        for i in 0..vs.len() {
            for j in (i + 1)..vs.len() {
                let a = vs[i].dot(&vs[j]).clamp(-1.0, 1.0).acos();
                min_angle = min_angle.min(a);
            }
        }
        assert!(min_angle > 0.0);
        // Uniform packing of n caps on a hemisphere: each takes 2pi/n of
        // solid angle, giving a center spacing near 2*sqrt(1/n).
        let packing = 2.0 * (1.0f64 / 100.0).sqrt();
        assert!(
            min_angle > packing / 2.0 && min_angle < packing * 2.0,
            "min angle {min_angle:.4} vs packing estimate {packing:.4}"
        );
    }

    #[test]
    fn look_at_maps_world_z_to_camera_minus_z() {
        let r = look_at_rotation(&Vector3::new(0.0, 0.0, 1.0));
        let m = r.to_matrix();
        let mapped = m * Vector3::z();
        assert_relative_eq!(mapped, -Vector3::z(), epsilon = 1e-12);
    }

    #[test]
    fn camera_set_is_orthonormal_and_rolls_share_axis() {
        let cams = sample_camera_set(5, 3, RollMode::Random, 9);
        assert_eq!(cams.len(), 15);
        for c in &cams {
            let m = c.to_matrix();
            assert!((m * m.transpose() - Matrix3::identity()).norm() < 1e-9);
            assert!((m.determinant() - 1.0).abs() < 1e-9);
        }
        // Two rolls at one viewpoint differ by a rotation about the optical
        // axis: the relative rotation b a^T acts in camera coordinates and
        // must be a pure Rz.
        let a = cams[0].to_matrix();
        let b = cams[1].to_matrix();
        let rel = b * a.transpose();
        let axis = crate::rotation::matrix_to_rodrigues(&rel).unwrap();
        let axis_dir = axis.normalize();
        let ez = Vector3::z();
        assert!(
            (axis_dir - ez).norm() < 1e-9 || (axis_dir + ez).norm() < 1e-9,
            "roll axis {axis_dir:?} is not the optical axis"
        );
    }

    #[test]
    fn identical_cameras_give_identity_pair() {
        let poses = procedural_quadruped_poses(3, 4);
        let cam = sample_camera_set(1, 1, RollMode::Grid, 0);
        let pairs = generate_training_pairs(&poses, &cam, 5, 1).unwrap();
        for p in &pairs {
            assert!(p.relative_rotation.angle() < 1e-12);
            for (a, b) in p.source.coords.iter().zip(&p.target.coords) {
                assert_relative_eq!(a[0], b[0], epsilon = 1e-10);
                assert_relative_eq!(a[1], b[1], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn swapped_pair_has_inverse_rotation() {
        let cams = sample_camera_set(4, 2, RollMode::Random, 5);
        let a = &cams[1];
        let b = &cams[5];
        let fwd = b.compose(&a.inverse());
        let bwd = a.compose(&b.inverse());
        let prod = fwd.compose(&bwd);
        assert!(prod.angle() < 1e-10);
    }

    #[test]
    fn rotation_covariance_oracle() {
        // Rotating the hidden 3D pose by the relative rotation inside camera
        // A's frame reproduces the stored target.
        let poses = procedural_quadruped_poses(4, 77);
        let cams = sample_camera_set(10, 2, RollMode::Random, 77);
        let pairs = generate_training_pairs(&poses, &cams, 50, 77).unwrap();
        for p in &pairs {
            let pose = &poses[p.pose_id];
            // Recover camera A for this pair is not stored; instead verify
            // f(g(x)) = g'(f(x)) algebraically: target = normalize(ortho(R_b x))
            // and R_rel (R_a x) = R_b x, so projecting R_rel-rotated camera-A
            // coordinates must reproduce the target. Reconstruct camera A via
            // brute-force search over the sampled set.
            let mut matched = false;
            for ca in &cams {
                let Some(src) = project_pose_centric(pose, ca) else {
                    continue;
                };
                let close = src
                    .coords
                    .iter()
                    .zip(&p.source.coords)
                    .all(|(a, b)| (a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
                if close {
                    let rotated = p.relative_rotation.compose(ca);
                    let reproj = project_pose_centric(pose, &rotated).unwrap();
                    for (a, b) in reproj.coords.iter().zip(&p.target.coords) {
                        assert_relative_eq!(a[0], b[0], epsilon = 1e-10);
                        assert_relative_eq!(a[1], b[1], epsilon = 1e-10);
                    }
                    matched = true;
                    break;
                }
            }
            assert!(matched, "source camera not found in sampled set");
        }
    }

    #[test]
    fn split_matches_paper_ratios() {
        let poses = procedural_quadruped_poses(5, 3);
        let cams = sample_camera_set(8, 2, RollMode::Random, 3);
        let pairs = generate_training_pairs(&poses, &cams, 3000, 3).unwrap();
        let split = split_dataset(pairs, [0.7, 0.2, 0.1], 3).unwrap();
        assert_eq!(split.train.len(), 2100);
        assert_eq!(split.val.len(), 600);
        assert_eq!(split.test.len(), 300);
    }

    #[test]
    fn small_split_rounds_as_expected() {
        let poses = procedural_quadruped_poses(2, 3);
        let cams = sample_camera_set(4, 1, RollMode::Random, 3);
        let pairs = generate_training_pairs(&poses, &cams, 10, 3).unwrap();
        let split = split_dataset(pairs, [0.7, 0.2, 0.1], 0).unwrap();
        assert_eq!(
            (split.train.len(), split.val.len(), split.test.len()),
            (7, 2, 1)
        );
    }

    #[test]
    fn split_determinism_and_seed_sensitivity() {
        let poses = procedural_quadruped_poses(2, 3);
        let cams = sample_camera_set(4, 1, RollMode::Random, 3);
        let pairs = generate_training_pairs(&poses, &cams, 40, 3).unwrap();
        let a = split_dataset(pairs.clone(), [0.7, 0.2, 0.1], 5).unwrap();
        let b = split_dataset(pairs.clone(), [0.7, 0.2, 0.1], 5).unwrap();
        let c = split_dataset(pairs, [0.7, 0.2, 0.1], 6).unwrap();
        assert_eq!(a.train, b.train);
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn bad_ratios_are_rejected() {
        assert!(matches!(
            split_dataset(Vec::new(), [0.5, 0.5, 0.5], 0),
            Err(SynthError::BadRatios(_))
        ));
    }

    #[test]
    fn noop_augmentation_is_identity() {
        let poses = procedural_quadruped_poses(1, 3);
        let cams = sample_camera_set(2, 1, RollMode::Random, 3);
        let pairs = generate_training_pairs(&poses, &cams, 1, 3).unwrap();
        let cfg = AugmentationConfig {
            mask_fraction_range: [0.0, 0.0],
            keypoint_noise_std: 0.0,
            noise_units: NoiseUnits::PoseCentric,
            rng_seed: 0,
        };
        let out = augment_with_seed(&pairs[0], &cfg);
        assert_eq!(out, pairs[0]);
    }

    #[test]
    fn mask_fraction_bounds_hold() {
        let poses = procedural_quadruped_poses(1, 3);
        let cams = sample_camera_set(2, 1, RollMode::Random, 3);
        // 20-joint pose: pad the quadruped with 4 extra visible joints.
        let mut pair = generate_training_pairs(&poses, &cams, 1, 3).unwrap().remove(0);
        for _ in 0..4 {
            pair.source.coords.push([0.1, 0.1]);
            pair.source.visible.push(true);
            pair.target.coords.push([0.1, 0.1]);
            pair.target.visible.push(true);
        }
        let cfg = AugmentationConfig {
            mask_fraction_range: [0.1, 0.3],
            keypoint_noise_std: 0.0,
            noise_units: NoiseUnits::PoseCentric,
            rng_seed: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let out = augment(&pair, &cfg, &mut rng);
            let masked = out.source.visible.iter().filter(|v| !**v).count();
            assert!((2..=6).contains(&masked), "masked {masked} of 20");
        }
    }

    #[test]
    fn noise_std_matches_monte_carlo() {
        let poses = procedural_quadruped_poses(1, 3);
        let cams = sample_camera_set(2, 1, RollMode::Random, 3);
        let pair = generate_training_pairs(&poses, &cams, 1, 3).unwrap().remove(0);
        let cfg = AugmentationConfig {
            mask_fraction_range: [0.0, 0.0],
            keypoint_noise_std: 3.0,
            noise_units: NoiseUnits::Pixel,
            rng_seed: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        // ~10^5 coordinate draws: 200 repeats x 16 joints x 2 coords.
        for _ in 0..3200 {
            let out = augment(&pair, &cfg, &mut rng);
            for (a, b) in out.source.coords.iter().zip(&pair.source.coords) {
                sum_sq += (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
                count += 2;
            }
        }
        let std = (sum_sq / count as f64).sqrt();
        assert!((2.9..=3.1).contains(&std), "empirical std {std:.3}");
    }

    #[test]
    fn quadruped_bones_are_rigid_and_poses_nonplanar() {
        let poses = procedural_quadruped_poses(200, 8);
        let bones = quadruped_bones();
        let mut ref_lengths = Vec::new();
        for (k, pose) in poses.iter().enumerate() {
            // All joints visible and pairwise distinct.
            assert!(pose.visible.iter().all(|&v| v));
            for i in 0..16 {
                for j in (i + 1)..16 {
                    assert!((pose.joint(i) - pose.joint(j)).norm() > 1e-6);
                }
            }
            for (bi, b) in bones.iter().enumerate() {
                let len = (pose.joint(b.child) - pose.joint(b.parent)).norm();
                if k == 0 {
                    ref_lengths.push(len);
                } else {
                    assert!((len - ref_lengths[bi]).abs() < 1e-9);
                }
            }
        }
        // Plane-fit residual: smallest singular value of centered coords.
        let mut near_planar = 0;
        for pose in &poses {
            let mut m = nalgebra::DMatrix::zeros(16, 3);
            for i in 0..16 {
                let p = pose.joint(i);
                m[(i, 0)] = p.x;
                m[(i, 1)] = p.y;
                m[(i, 2)] = p.z;
            }
            let svd = m.svd(false, false);
            let s = svd.singular_values;
            let rms_residual = s[2] / (16.0f64).sqrt();
            if rms_residual < 1e-3 {
                near_planar += 1;
            }
        }
        assert!(
            (near_planar as f64) / 200.0 <= 0.01,
            "{near_planar} of 200 poses near-planar"
        );
    }

    #[test]
    fn scene_has_consistent_geometry() {
        let cfg = SceneConfig {
            noise_px_std: 0.0,
            ..SceneConfig::default()
        };
        let scene = render_scene(&cfg);
        assert_eq!(scene.cameras.len(), 2);
        assert_eq!(scene.frames.len(), 8);
        // Noiseless detections must reproject exactly from the GT poses.
        let f = &scene.frames[0];
        for (v, cam) in scene.cameras.iter().enumerate() {
            for det in &f.views[v] {
                let gt = &scene.gt_world_poses[0][det.gt_instance];
                let proj = project(&cam.to_camera_frame(gt), cam).unwrap();
                for (a, b) in proj.coords.iter().zip(&det.pose_px.coords) {
                    assert_relative_eq!(a[0], b[0], epsilon = 1e-9);
                    assert_relative_eq!(a[1], b[1], epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn scene_rendering_is_deterministic() {
        let cfg = SceneConfig::default();
        let a = render_scene(&cfg);
        let b = render_scene(&cfg);
        assert_eq!(
            a.frames[0].views[0][0].pose_px.coords,
            b.frames[0].views[0][0].pose_px.coords
        );
    }
}
