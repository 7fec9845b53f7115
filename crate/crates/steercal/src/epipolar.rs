//! Two-view epipolar machinery built on the translation-feasibility system.
//!
//! For matched keypoints with unit bearings `u` (view 1) and `u'` (view 2)
//! and a rotation hypothesis `R`, each keypoint contributes three rows
//!
//! ```text
//! [u']_x (R u) d  +  [u']_x t  =  0
//! ```
//!
//! linear in the per-keypoint depth `d` and the translation `t`. The stacked
//! homogeneous system has an exact null vector iff the rotation admits a
//! consistent translation, so the ratio of its two smallest singular values
//! works as a differentiable feasibility loss, and the null vector itself
//! yields the translation direction and depths.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3};
use thiserror::Error;

use crate::autodiff::Dual3;
use crate::camera::{CameraModel, Intrinsics};
use crate::rotation::{skew, RigidTransform};

#[derive(Debug, Error)]
pub enum EpipolarError {
    #[error("need at least {needed} matched keypoints, got {got}")]
    TooFewMatches { needed: usize, got: usize },
    #[error("degenerate system: second-smallest singular value {0:.3e}")]
    DegenerateSystem(f64),
    #[error("no translation sign puts the majority of depths in front of both cameras")]
    NoValidChirality,
    #[error("solvability ratio {ratio:.3e} exceeds threshold {threshold:.3e}")]
    NotSolvable { ratio: f64, threshold: f64 },
    #[error("camera centers coincide")]
    IdenticalCenters,
}

/// Stacked translation-feasibility system for one rotation hypothesis.
///
/// Columns are the `K` keypoint depths followed by the three translation
/// components; rows come in blocks of three per keypoint.
#[derive(Debug, Clone)]
pub struct TranslationSystem {
    pub matrix: DMatrix<f64>,
    pub n_keypoints: usize,
    bearings: Vec<(Vector3<f64>, Vector3<f64>)>,
    rotation: Matrix3<f64>,
}

/// Dual-valued system carrying tangents with respect to the three Rodrigues
/// parameters of the rotation.
#[derive(Debug, Clone)]
pub struct DualTranslationSystem {
    pub values: DMatrix<f64>,
    pub tangents: [DMatrix<f64>; 3],
    pub n_keypoints: usize,
}

/// Assembles the system from matched unit bearings and a rotation.
pub fn assemble_translation_system(
    matches: &[(Vector3<f64>, Vector3<f64>)],
    rotation: &Matrix3<f64>,
) -> Result<TranslationSystem, EpipolarError> {
    let k = matches.len();
    if k < 2 {
        return Err(EpipolarError::TooFewMatches { needed: 2, got: k });
    }
    let mut a = DMatrix::zeros(3 * k, k + 3);
    for (i, (u1, u2)) in matches.iter().enumerate() {
        let cross = skew(u2);
        let depth_col = cross * (rotation * u1);
        for r in 0..3 {
            a[(3 * i + r, i)] = depth_col[r];
            for c in 0..3 {
                a[(3 * i + r, k + c)] = cross[(r, c)];
            }
        }
    }
    Ok(TranslationSystem {
        matrix: a,
        n_keypoints: k,
        bearings: matches.to_vec(),
        rotation: *rotation,
    })
}

/// Dual assembly: bearings are observations (constants); only `R` carries
/// tangents.
pub fn assemble_translation_system_dual(
    matches: &[(Vector3<f64>, Vector3<f64>)],
    rotation: &[[Dual3; 3]; 3],
) -> Result<DualTranslationSystem, EpipolarError> {
    let k = matches.len();
    if k < 2 {
        return Err(EpipolarError::TooFewMatches { needed: 2, got: k });
    }
    let mut values = DMatrix::zeros(3 * k, k + 3);
    let mut tangents = [
        DMatrix::zeros(3 * k, k + 3),
        DMatrix::zeros(3 * k, k + 3),
        DMatrix::zeros(3 * k, k + 3),
    ];
    for (i, (u1, u2)) in matches.iter().enumerate() {
        let cross = skew(u2);
        // (R u1) as duals, then the cross product rows.
        let ru: [Dual3; 3] = std::array::from_fn(|r| {
            let mut s = Dual3::constant(0.0);
            for c in 0..3 {
                s += rotation[r][c] * u1[c];
            }
            s
        });
        for r in 0..3 {
            let mut cell = Dual3::constant(0.0);
            for c in 0..3 {
                cell += ru[c] * cross[(r, c)];
            }
            values[(3 * i + r, i)] = cell.value;
            for p in 0..3 {
                tangents[p][(3 * i + r, i)] = cell.tangent[p];
            }
            for c in 0..3 {
                values[(3 * i + r, k + c)] = cross[(r, c)];
            }
        }
    }
    Ok(DualTranslationSystem {
        values,
        tangents,
        n_keypoints: k,
    })
}

/// Two smallest singular values with their singular vectors, by full SVD.
fn smallest_two(
    a: &DMatrix<f64>,
) -> (
    (f64, DVector<f64>, DVector<f64>),
    (f64, DVector<f64>, DVector<f64>),
) {
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let s = &svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[i].partial_cmp(&s[j]).unwrap());
    let take = |idx: usize| {
        (
            s[idx],
            u.column(idx).into_owned(),
            vt.row(idx).transpose().into_owned(),
        )
    };
    (take(order[0]), take(order[1]))
}

/// Feasibility loss: ratio of the two smallest singular values of the
/// system, with closed-form gradients through the singular values.
///
/// `d sigma / d A = u v^T` for each singular pair; near a singular-value
/// crossing the same expression is used as a subgradient.
pub fn geom_loss(system: &DualTranslationSystem) -> Result<Dual3, EpipolarError> {
    let ((s1, u1, v1), (s2, u2, v2)) = smallest_two(&system.values);
    if s2 < 1e-12 {
        return Err(EpipolarError::DegenerateSystem(s2));
    }
    let mut ds1 = [0.0; 3];
    let mut ds2 = [0.0; 3];
    for p in 0..3 {
        let t = &system.tangents[p];
        // u^T (dA) v without forming the outer product.
        ds1[p] = (u1.transpose() * t * &v1)[(0, 0)];
        ds2[p] = (u2.transpose() * t * &v2)[(0, 0)];
    }
    let d1 = Dual3::new(s1, ds1);
    let d2 = Dual3::new(s2, ds2);
    Ok(d1 / d2)
}

/// Value-only feasibility ratio of a plain system.
pub fn feasibility_ratio(system: &TranslationSystem) -> Result<f64, EpipolarError> {
    let svd = system.matrix.clone().svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if s[1] < 1e-12 {
        return Err(EpipolarError::DegenerateSystem(s[1]));
    }
    Ok(s[0] / s[1])
}

/// Recovered translation direction plus per-keypoint depths in both views.
#[derive(Debug, Clone)]
pub struct RecoveredTranslation {
    pub translation: Vector3<f64>,
    pub depths_view1: Vec<f64>,
    pub depths_view2: Vec<f64>,
}

/// Extracts the translation direction and depths from the null vector of
/// the system, resolving the sign by chirality.
pub fn recover_translation(
    system: &TranslationSystem,
    solvability_threshold: f64,
) -> Result<RecoveredTranslation, EpipolarError> {
    let ratio = feasibility_ratio(system)?;
    if ratio > solvability_threshold {
        return Err(EpipolarError::NotSolvable {
            ratio,
            threshold: solvability_threshold,
        });
    }
    let ((_, _, v1), _) = smallest_two(&system.matrix);
    let k = system.n_keypoints;
    let t = Vector3::new(v1[k], v1[k + 1], v1[k + 2]);
    let t_norm = t.norm();
    if t_norm < 1e-12 {
        return Err(EpipolarError::NoValidChirality);
    }
    let scale = 1.0 / t_norm;
    let eval_sign = |sign: f64| -> (usize, Vec<f64>, Vec<f64>) {
        let mut d1 = Vec::with_capacity(k);
        let mut d2 = Vec::with_capacity(k);
        let mut front = 0usize;
        let t_signed = t * scale * sign;
        for (i, (u1, u2)) in system.bearings.iter().enumerate() {
            let depth1 = v1[i] * scale * sign;
            let x2 = system.rotation * (u1 * depth1) + t_signed;
            let depth2 = u2.dot(&x2);
            if depth1 > 0.0 && depth2 > 0.0 {
                front += 1;
            }
            d1.push(depth1);
            d2.push(depth2);
        }
        (front, d1, d2)
    };
    let (front_pos, d1p, d2p) = eval_sign(1.0);
    let (front_neg, d1n, d2n) = eval_sign(-1.0);
    let majority = k / 2 + 1;
    if front_pos >= majority && front_pos >= front_neg {
        Ok(RecoveredTranslation {
            translation: t * scale,
            depths_view1: d1p,
            depths_view2: d2p,
        })
    } else if front_neg >= majority {
        Ok(RecoveredTranslation {
            translation: -t * scale,
            depths_view1: d1n,
            depths_view2: d2n,
        })
    } else {
        Err(EpipolarError::NoValidChirality)
    }
}

/// One triangulated correspondence.
#[derive(Debug, Clone)]
pub struct TriangulatedPoint {
    /// World-frame point (frame of the two poses).
    pub point: Vector3<f64>,
    /// Rays closer than ~0.006 degrees to parallel; the point is unreliable.
    pub rays_parallel: bool,
    /// Reprojection residual per view, pixels if intrinsics were supplied,
    /// normalized units otherwise. NaN when the point falls behind a camera.
    pub residual: [f64; 2],
}

/// Linear (DLT) triangulation of normalized-coordinate correspondences.
pub fn triangulate(
    pose_a: &RigidTransform,
    pose_b: &RigidTransform,
    correspondences: &[([f64; 2], [f64; 2])],
    intrinsics: Option<(&Intrinsics, &Intrinsics)>,
) -> Result<Vec<TriangulatedPoint>, EpipolarError> {
    if (pose_a.center() - pose_b.center()).norm() < 1e-12 {
        return Err(EpipolarError::IdenticalCenters);
    }
    let ra = pose_a.rotation.to_matrix();
    let rb = pose_b.rotation.to_matrix();
    let ta = Vector3::from(pose_a.translation);
    let tb = Vector3::from(pose_b.translation);
    let mut out = Vec::with_capacity(correspondences.len());
    for &(xa, xb) in correspondences {
        // Rows of [x]_x [R | t] X = 0 for both views, X homogeneous.
        let mut m = Matrix4::zeros();
        let fill = |m: &mut Matrix4<f64>, row0: usize, x: [f64; 2], r: &Matrix3<f64>, t: &Vector3<f64>| {
            for c in 0..3 {
                m[(row0, c)] = x[0] * r[(2, c)] - r[(0, c)];
                m[(row0 + 1, c)] = x[1] * r[(2, c)] - r[(1, c)];
            }
            m[(row0, 3)] = x[0] * t[2] - t[0];
            m[(row0 + 1, 3)] = x[1] * t[2] - t[1];
        };
        fill(&mut m, 0, xa, &ra, &ta);
        fill(&mut m, 2, xb, &rb, &tb);
        let svd = m.svd(false, true);
        let vt = svd.v_t.expect("v_t requested");
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&i, &j| {
            svd.singular_values[i]
                .partial_cmp(&svd.singular_values[j])
                .unwrap()
        });
        let h = vt.row(order[0]).transpose();
        let w = h[3];
        let point = if w.abs() > 1e-15 {
            Vector3::new(h[0] / w, h[1] / w, h[2] / w)
        } else {
            Vector3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY)
        };

        // Parallel-ray check in world coordinates.
        let ray_a = ra.transpose() * Vector3::new(xa[0], xa[1], 1.0).normalize();
        let ray_b = rb.transpose() * Vector3::new(xb[0], xb[1], 1.0).normalize();
        let rays_parallel = ray_a.cross(&ray_b).norm() < 1e-4;

        let reproj = |r: &Matrix3<f64>, t: &Vector3<f64>, x: [f64; 2], view: usize| -> f64 {
            let pc = r * point + t;
            if pc.z <= 0.0 {
                return f64::NAN;
            }
            let nx = pc.x / pc.z;
            let ny = pc.y / pc.z;
            match intrinsics {
                Some((ka, kb)) => {
                    let k = if view == 0 { ka } else { kb };
                    let dx = (nx - x[0]) * k.fx;
                    let dy = (ny - x[1]) * k.fy;
                    (dx * dx + dy * dy).sqrt()
                }
                None => {
                    let dx = nx - x[0];
                    let dy = ny - x[1];
                    (dx * dx + dy * dy).sqrt()
                }
            }
        };
        out.push(TriangulatedPoint {
            point,
            rays_parallel,
            residual: [reproj(&ra, &ta, xa, 0), reproj(&rb, &tb, xb, 1)],
        });
    }
    Ok(out)
}

/// One observation of a 3D point in a camera.
#[derive(Debug, Clone, Copy)]
pub struct Observation {
    pub camera: usize,
    pub point: usize,
    pub pixel: [f64; 2],
}

/// Per-observation reprojection distance in pixels.
#[derive(Debug, Clone, Copy)]
pub struct ObservationError {
    pub distance_px: f64,
    pub behind_camera: bool,
}

/// Euclidean pixel distances between projected points and observations.
pub fn reprojection_error(
    cameras: &[CameraModel],
    points: &[Vector3<f64>],
    observations: &[Observation],
) -> Vec<ObservationError> {
    observations
        .iter()
        .map(|obs| {
            let cam = &cameras[obs.camera];
            let pc = cam.pose.apply(&points[obs.point]);
            if pc.z <= 0.0 {
                return ObservationError {
                    distance_px: f64::INFINITY,
                    behind_camera: true,
                };
            }
            let k = &cam.intrinsics;
            let px = k.fx * pc.x / pc.z + k.cx;
            let py = k.fy * pc.y / pc.z + k.cy;
            let dx = px - obs.pixel[0];
            let dy = py - obs.pixel[1];
            ObservationError {
                distance_px: (dx * dx + dy * dy).sqrt(),
                behind_camera: false,
            }
        })
        .collect()
}

/// Median of a slice; NaN on empty input.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::{rodrigues_to_matrix_dual, RotationSO3};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exact two-view scene: rotation, unit translation, and matched unit
    /// bearings of random points in front of both cameras.
    pub(crate) fn exact_scene(
        seed: u64,
        n_points: usize,
    ) -> (
        Matrix3<f64>,
        Vector3<f64>,
        Vec<(Vector3<f64>, Vector3<f64>)>,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let axis = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize();
            let angle = rng.random_range(0.2..0.8);
            let r = crate::rotation::rodrigues_to_matrix(&(axis * angle));
            let t = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-0.3..0.3),
            )
            .normalize();
            let mut matches = Vec::new();
            for _ in 0..n_points {
                let x1 = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(2.0..6.0),
                );
                let x2 = r * x1 + t;
                if x2.z <= 0.1 {
                    continue;
                }
                matches.push((x1.normalize(), x2.normalize()));
            }
            if matches.len() == n_points {
                return (r, t, matches);
            }
        }
    }

    #[test]
    fn single_point_block_has_rank_two() {
        let (r, _, matches) = exact_scene(1, 2);
        let sys = assemble_translation_system(&matches[..2], &r).unwrap();
        assert_eq!(sys.matrix.nrows(), 6);
        assert_eq!(sys.matrix.ncols(), 5);
        // Each 3-row block is built from a cross-product matrix: rank <= 2.
        let block = sys.matrix.view((0, 0), (3, 5)).into_owned();
        let svd = block.svd(false, false);
        let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(s[2] < 1e-12 * s[0].max(1.0));
    }

    #[test]
    fn exact_scene_null_vector_is_parallel_to_translation() {
        let (r, t, matches) = exact_scene(2, 8);
        let sys = assemble_translation_system(&matches, &r).unwrap();
        let ((s1, _, v1), _) = smallest_two(&sys.matrix);
        assert!(s1 < 1e-10, "smallest singular value {s1:.3e}");
        let k = matches.len();
        let t_est = Vector3::new(v1[k], v1[k + 1], v1[k + 2]).normalize();
        let cos = t_est.dot(&t).abs();
        assert!(cos > 1.0 - 1e-9, "cos {cos}");
    }

    #[test]
    fn wrong_rotation_raises_smallest_singular_value() {
        let (r, _, matches) = exact_scene(3, 8);
        let sys_true = assemble_translation_system(&matches, &r).unwrap();
        let perturb = crate::rotation::rodrigues_to_matrix(&Vector3::new(0.1, -0.05, 0.07));
        let sys_wrong = assemble_translation_system(&matches, &(perturb * r)).unwrap();
        let s_true = sys_true.matrix.clone().svd(false, false);
        let s_wrong = sys_wrong.matrix.clone().svd(false, false);
        let min = |sv: &nalgebra::DVector<f64>| sv.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min(&s_wrong.singular_values) > 10.0 * min(&s_true.singular_values).max(1e-14));
    }

    #[test]
    fn geom_loss_vanishes_on_exact_data() {
        let (r, _, matches) = exact_scene(4, 10);
        let rod = crate::rotation::matrix_to_rodrigues(&r).unwrap();
        let dual_rod: [Dual3; 3] = std::array::from_fn(|i| Dual3::variable(rod[i], i));
        let dual_r = rodrigues_to_matrix_dual(&dual_rod);
        let sys = assemble_translation_system_dual(&matches, &dual_r).unwrap();
        let loss = geom_loss(&sys).unwrap();
        assert!(loss.value < 1e-8, "loss {}", loss.value);
    }

    #[test]
    fn random_full_rank_loss_is_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let (_, _, matches) = exact_scene(rng.random(), 6);
            // Random rotation unrelated to the scene.
            let r = RotationSO3::random_uniform(&mut rng).to_matrix();
            let dual_rod: [Dual3; 3] =
                std::array::from_fn(|i| Dual3::constant(crate::rotation::matrix_to_rodrigues(&r).unwrap()[i]));
            let dual_r = rodrigues_to_matrix_dual(&dual_rod);
            let sys = assemble_translation_system_dual(&matches, &dual_r).unwrap();
            let loss = geom_loss(&sys).unwrap().value;
            assert!(loss > 0.0 && loss <= 1.0, "loss {loss}");
        }
    }

    #[test]
    fn geom_loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let (r, _, matches) = exact_scene(rng.random(), 7);
            // Perturb away from the exact rotation so the loss is generic.
            let delta = Vector3::new(
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
            );
            let base = crate::rotation::matrix_to_rodrigues(
                &(crate::rotation::rodrigues_to_matrix(&delta) * r),
            )
            .unwrap();
            let loss_at = |rod: Vector3<f64>| -> f64 {
                let m = crate::rotation::rodrigues_to_matrix(&rod);
                let dual: [Dual3; 3] = std::array::from_fn(|i| {
                    Dual3::constant(crate::rotation::matrix_to_rodrigues(&m).unwrap()[i])
                });
                let dm = rodrigues_to_matrix_dual(&dual);
                let sys = assemble_translation_system_dual(&matches, &dm).unwrap();
                geom_loss(&sys).unwrap().value
            };
            let dual_rod: [Dual3; 3] = std::array::from_fn(|i| Dual3::variable(base[i], i));
            let dual_r = rodrigues_to_matrix_dual(&dual_rod);
            let sys = assemble_translation_system_dual(&matches, &dual_r).unwrap();
            let loss = geom_loss(&sys).unwrap();
            let h = 1e-5;
            for p in 0..3 {
                let mut hi = base;
                hi[p] += h;
                let mut lo = base;
                lo[p] -= h;
                let fd = (loss_at(hi) - loss_at(lo)) / (2.0 * h);
                let denom = fd.abs().max(loss.tangent[p].abs()).max(1e-8);
                assert!(
                    (loss.tangent[p] - fd).abs() / denom < 1e-3,
                    "trial {trial} param {p}: analytic {} vs fd {fd}",
                    loss.tangent[p]
                );
            }
        }
    }

    #[test]
    fn translation_recovery_is_accurate_and_chirality_consistent() {
        for seed in 0..20 {
            let (r, t, matches) = exact_scene(100 + seed, 10);
            let sys = assemble_translation_system(&matches, &r).unwrap();
            let rec = recover_translation(&sys, 0.05).unwrap();
            let angle = rec
                .translation
                .dot(&t)
                .clamp(-1.0, 1.0)
                .acos()
                .to_degrees();
            assert!(angle < 0.1, "seed {seed}: angle {angle}");
            assert!(rec.depths_view1.iter().all(|&d| d > 0.0));
            assert!(rec.depths_view2.iter().all(|&d| d > 0.0));
        }
    }

    #[test]
    fn identical_rays_are_degenerate() {
        let u = Vector3::new(0.1, 0.2, 1.0).normalize();
        let matches = vec![(u, u), (u, u), (u, u)];
        let r = Matrix3::identity();
        let sys = assemble_translation_system(&matches, &r).unwrap();
        match recover_translation(&sys, 0.05) {
            Err(EpipolarError::DegenerateSystem(_)) | Err(EpipolarError::NoValidChirality) => {}
            other => panic!("expected degenerate outcome, got {other:?}"),
        }
    }

    #[test]
    fn triangulation_exact_on_axis() {
        let pa = RigidTransform::identity();
        let pb = RigidTransform::new(RotationSO3::identity(), [-1.0, 0.0, 0.0]);
        // Point at depth 4 on camera A's axis; in B it appears at x = -1/4.
        let corr = vec![([0.0, 0.0], [-0.25, 0.0])];
        let pts = triangulate(&pa, &pb, &corr, None).unwrap();
        assert_relative_eq!(pts[0].point, Vector3::new(0.0, 0.0, 4.0), epsilon = 1e-9);
        assert!(!pts[0].rays_parallel);
    }

    #[test]
    fn triangulation_recovers_random_scene() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rot = RotationSO3::random_uniform(&mut rng);
        let r = rot.to_matrix();
        // Keep the second camera looking at the scene: build it from a
        // moderate rotation instead.
        let rot = RotationSO3::new([0.3 * r[(0, 0)], 0.2, -0.1]);
        let t = [1.0, 0.2, 0.1];
        let pa = RigidTransform::identity();
        let pb = RigidTransform::new(rot, t);
        let rb = rot.to_matrix();
        let mut corr = Vec::new();
        let mut gt = Vec::new();
        while corr.len() < 30 {
            let x = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(3.0..8.0),
            );
            let x2 = rb * x + Vector3::from(t);
            if x2.z < 0.5 {
                continue;
            }
            corr.push(([x.x / x.z, x.y / x.z], [x2.x / x2.z, x2.y / x2.z]));
            gt.push(x);
        }
        let pts = triangulate(&pa, &pb, &corr, None).unwrap();
        let mut max_err: f64 = 0.0;
        for (p, g) in pts.iter().zip(&gt) {
            max_err = max_err.max((p.point - g).norm());
        }
        assert!(max_err < 1e-8, "max 3D error {max_err:.3e}");
    }

    #[test]
    fn triangulation_noise_monte_carlo() {
        // sigma = 3 px at f = 1000 px, 2 m baseline, ~5 m depth.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let k = Intrinsics {
            fx: 1000.0,
            fy: 1000.0,
            cx: 500.0,
            cy: 500.0,
        };
        let pa = RigidTransform::identity();
        let rot = RotationSO3::new([0.0, -0.35, 0.0]);
        let rb = rot.to_matrix();
        let cb = Vector3::new(2.0, 0.0, 0.0);
        let tb = -(rb * cb);
        let pb = RigidTransform::new(rot, tb.into());
        let noise = rand_distr::Normal::new(0.0, 3.0).unwrap();
        let mut residuals = Vec::new();
        use rand_distr::Distribution;
        for _ in 0..1000 {
            let x = Vector3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(4.5..5.5),
            );
            let x2 = rb * x + tb;
            if x2.z < 0.5 {
                continue;
            }
            let perturb = |v: f64, f: f64, rng: &mut ChaCha8Rng| v + noise.sample(rng) / f;
            let na = [
                perturb(x.x / x.z, k.fx, &mut rng),
                perturb(x.y / x.z, k.fy, &mut rng),
            ];
            let nb = [
                perturb(x2.x / x2.z, k.fx, &mut rng),
                perturb(x2.y / x2.z, k.fy, &mut rng),
            ];
            let pts = triangulate(&pa, &pb, &[(na, nb)], Some((&k, &k))).unwrap();
            for r in &pts[0].residual {
                if r.is_finite() {
                    residuals.push(*r);
                }
            }
        }
        let med = median(&residuals);
        assert!(med <= 3.0, "median reprojection {med:.2} px");
    }

    #[test]
    fn reprojection_error_hand_cases() {
        let k = Intrinsics {
            fx: 1000.0,
            fy: 1000.0,
            cx: 500.0,
            cy: 500.0,
        };
        let cam = CameraModel::perspective(k, RigidTransform::identity());
        let points = vec![Vector3::new(0.0, 0.0, 2.0)];
        let obs = vec![
            Observation {
                camera: 0,
                point: 0,
                pixel: [500.0, 500.0],
            },
            Observation {
                camera: 0,
                point: 0,
                pixel: [507.0, 500.0],
            },
        ];
        let errs = reprojection_error(&[cam], &points, &obs);
        assert_relative_eq!(errs[0].distance_px, 0.0);
        assert_relative_eq!(errs[1].distance_px, 7.0);
        assert!(!errs[1].behind_camera);
    }

    #[test]
    fn reprojection_flags_behind_camera() {
        let k = Intrinsics {
            fx: 1000.0,
            fy: 1000.0,
            cx: 500.0,
            cy: 500.0,
        };
        let cam = CameraModel::perspective(k, RigidTransform::identity());
        let points = vec![Vector3::new(0.0, 0.0, -2.0)];
        let obs = vec![Observation {
            camera: 0,
            point: 0,
            pixel: [500.0, 500.0],
        }];
        let errs = reprojection_error(&[cam], &points, &obs);
        assert!(errs[0].behind_camera);
    }
}
