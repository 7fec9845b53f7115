//! Multi-view integration: rotation averaging over pairwise estimates,
//! cycle-consistent correspondence merging, translation-scale resolution on
//! a spanning tree, and bundle adjustment.
//!
//! Gauge: camera 0 keeps its pose (identity in the rig frame) and the
//! distance from camera 0 to camera 1 is one.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{
    calibrate_pair, evaluate_pose_on_frames, CalibConfig, CalibError, PairObservations,
    TwoViewResult,
};
use crate::autodiff::DualN;
use crate::camera::{pixel_to_normalized, Intrinsics};
use crate::epipolar::median;
use crate::matching::MatchSet;
use crate::pose::Pose2D;
use crate::rotation::{
    matrix_to_rodrigues, rodrigues_to_matrix, rodrigues_to_matrix_dual, RigidTransform,
    RotationSO3,
};
use crate::skeleton::Skeleton;
use crate::steerer::SteererParams;
use crate::synth::derive_seed;

/// Detections of a full rig: `frames[f][v]` lists the instances of view `v`.
#[derive(Debug, Clone)]
pub struct MultiViewInput {
    pub frames: Vec<Vec<Vec<Pose2D>>>,
    pub intrinsics: Vec<Intrinsics>,
}

/// One calibrated camera pair inside a rig.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairwiseEstimate {
    pub view_a: usize,
    pub view_b: usize,
    pub result: TwoViewResult,
}

/// A track: instances of one subject across views within one frame.
pub type Track = Vec<(usize, usize)>;

/// Globally consistent rig calibration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiViewResult {
    /// World(rig)-to-camera rotations, camera 0 at identity.
    pub rotations: Vec<RotationSO3>,
    /// Camera centers; camera 0 at the origin, unit distance 0 to 1.
    pub positions: Vec<[f64; 3]>,
    pub pairwise: Vec<PairwiseEstimate>,
    /// Per frame: merged cross-view instance tracks.
    pub tracks: Vec<Vec<Track>>,
    #[serde(with = "crate::serde_util::nullable_f64")]
    pub pre_ba_median_e2d_px: f64,
    #[serde(with = "crate::serde_util::nullable_f64")]
    pub post_ba_median_e2d_px: f64,
    pub ba_diverged: bool,
}

impl MultiViewResult {
    pub fn camera_pose(&self, v: usize) -> RigidTransform {
        let r = self.rotations[v].to_matrix();
        let c = Vector3::from(self.positions[v]);
        RigidTransform::new(self.rotations[v], (-(r * c)).into())
    }
}

// ── Rotation averaging ───────────────────────────────────────────────────────

/// Least-squares rotation averaging by iterative tangent-space relaxation.
///
/// `pairwise` holds `(i, j, R_ij)` with `R_j = R_ij R_i`. Camera 0 is fixed
/// to the identity. Returns the global rotations and per-edge residual
/// angles in degrees.
pub fn rotation_averaging(
    n_cameras: usize,
    pairwise: &[(usize, usize, RotationSO3)],
) -> Result<(Vec<RotationSO3>, Vec<f64>), CalibError> {
    // Spanning-tree initialization from camera 0.
    let mut adjacency: Vec<Vec<(usize, Matrix3<f64>)>> = vec![Vec::new(); n_cameras];
    for (i, j, r) in pairwise {
        let m = r.to_matrix();
        adjacency[*i].push((*j, m));
        adjacency[*j].push((*i, m.transpose()));
    }
    let mut rot: Vec<Option<Matrix3<f64>>> = vec![None; n_cameras];
    rot[0] = Some(Matrix3::identity());
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let ri = rot[i].unwrap();
        for (j, rij) in &adjacency[i] {
            if rot[*j].is_none() {
                rot[*j] = Some(rij * ri);
                queue.push_back(*j);
            }
        }
    }
    if let Some(missing) = rot.iter().position(|r| r.is_none()) {
        return Err(CalibError::DisconnectedGraph(missing));
    }
    let mut rot: Vec<Matrix3<f64>> = rot.into_iter().map(|r| r.unwrap()).collect();

    // Tangent-space relaxation, camera 0 pinned.
    for _ in 0..1000 {
        let mut max_update = 0.0f64;
        for i in 1..n_cameras {
            let mut sum = Vector3::zeros();
            let mut count = 0usize;
            for (a, b, r) in pairwise {
                let implied = if *b == i {
                    r.to_matrix() * rot[*a]
                } else if *a == i {
                    r.to_matrix().transpose() * rot[*b]
                } else {
                    continue;
                };
                // Residual rotation in the tangent space at rot[i].
                let w = implied * rot[i].transpose();
                if let Ok(v) = matrix_to_rodrigues(&w) {
                    sum += v;
                    count += 1;
                }
            }
            if count == 0 {
                continue;
            }
            let step = sum / count as f64;
            max_update = max_update.max(step.norm());
            rot[i] = rodrigues_to_matrix(&step) * rot[i];
        }
        if max_update < 1e-14 {
            break;
        }
    }

    let residuals: Vec<f64> = pairwise
        .iter()
        .map(|(i, j, r)| {
            let rel = rot[*j] * rot[*i].transpose();
            let delta = rel * r.to_matrix().transpose();
            let sin = Vector3::new(
                delta[(2, 1)] - delta[(1, 2)],
                delta[(0, 2)] - delta[(2, 0)],
                delta[(1, 0)] - delta[(0, 1)],
            )
            .norm()
                / 2.0;
            let cos = (delta.trace() - 1.0) / 2.0;
            sin.atan2(cos).to_degrees()
        })
        .collect();
    let rotations = rot
        .iter()
        .map(|m| RotationSO3::from_matrix(m).expect("averaged rotation"))
        .collect();
    Ok((rotations, residuals))
}

// ── Cycle-consistent correspondence merging ──────────────────────────────────

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Merges pairwise matches of one frame into cross-view tracks.
///
/// Edges are applied greedily by descending weight; an edge whose union
/// would place two instances of one view in the same track is dropped, so
/// conflicts lose their weakest links. Unmatched instances become
/// singleton tracks.
pub fn merge_correspondences(
    instances_per_view: &[usize],
    edges: &[(usize, usize, &MatchSet)],
) -> Vec<Track> {
    let n_views = instances_per_view.len();
    let mut offsets = vec![0usize; n_views + 1];
    for v in 0..n_views {
        offsets[v + 1] = offsets[v] + instances_per_view[v];
    }
    let total = offsets[n_views];
    let node = |view: usize, inst: usize| offsets[view] + inst;

    let mut weighted: Vec<(f64, usize, usize)> = Vec::new();
    for (va, vb, m) in edges {
        for &(ia, ib, w) in &m.pairs {
            if ia < instances_per_view[*va] && ib < instances_per_view[*vb] {
                weighted.push((w, node(*va, ia), node(*vb, ib)));
            }
        }
    }
    weighted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    let mut uf = UnionFind::new(total);
    // Views present in each component, to veto conflicting unions.
    let mut views_in: Vec<HashMap<usize, ()>> = (0..total)
        .map(|n| {
            let v = (0..n_views).find(|&v| n >= offsets[v] && n < offsets[v + 1]).unwrap();
            HashMap::from([(v, ())])
        })
        .collect();
    for (_, a, b) in weighted {
        let (ra, rb) = (uf.find(a), uf.find(b));
        if ra == rb {
            continue;
        }
        if views_in[ra].keys().any(|v| views_in[rb].contains_key(v)) {
            continue; // would put two instances of one view in a track
        }
        uf.union(ra, rb);
        let root = uf.find(ra);
        let merged: Vec<usize> = views_in[ra].keys().chain(views_in[rb].keys()).copied().collect();
        views_in[root] = merged.into_iter().map(|v| (v, ())).collect();
    }

    let mut groups: HashMap<usize, Track> = HashMap::new();
    for v in 0..n_views {
        for i in 0..instances_per_view[v] {
            let root = uf.find(node(v, i));
            groups.entry(root).or_default().push((v, i));
        }
    }
    let mut tracks: Vec<Track> = groups.into_values().collect();
    for t in tracks.iter_mut() {
        t.sort_unstable();
    }
    tracks.sort();
    tracks
}

// ── Bundle adjustment ────────────────────────────────────────────────────────

/// One pixel observation of a 3D point.
#[derive(Debug, Clone, Copy)]
pub struct BaObservation {
    pub camera: usize,
    pub point: usize,
    pub pixel: [f64; 2],
}

/// Bundle-adjustment outcome; `diverged` flags a run that never improved.
#[derive(Debug, Clone)]
pub struct BaResult {
    pub rotations: Vec<RotationSO3>,
    pub centers: Vec<Vector3<f64>>,
    pub points: Vec<Vector3<f64>>,
    pub initial_median_px: f64,
    pub final_median_px: f64,
    pub diverged: bool,
    pub iterations: usize,
}

const BA_HUBER_PX: f64 = 4.0;

fn project_dual<const N: usize>(
    rod: &[DualN<N>; 3],
    center: &[DualN<N>; 3],
    point: &[DualN<N>; 3],
    k: &Intrinsics,
) -> Option<[DualN<N>; 2]> {
    let r = rodrigues_to_matrix_dual(rod);
    let rel: [DualN<N>; 3] = std::array::from_fn(|i| point[i] - center[i]);
    let cam: [DualN<N>; 3] = std::array::from_fn(|i| {
        let mut s = DualN::constant(0.0);
        for j in 0..3 {
            s += r[i][j] * rel[j];
        }
        s
    });
    if cam[2].value <= 1e-9 {
        return None;
    }
    let inv_z = cam[2].recip();
    Some([
        cam[0] * inv_z * k.fx + k.cx,
        cam[1] * inv_z * k.fy + k.cy,
    ])
}

fn reproj_residuals(
    rotations: &[Vector3<f64>],
    centers: &[Vector3<f64>],
    points: &[Vector3<f64>],
    observations: &[BaObservation],
    intrinsics: &[Intrinsics],
) -> Vec<f64> {
    observations
        .iter()
        .map(|o| {
            let rod: [DualN<0>; 3] = std::array::from_fn(|i| DualN::constant(rotations[o.camera][i]));
            let c: [DualN<0>; 3] = std::array::from_fn(|i| DualN::constant(centers[o.camera][i]));
            let p: [DualN<0>; 3] = std::array::from_fn(|i| DualN::constant(points[o.point][i]));
            match project_dual(&rod, &c, &p, &intrinsics[o.camera]) {
                Some([u, v]) => {
                    let du = u.value - o.pixel[0];
                    let dv = v.value - o.pixel[1];
                    (du * du + dv * dv).sqrt()
                }
                None => f64::INFINITY,
            }
        })
        .collect()
}

fn total_cost(residuals: &[f64]) -> f64 {
    residuals
        .iter()
        .map(|&r| {
            if !r.is_finite() {
                return 1e12;
            }
            // Huber cost.
            if r <= BA_HUBER_PX {
                0.5 * r * r
            } else {
                BA_HUBER_PX * (r - 0.5 * BA_HUBER_PX)
            }
        })
        .sum()
}

/// Jointly refines camera rotations, centers, and 3D points by minimizing
/// robust reprojection error with Levenberg-Marquardt, eliminating the
/// point blocks by Schur complement. Camera 0 stays fixed.
pub fn bundle_adjust(
    init_rotations: &[RotationSO3],
    init_centers: &[Vector3<f64>],
    init_points: &[Vector3<f64>],
    observations: &[BaObservation],
    intrinsics: &[Intrinsics],
    max_iterations: usize,
) -> BaResult {
    let n_cams = init_rotations.len();
    let n_pts = init_points.len();
    let mut rotations: Vec<Vector3<f64>> = init_rotations
        .iter()
        .map(|r| Vector3::from(r.rodrigues))
        .collect();
    let mut centers = init_centers.to_vec();
    let mut points = init_points.to_vec();

    let initial_res = reproj_residuals(&rotations, &centers, &points, observations, intrinsics);
    let initial_median = median(&initial_res.iter().copied().filter(|r| r.is_finite()).collect::<Vec<_>>());
    let mut cost = total_cost(&initial_res);
    let initial_cost = cost;

    let mut best = (cost, rotations.clone(), centers.clone(), points.clone());
    let mut lambda = 1e-4;
    let cam_dof = 6 * (n_cams - 1);
    let mut iterations = 0;

    for _ in 0..max_iterations {
        iterations += 1;
        // Accumulate normal equations with the point blocks separated.
        let mut h_cc = DMatrix::<f64>::zeros(cam_dof, cam_dof);
        let mut b_c = DVector::<f64>::zeros(cam_dof);
        let mut h_pp: Vec<Matrix3<f64>> = vec![Matrix3::zeros(); n_pts];
        let mut b_p: Vec<Vector3<f64>> = vec![Vector3::zeros(); n_pts];
        let mut h_cp: HashMap<(usize, usize), nalgebra::Matrix3x6<f64>> = HashMap::new();

        for o in observations {
            let cam = o.camera;
            // Dual channels: 0..3 rodrigues, 3..6 center, 6..9 point.
            let rod: [DualN<9>; 3] =
                std::array::from_fn(|i| DualN::variable(rotations[cam][i], i));
            let cen: [DualN<9>; 3] =
                std::array::from_fn(|i| DualN::variable(centers[cam][i], 3 + i));
            let pt: [DualN<9>; 3] =
                std::array::from_fn(|i| DualN::variable(points[o.point][i], 6 + i));
            let Some([u, v]) = project_dual(&rod, &cen, &pt, &intrinsics[cam]) else {
                continue;
            };
            let res = [u.value - o.pixel[0], v.value - o.pixel[1]];
            let norm = (res[0] * res[0] + res[1] * res[1]).sqrt();
            let w = if norm <= BA_HUBER_PX {
                1.0
            } else {
                (BA_HUBER_PX / norm).sqrt()
            };
            // Rows of the weighted Jacobian.
            let jr = [u.tangent, v.tangent];
            for (row, &r_val) in jr.iter().zip(&res) {
                let jc: [f64; 6] = std::array::from_fn(|i| row[i] * w);
                let jp: [f64; 3] = std::array::from_fn(|i| row[6 + i] * w);
                let rw = r_val * w;
                // Point block.
                for a in 0..3 {
                    for b2 in 0..3 {
                        h_pp[o.point][(a, b2)] += jp[a] * jp[b2];
                    }
                    b_p[o.point][a] -= jp[a] * rw;
                }
                if cam > 0 {
                    let c0 = 6 * (cam - 1);
                    for a in 0..6 {
                        for b2 in 0..6 {
                            h_cc[(c0 + a, c0 + b2)] += jc[a] * jc[b2];
                        }
                        b_c[c0 + a] -= jc[a] * rw;
                    }
                    let e = h_cp.entry((cam, o.point)).or_insert_with(nalgebra::Matrix3x6::zeros);
                    for a in 0..3 {
                        for b2 in 0..6 {
                            e[(a, b2)] += jp[a] * jc[b2];
                        }
                    }
                }
            }
        }

        // Damping.
        for i in 0..cam_dof {
            h_cc[(i, i)] += lambda * (1.0 + h_cc[(i, i)]);
        }
        let h_pp_inv: Vec<Option<Matrix3<f64>>> = h_pp
            .iter()
            .map(|h| {
                let mut hd = *h;
                for i in 0..3 {
                    hd[(i, i)] += lambda * (1.0 + hd[(i, i)]);
                }
                hd.try_inverse()
            })
            .collect();

        // Schur complement on the points.
        let mut s = h_cc.clone();
        let mut rhs = b_c.clone();
        for ((cam, pt), e) in &h_cp {
            let Some(hinv) = h_pp_inv[*pt] else { continue };
            let c0 = 6 * (cam - 1);
            // S -= E^T Hpp^-1 E ; rhs -= E^T Hpp^-1 b_p
            let et_hinv = e.transpose() * hinv;
            let block = et_hinv * *e;
            for a in 0..6 {
                for b2 in 0..6 {
                    s[(c0 + a, c0 + b2)] -= block[(a, b2)];
                }
            }
            let corr = et_hinv * b_p[*pt];
            for a in 0..6 {
                rhs[c0 + a] -= corr[a];
            }
            // Note: cross-camera blocks of S via shared points only exist
            // between distinct cameras observing the same point.
        }
        // Off-diagonal camera-camera coupling through shared points.
        for cam_a in 1..n_cams {
            for cam_b in 1..n_cams {
                if cam_a == cam_b {
                    continue;
                }
                for pt in 0..n_pts {
                    let (Some(ea), Some(eb), Some(hinv)) = (
                        h_cp.get(&(cam_a, pt)),
                        h_cp.get(&(cam_b, pt)),
                        h_pp_inv[pt],
                    ) else {
                        continue;
                    };
                    let block = ea.transpose() * hinv * *eb;
                    let (a0, b0) = (6 * (cam_a - 1), 6 * (cam_b - 1));
                    for a in 0..6 {
                        for b2 in 0..6 {
                            s[(a0 + a, b0 + b2)] -= block[(a, b2)];
                        }
                    }
                }
            }
        }

        let Some(delta_c) = s.lu().solve(&rhs) else {
            lambda *= 10.0;
            continue;
        };

        // Back-substitute the point updates.
        let mut delta_p: Vec<Vector3<f64>> = vec![Vector3::zeros(); n_pts];
        for pt in 0..n_pts {
            let Some(hinv) = h_pp_inv[pt] else { continue };
            let mut acc = b_p[pt];
            for cam in 1..n_cams {
                if let Some(e) = h_cp.get(&(cam, pt)) {
                    let c0 = 6 * (cam - 1);
                    let dc = nalgebra::Vector6::from_fn(|i, _| delta_c[c0 + i]);
                    acc -= e * dc;
                }
            }
            delta_p[pt] = hinv * acc;
        }

        // Trial step.
        let mut new_rot = rotations.clone();
        let mut new_cen = centers.clone();
        for cam in 1..n_cams {
            let c0 = 6 * (cam - 1);
            for i in 0..3 {
                new_rot[cam][i] += delta_c[c0 + i];
                new_cen[cam][i] += delta_c[c0 + 3 + i];
            }
        }
        let new_pts: Vec<Vector3<f64>> = points
            .iter()
            .zip(&delta_p)
            .map(|(p, d)| p + d)
            .collect();
        let new_res = reproj_residuals(&new_rot, &new_cen, &new_pts, observations, intrinsics);
        let new_cost = total_cost(&new_res);
        if new_cost < cost {
            rotations = new_rot;
            centers = new_cen;
            points = new_pts;
            let improvement = (cost - new_cost) / cost.max(1e-30);
            cost = new_cost;
            if cost < best.0 {
                best = (cost, rotations.clone(), centers.clone(), points.clone());
            }
            lambda = (lambda * 0.3).max(1e-12);
            if improvement < 1e-12 {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e8 {
                break;
            }
        }
    }

    let diverged = best.0 > initial_cost;
    let (_, rot, cen, pts) = best;
    let final_res = reproj_residuals(&rot, &cen, &pts, observations, intrinsics);
    let final_median = median(&final_res.iter().copied().filter(|r| r.is_finite()).collect::<Vec<_>>());
    BaResult {
        rotations: rot
            .iter()
            .map(|r| RotationSO3 {
                rodrigues: [r[0], r[1], r[2]],
            }
            .canonical())
            .collect(),
        centers: cen,
        points: pts,
        initial_median_px: initial_median,
        final_median_px: final_median,
        diverged,
        iterations,
    }
}

// ── Multi-view driver ────────────────────────────────────────────────────────

/// Multi-view triangulation from normalized observations in ≥ 2 views.
fn triangulate_multiview(
    cams: &[(Matrix3<f64>, Vector3<f64>)],
    obs: &[(usize, [f64; 2])],
) -> Option<Vector3<f64>> {
    if obs.len() < 2 {
        return None;
    }
    let mut a = DMatrix::zeros(2 * obs.len(), 4);
    for (row, (view, xy)) in obs.iter().enumerate() {
        let (r, t) = &cams[*view];
        for c in 0..3 {
            a[(2 * row, c)] = xy[0] * r[(2, c)] - r[(0, c)];
            a[(2 * row + 1, c)] = xy[1] * r[(2, c)] - r[(1, c)];
        }
        a[(2 * row, 3)] = xy[0] * t[2] - t[0];
        a[(2 * row + 1, 3)] = xy[1] * t[2] - t[1];
    }
    let ata = a.transpose() * &a;
    let eig = nalgebra::SymmetricEigen::new(ata);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let h = eig.eigenvectors.column(order[0]);
    if h[3].abs() < 1e-12 {
        return None;
    }
    Some(Vector3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]))
}

fn pair_observations(input: &MultiViewInput, a: usize, b: usize) -> PairObservations {
    PairObservations {
        frames: input
            .frames
            .iter()
            .map(|f| (f[a].clone(), f[b].clone()))
            .collect(),
        intrinsics_a: input.intrinsics[a],
        intrinsics_b: input.intrinsics[b],
    }
}

/// Calibrates every camera pair, averages rotations, merges matches into
/// tracks, resolves translation scales on a spanning tree, and bundle
/// adjusts.
pub fn calibrate_multiview(
    input: &MultiViewInput,
    steerer: &SteererParams,
    skeleton: &Skeleton,
    config: &CalibConfig,
) -> Result<MultiViewResult, CalibError> {
    let n_views = input.intrinsics.len();
    if n_views < 2 {
        return Err(CalibError::NotEnoughData("need at least two views"));
    }

    // Pairwise calibration; failures participate only if nothing else covers
    // the pair graph.
    let mut pairwise = Vec::new();
    let mut matches_by_pair: HashMap<(usize, usize), Vec<MatchSet>> = HashMap::new();
    for a in 0..n_views {
        for b in (a + 1)..n_views {
            let obs = pair_observations(input, a, b);
            let mut cfg = config.clone();
            cfg.seed = derive_seed(config.seed, 0x5040_0000 + (a * 64 + b) as u64);
            let result = match calibrate_pair(&obs, steerer, skeleton, &cfg) {
                Ok(r) => r,
                Err(CalibError::CalibrationFailed { best, .. }) => *best,
                Err(e) => return Err(e),
            };
            // Re-evaluate matches on every frame so track merging sees the
            // full sequence.
            let (_, all_matches) =
                evaluate_pose_on_frames(&result.relative_pose, &obs, steerer, &cfg)?;
            if result.success {
                matches_by_pair.insert((a, b), all_matches);
            }
            pairwise.push(PairwiseEstimate {
                view_a: a,
                view_b: b,
                result,
            });
        }
    }

    let edges: Vec<(usize, usize, RotationSO3)> = pairwise
        .iter()
        .filter(|p| p.result.success)
        .map(|p| (p.view_a, p.view_b, p.result.relative_pose.rotation))
        .collect();
    if edges.is_empty() {
        return Err(CalibError::NoSuccessfulCandidate);
    }
    let (rotations, _residuals) = rotation_averaging(n_views, &edges)?;

    // Tracks per frame from the successful pairs' matches.
    let mut tracks: Vec<Vec<Track>> = Vec::with_capacity(input.frames.len());
    for (fi, frame) in input.frames.iter().enumerate() {
        let counts: Vec<usize> = frame.iter().map(|v| v.len()).collect();
        let frame_edges: Vec<(usize, usize, &MatchSet)> = matches_by_pair
            .iter()
            .map(|((a, b), ms)| (*a, *b, &ms[fi]))
            .collect();
        tracks.push(merge_correspondences(&counts, &frame_edges));
    }

    // Spanning tree for camera centers with scale resolution.
    let mut centers: Vec<Option<Vector3<f64>>> = vec![None; n_views];
    centers[0] = Some(Vector3::zeros());
    let mut placed = vec![0usize];
    let successful: Vec<&PairwiseEstimate> =
        pairwise.iter().filter(|p| p.result.success).collect();
    let mut first_edge = true;
    while placed.len() < n_views {
        // Next edge connecting a placed camera to an unplaced one.
        let Some(est) = successful.iter().find(|p| {
            (centers[p.view_a].is_some() && centers[p.view_b].is_none())
                || (centers[p.view_b].is_some() && centers[p.view_a].is_none())
        }) else {
            let missing = centers.iter().position(|c| c.is_none()).unwrap();
            return Err(CalibError::DisconnectedGraph(missing));
        };
        let (known, new, flip) = if centers[est.view_a].is_some() {
            (est.view_a, est.view_b, false)
        } else {
            (est.view_b, est.view_a, true)
        };
        // Relative pose oriented known -> new, rebuilt from the averaged
        // global rotations with the measured translation direction.
        let r_rel = rotations[new].to_matrix() * rotations[known].to_matrix().transpose();
        let t_dir = {
            let t = Vector3::from(est.result.relative_pose.translation);
            if flip {
                // x_a = R^T x_b - R^T t
                -(est.result.relative_pose.rotation.to_matrix().transpose() * t).normalize()
            } else {
                t
            }
        };
        let scale = if first_edge {
            1.0
        } else {
            // Shared-track depth consensus between the placed rig and the
            // unit-scale pair frame.
            let mut ratios = Vec::new();
            let placed_cams: Vec<(Matrix3<f64>, Vector3<f64>)> = (0..n_views)
                .map(|v| {
                    let r = rotations[v].to_matrix();
                    let c = centers[v].unwrap_or_else(Vector3::zeros);
                    (r, -(r * c))
                })
                .collect();
            let pair_cams = [
                (Matrix3::identity(), Vector3::zeros()),
                (r_rel, t_dir),
            ];
            for (fi, frame_tracks) in tracks.iter().enumerate() {
                for track in frame_tracks {
                    let has_known = track.iter().find(|(v, _)| *v == known);
                    let has_new = track.iter().find(|(v, _)| *v == new);
                    let (Some(&(_, ik)), Some(&(_, inew))) = (has_known, has_new) else {
                        continue;
                    };
                    // Observations in already-placed views.
                    let mut global_obs = Vec::new();
                    for &(v, inst) in track {
                        if centers[v].is_some() {
                            let pose = &input.frames[fi][v][inst];
                            let norm = pixel_to_normalized(pose, &input.intrinsics[v]);
                            for j in 0..norm.n_joints() {
                                if norm.visible[j] {
                                    global_obs.push((j, v, norm.coords[j]));
                                }
                            }
                        }
                    }
                    let pose_k = pixel_to_normalized(
                        &input.frames[fi][known][ik],
                        &input.intrinsics[known],
                    );
                    let pose_n = pixel_to_normalized(
                        &input.frames[fi][new][inew],
                        &input.intrinsics[new],
                    );
                    for j in 0..pose_k.n_joints() {
                        if !(pose_k.visible[j] && pose_n.visible[j]) {
                            continue;
                        }
                        let joint_obs: Vec<(usize, [f64; 2])> = global_obs
                            .iter()
                            .filter(|(jj, _, _)| *jj == j)
                            .map(|(_, v, xy)| (*v, *xy))
                            .collect();
                        if joint_obs.len() < 2 {
                            continue;
                        }
                        let Some(xg) = triangulate_multiview(&placed_cams, &joint_obs) else {
                            continue;
                        };
                        let local_obs =
                            [(0usize, pose_k.coords[j]), (1usize, pose_n.coords[j])];
                        let Some(xl) = triangulate_multiview(&pair_cams, &local_obs) else {
                            continue;
                        };
                        // Depth from the known camera in both frames.
                        let depth_global =
                            (placed_cams[known].0 * xg + placed_cams[known].1).z;
                        let depth_local = xl.z;
                        if depth_local > 1e-9 && depth_global > 1e-9 {
                            ratios.push(depth_global / depth_local);
                        }
                    }
                }
            }
            if ratios.is_empty() {
                1.0
            } else {
                median(&ratios)
            }
        };
        first_edge = false;
        // C_new = C_known - s R_new^T t_dir.
        let c_new =
            centers[known].unwrap() - rotations[new].to_matrix().transpose() * (t_dir * scale);
        centers[new] = Some(c_new);
        placed.push(new);
    }
    let mut centers: Vec<Vector3<f64>> = centers.into_iter().map(|c| c.unwrap()).collect();

    // Gauge: unit distance camera 0 -> camera 1.
    let d01 = (centers[1] - centers[0]).norm();
    if d01 > 1e-12 {
        for c in centers.iter_mut() {
            *c /= d01;
        }
    }

    // Build BA observations: one 3D point per (frame, track, joint) seen in
    // at least two views.
    let cams_rt: Vec<(Matrix3<f64>, Vector3<f64>)> = (0..n_views)
        .map(|v| {
            let r = rotations[v].to_matrix();
            (r, -(r * centers[v]))
        })
        .collect();
    let mut points = Vec::new();
    let mut observations = Vec::new();
    for (fi, frame_tracks) in tracks.iter().enumerate() {
        for track in frame_tracks {
            if track.len() < 2 {
                continue;
            }
            let n_joints = skeleton.n_joints();
            for j in 0..n_joints {
                let mut norm_obs = Vec::new();
                let mut px_obs = Vec::new();
                for &(v, inst) in track {
                    let pose = &input.frames[fi][v][inst];
                    if pose.visible[j] {
                        let norm = pixel_to_normalized(pose, &input.intrinsics[v]);
                        norm_obs.push((v, norm.coords[j]));
                        px_obs.push((v, pose.coords[j]));
                    }
                }
                if norm_obs.len() < 2 {
                    continue;
                }
                let Some(x) = triangulate_multiview(&cams_rt, &norm_obs) else {
                    continue;
                };
                let pid = points.len();
                points.push(x);
                for (v, px) in px_obs {
                    observations.push(BaObservation {
                        camera: v,
                        point: pid,
                        pixel: px,
                    });
                }
            }
        }
    }
    if points.is_empty() {
        return Err(CalibError::NotEnoughData("no multi-view tracks to adjust"));
    }

    let ba = bundle_adjust(
        &rotations,
        &centers,
        &points,
        &observations,
        &input.intrinsics,
        30,
    );

    // Re-fix the gauge after refinement.
    let mut out_centers = ba.centers.clone();
    let shift = out_centers[0];
    for c in out_centers.iter_mut() {
        *c -= shift;
    }
    let d01 = out_centers[1].norm();
    if d01 > 1e-12 {
        for c in out_centers.iter_mut() {
            *c /= d01;
        }
    }

    Ok(MultiViewResult {
        rotations: ba.rotations.clone(),
        positions: out_centers.iter().map(|c| [c.x, c.y, c.z]).collect(),
        pairwise,
        tracks,
        pre_ba_median_e2d_px: ba.initial_median_px,
        post_ba_median_e2d_px: ba.final_median_px,
        ba_diverged: ba.diverged,
    })
}
