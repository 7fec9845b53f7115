//! Differentiable cross-view instance matching.
//!
//! A steered pose is compared against every candidate in the other view by
//! mean joint distance, mapped to a similarity in `(0, 1]`, and soft-assigned
//! by log-domain Sinkhorn normalization with dummy bins absorbing unmatched
//! instances. The matching loss and the similarities stay differentiable in
//! the rotation through [`Dual3`] values, so hard matches can be extracted
//! while gradients flow through the soft assignment.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{logsumexp, Dual3};
use crate::pose::Pose2D;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("poses share no visible joints")]
    NoCommonJoints,
    #[error("no visible joints in target")]
    NoVisibleJoints,
    #[error("joint counts differ: {0} vs {1}")]
    JointCountMismatch(usize, usize),
}

/// Default similarity scale parameter.
pub const DEFAULT_ALPHA: f64 = 3.0;
/// Default similarity assigned to the dummy bins.
pub const DEFAULT_DUMMY_SCORE: f64 = 0.1;
/// Default number of Sinkhorn sweeps.
pub const DEFAULT_SINKHORN_ITERS: usize = 100;

/// Dense matrix of dual numbers; rows index the steered view.
#[derive(Debug, Clone)]
pub struct DualMatrix {
    pub data: Vec<Dual3>,
    pub rows: usize,
    pub cols: usize,
}

impl DualMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: vec![Dual3::constant(0.0); rows * cols],
            rows,
            cols,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Dual3 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Dual3) {
        self.data[i * self.cols + j] = v;
    }

    pub fn values(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.rows, self.cols), |(i, j)| self.get(i, j).value)
    }
}

/// Pairwise similarities between steered poses and observed poses.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    pub values: DualMatrix,
    pub alpha: f64,
}

/// Soft assignment including one dummy row and column.
#[derive(Debug, Clone)]
pub struct AssignmentMatrix {
    /// `(n+1) x (m+1)`; the last row/column are the dummy bins.
    pub weights: DualMatrix,
    pub n_iterations: usize,
}

impl AssignmentMatrix {
    pub fn n_real_rows(&self) -> usize {
        self.weights.rows - 1
    }

    pub fn n_real_cols(&self) -> usize {
        self.weights.cols - 1
    }
}

/// Hard one-to-one matches extracted from an assignment.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MatchSet {
    /// `(left instance, right instance, weight)` triples.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_left: Vec<usize>,
    pub unmatched_right: Vec<usize>,
}

/// A steered pose: predicted joint positions carrying rotation gradients.
#[derive(Debug, Clone)]
pub struct SteeredPose {
    pub coords: Vec<[Dual3; 2]>,
}

impl SteeredPose {
    pub fn from_pose(p: &Pose2D) -> Self {
        Self {
            coords: p
                .coords
                .iter()
                .map(|c| [Dual3::constant(c[0]), Dual3::constant(c[1])])
                .collect(),
        }
    }
}

/// Mean L2 distance over joints visible in `p`, differentiable in `q`.
///
/// The steered pose predicts every joint, so the jointly visible set is
/// exactly the target's visible set.
pub fn pose_dissimilarity_dual(q: &SteeredPose, p: &Pose2D) -> Result<Dual3, MatchError> {
    if q.coords.len() != p.n_joints() {
        return Err(MatchError::JointCountMismatch(q.coords.len(), p.n_joints()));
    }
    let mut sum = Dual3::constant(0.0);
    let mut count = 0usize;
    for (i, c) in q.coords.iter().enumerate() {
        if p.visible[i] {
            let dx = c[0] - p.coords[i][0];
            let dy = c[1] - p.coords[i][1];
            sum += (dx * dx + dy * dy).sqrt();
            count += 1;
        }
    }
    if count == 0 {
        return Err(MatchError::NoCommonJoints);
    }
    Ok(sum / count as f64)
}

/// Mean L2 distance over jointly visible joints of two observed poses.
pub fn pose_dissimilarity(q: &Pose2D, p: &Pose2D) -> Result<f64, MatchError> {
    if q.n_joints() != p.n_joints() {
        return Err(MatchError::JointCountMismatch(q.n_joints(), p.n_joints()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..q.n_joints() {
        if q.visible[i] && p.visible[i] {
            let dx = q.coords[i][0] - p.coords[i][0];
            let dy = q.coords[i][1] - p.coords[i][1];
            sum += (dx * dx + dy * dy).sqrt();
            count += 1;
        }
    }
    if count == 0 {
        return Err(MatchError::NoCommonJoints);
    }
    Ok(sum / count as f64)
}

/// Similarity `2 / (1 + exp(alpha * d))`, strictly decreasing in `d`.
pub fn similarity_dual(d: Dual3, alpha: f64) -> Dual3 {
    Dual3::constant(2.0) / ((d * alpha).exp() + 1.0)
}

/// Value-level similarity between two observed poses.
pub fn similarity(q: &Pose2D, p: &Pose2D, alpha: f64) -> Result<f64, MatchError> {
    let d = pose_dissimilarity(q, p)?;
    Ok(2.0 / (1.0 + (alpha * d).exp()))
}

/// Builds the similarity matrix between steered and observed poses.
pub fn similarity_matrix(
    steered: &[SteeredPose],
    observed: &[Pose2D],
    alpha: f64,
) -> Result<SimilarityMatrix, MatchError> {
    let mut values = DualMatrix::zeros(steered.len(), observed.len());
    for (i, q) in steered.iter().enumerate() {
        for (j, p) in observed.iter().enumerate() {
            let d = pose_dissimilarity_dual(q, p)?;
            values.set(i, j, similarity_dual(d, alpha));
        }
    }
    Ok(SimilarityMatrix { values, alpha })
}

/// Log-domain Sinkhorn normalization of the similarity matrix augmented
/// with a dummy row and column at `dummy_score`.
///
/// Marginals: each real row and column carries unit mass; the dummy row and
/// column absorb the counts of the opposite side, so unequal instance
/// counts remain balanced. Rows are normalized last, so every non-dummy row
/// sums to one after the final sweep.
pub fn sinkhorn(scores: &SimilarityMatrix, dummy_score: f64, n_iters: usize) -> AssignmentMatrix {
    sinkhorn_with_temperature(scores, dummy_score, n_iters, 1.0)
}

/// [`sinkhorn`] with a sharpness temperature: log-similarities are divided
/// by `temperature` before normalization, so values below one concentrate
/// the assignment while leaving the optimum unchanged.
pub fn sinkhorn_with_temperature(
    scores: &SimilarityMatrix,
    dummy_score: f64,
    n_iters: usize,
    temperature: f64,
) -> AssignmentMatrix {
    assert!(n_iters >= 1, "need at least one Sinkhorn sweep");
    assert!(temperature > 0.0, "temperature must be positive");
    let n = scores.values.rows;
    let m = scores.values.cols;
    let inv_t = 1.0 / temperature;
    let log_dummy = Dual3::constant(dummy_score.ln() * inv_t);

    // Augmented log-kernel.
    let mut log_k = DualMatrix::zeros(n + 1, m + 1);
    for i in 0..n {
        for j in 0..m {
            log_k.set(i, j, scores.values.get(i, j).ln() * inv_t);
        }
    }
    for i in 0..=n {
        log_k.set(i, m, log_dummy);
    }
    for j in 0..=m {
        log_k.set(n, j, log_dummy);
    }

    let log_mu: Vec<f64> = (0..=n)
        .map(|i| if i < n { 0.0 } else { (m as f64).max(1.0).ln() })
        .collect();
    let log_nu: Vec<f64> = (0..=m)
        .map(|j| if j < m { 0.0 } else { (n as f64).max(1.0).ln() })
        .collect();

    let mut u = vec![Dual3::constant(0.0); n + 1];
    let mut v = vec![Dual3::constant(0.0); m + 1];
    let mut col_buf = vec![Dual3::constant(0.0); n + 1];
    let mut row_buf = vec![Dual3::constant(0.0); m + 1];
    for _ in 0..n_iters {
        for j in 0..=m {
            for i in 0..=n {
                col_buf[i] = log_k.get(i, j) + u[i];
            }
            v[j] = -logsumexp(&col_buf) + log_nu[j];
        }
        for i in 0..=n {
            for j in 0..=m {
                row_buf[j] = log_k.get(i, j) + v[j];
            }
            u[i] = -logsumexp(&row_buf) + log_mu[i];
        }
    }

    let mut weights = DualMatrix::zeros(n + 1, m + 1);
    for i in 0..=n {
        for j in 0..=m {
            weights.set(i, j, (log_k.get(i, j) + u[i] + v[j]).exp());
        }
    }
    AssignmentMatrix {
        weights,
        n_iterations: n_iters,
    }
}

/// Matching loss for one steering direction: sum of `w * (1 - s)` over the
/// non-dummy cells.
pub fn matching_loss(assignment: &AssignmentMatrix, similarities: &SimilarityMatrix) -> Dual3 {
    let n = assignment.n_real_rows();
    let m = assignment.n_real_cols();
    assert_eq!(n, similarities.values.rows);
    assert_eq!(m, similarities.values.cols);
    let mut loss = Dual3::constant(0.0);
    for i in 0..n {
        for j in 0..m {
            let w = assignment.weights.get(i, j);
            let s = similarities.values.get(i, j);
            loss += w * (-s + 1.0);
        }
    }
    loss
}

/// Average of the two directional matching losses (view swap symmetry).
pub fn bidirectional_matching_loss(
    fwd: (&AssignmentMatrix, &SimilarityMatrix),
    bwd: (&AssignmentMatrix, &SimilarityMatrix),
) -> Dual3 {
    (matching_loss(fwd.0, fwd.1) + matching_loss(bwd.0, bwd.1)) * 0.5
}

/// Extracts hard one-to-one matches from a soft assignment.
///
/// A pair is kept when its cell is the maximum of its row (dummy included),
/// additionally the maximum of its column when `mutual` is set, and its
/// weight reaches `min_weight`. Collisions are resolved greedily by weight.
pub fn extract_matches(
    assignment: &AssignmentMatrix,
    min_weight: f64,
    mutual: bool,
) -> MatchSet {
    let n = assignment.n_real_rows();
    let m = assignment.n_real_cols();
    let w = &assignment.weights;
    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..n {
        let mut best_j = 0usize;
        let mut best = f64::NEG_INFINITY;
        for j in 0..=m {
            let wij = w.get(i, j).value;
            if wij > best {
                best = wij;
                best_j = j;
            }
        }
        if best_j == m || best < min_weight {
            continue; // row prefers the dummy bin or is too weak
        }
        if mutual {
            let col_best = (0..=n)
                .map(|r| w.get(r, best_j).value)
                .fold(f64::NEG_INFINITY, f64::max);
            if w.get(i, best_j).value < col_best {
                continue;
            }
        }
        candidates.push((i, best_j, best));
    }
    candidates.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
    let mut used_left = vec![false; n];
    let mut used_right = vec![false; m];
    let mut pairs = Vec::new();
    for (i, j, wij) in candidates {
        if !used_left[i] && !used_right[j] {
            used_left[i] = true;
            used_right[j] = true;
            pairs.push((i, j, wij));
        }
    }
    pairs.sort_by_key(|p| p.0);
    MatchSet {
        pairs,
        unmatched_left: (0..n).filter(|&i| !used_left[i]).collect(),
        unmatched_right: (0..m).filter(|&j| !used_right[j]).collect(),
    }
}
