//! Evaluation quantities: angular pose errors, matching precision, and the
//! RRA/RTA/AUC accuracy fractions.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matching::MatchSet;
use crate::rotation::RotationSO3;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input")]
    EmptyInput,
    #[error("zero-length translation vector")]
    ZeroVector,
}

/// Camera-pair errors plus the matching precision.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PairPoseError {
    pub e_rot_deg: f64,
    pub e_trans_deg: f64,
    pub median_reproj_px: f64,
    /// `None` when no matches were predicted (excluded from averages).
    pub match_precision: Option<f64>,
}

/// Geodesic rotation error in degrees, in `[0, 180]`.
pub fn rotation_error_deg(r_est: &RotationSO3, r_gt: &RotationSO3) -> f64 {
    r_est.angle_to_deg(r_gt)
}

/// Angle between translation directions in degrees; scale-invariant.
pub fn translation_error_deg(
    t_est: &Vector3<f64>,
    t_gt: &Vector3<f64>,
) -> Result<f64, MetricsError> {
    let (ne, ng) = (t_est.norm(), t_gt.norm());
    if ne < 1e-15 || ng < 1e-15 {
        return Err(MetricsError::ZeroVector);
    }
    let cos = (t_est.dot(t_gt) / (ne * ng)).clamp(-1.0, 1.0);
    Ok(cos.acos().to_degrees())
}

/// Fraction of predicted pairs that are correct, or `None` when nothing
/// was predicted (a no-match outcome, excluded from averages).
pub fn match_precision(
    predicted: &MatchSet,
    ground_truth: &[(usize, usize)],
) -> Option<f64> {
    if predicted.pairs.is_empty() {
        return None;
    }
    let correct = predicted
        .pairs
        .iter()
        .filter(|(a, b, _)| ground_truth.contains(&(*a, *b)))
        .count();
    Some(correct as f64 / predicted.pairs.len() as f64)
}

/// RRA@tau, RTA@tau, and AUC@tau = min(RRA, RTA) over a set of pair errors.
pub fn rra_rta_auc(
    errors: &[PairPoseError],
    tau_deg: f64,
) -> Result<(f64, f64, f64), MetricsError> {
    if errors.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = errors.len() as f64;
    let rra = errors.iter().filter(|e| e.e_rot_deg < tau_deg).count() as f64 / n;
    let rta = errors.iter().filter(|e| e.e_trans_deg < tau_deg).count() as f64 / n;
    Ok((rra, rta, rra.min(rta)))
}

/// Conventional alternative: AUC as the mean over thresholds `1..=tau` of
/// min(RRA@t, RTA@t); kept behind its own function for cross-paper
/// comparisons.
pub fn auc_threshold_integrated(
    errors: &[PairPoseError],
    tau_deg: f64,
) -> Result<f64, MetricsError> {
    if errors.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let steps = tau_deg.max(1.0).round() as usize;
    let mut acc = 0.0;
    for k in 1..=steps {
        let (_, _, auc) = rra_rta_auc(errors, k as f64)?;
        acc += auc;
    }
    Ok(acc / steps as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_rotations_have_zero_error() {
        let r = RotationSO3::new([0.3, -0.2, 0.5]);
        assert!(rotation_error_deg(&r, &r) < 1e-9);
    }

    #[test]
    fn ten_degree_rotation_about_z() {
        let r = RotationSO3::new([0.0, 0.0, 10.0f64.to_radians()]);
        assert_relative_eq!(
            rotation_error_deg(&r, &RotationSO3::identity()),
            10.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn matches_trace_formula_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let a = RotationSO3::random_uniform(&mut rng);
            let b = RotationSO3::random_uniform(&mut rng);
            let rel = a.to_matrix() * b.to_matrix().transpose();
            let oracle = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos().to_degrees();
            assert_relative_eq!(rotation_error_deg(&a, &b), oracle, epsilon = 1e-9);
        }
    }

    #[test]
    fn rotation_error_is_a_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let a = RotationSO3::random_uniform(&mut rng);
            let b = RotationSO3::random_uniform(&mut rng);
            let c = RotationSO3::random_uniform(&mut rng);
            let (ab, ba) = (rotation_error_deg(&a, &b), rotation_error_deg(&b, &a));
            assert_relative_eq!(ab, ba, epsilon = 1e-6);
            let (ac, cb) = (rotation_error_deg(&a, &c), rotation_error_deg(&c, &b));
            assert!(ab <= ac + cb + 1e-6, "triangle inequality violated");
        }
    }

    #[test]
    fn translation_error_cases() {
        let t = Vector3::new(1.0, 0.0, 0.0);
        assert_relative_eq!(
            translation_error_deg(&t, &(t * 7.5)).unwrap(),
            0.0,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            translation_error_deg(&t, &Vector3::new(0.0, 2.0, 0.0)).unwrap(),
            90.0,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            translation_error_deg(&t, &(-t * 0.1)).unwrap(),
            180.0,
            epsilon = 1e-9
        );
        assert!(matches!(
            translation_error_deg(&t, &Vector3::zeros()),
            Err(MetricsError::ZeroVector)
        ));
    }

    fn match_set(pairs: &[(usize, usize)]) -> MatchSet {
        MatchSet {
            pairs: pairs.iter().map(|&(a, b)| (a, b, 1.0)).collect(),
            unmatched_left: Vec::new(),
            unmatched_right: Vec::new(),
        }
    }

    #[test]
    fn precision_counts_correct_pairs() {
        let gt = vec![(0, 0), (1, 1), (2, 2)];
        assert_relative_eq!(
            match_precision(&match_set(&[(0, 0), (1, 1), (2, 2)]), &gt).unwrap(),
            1.0
        );
        assert_relative_eq!(
            match_precision(&match_set(&[(0, 0), (1, 1), (2, 0)]), &gt).unwrap(),
            2.0 / 3.0
        );
        assert!(match_precision(&match_set(&[]), &gt).is_none());
    }

    #[test]
    fn accuracy_fractions_and_min_rule() {
        let mk = |r: f64, t: f64| PairPoseError {
            e_rot_deg: r,
            e_trans_deg: t,
            median_reproj_px: 0.0,
            match_precision: None,
        };
        let all_good = vec![mk(1.0, 2.0), mk(3.0, 4.0)];
        assert_eq!(rra_rta_auc(&all_good, 20.0).unwrap(), (1.0, 1.0, 1.0));

        // RRA 0.8, RTA 0.6 -> AUC 0.6.
        let mixed: Vec<PairPoseError> = (0..10)
            .map(|i| mk(if i < 8 { 5.0 } else { 50.0 }, if i < 6 { 5.0 } else { 50.0 }))
            .collect();
        let (rra, rta, auc) = rra_rta_auc(&mixed, 20.0).unwrap();
        assert_relative_eq!(rra, 0.8);
        assert_relative_eq!(rta, 0.6);
        assert_relative_eq!(auc, 0.6);

        // Hand count at tau = 20.
        let hand = vec![mk(5.0, 10.0), mk(25.0, 40.0)];
        let (rra, rta, auc) = rra_rta_auc(&hand, 20.0).unwrap();
        assert_eq!((rra, rta, auc), (0.5, 0.5, 0.5));

        assert!(matches!(
            rra_rta_auc(&[], 20.0),
            Err(MetricsError::EmptyInput)
        ));
    }

    #[test]
    fn gauge_invariance_of_pair_errors() {
        // Applying one global rotation to both estimate and ground truth
        // leaves the errors unchanged.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let est = RotationSO3::random_uniform(&mut rng);
            let gt = RotationSO3::random_uniform(&mut rng);
            let g = RotationSO3::random_uniform(&mut rng);
            let e0 = rotation_error_deg(&est, &gt);
            let e1 = rotation_error_deg(&est.compose(&g), &gt.compose(&g));
            assert_relative_eq!(e0, e1, epsilon = 1e-9);
            let t_est = Vector3::new(0.3, -0.4, 0.8);
            let t_gt = Vector3::new(0.1, 0.9, -0.2);
            let gm = g.to_matrix();
            let d0 = translation_error_deg(&t_est, &t_gt).unwrap();
            let d1 = translation_error_deg(&(gm * t_est), &(gm * t_gt)).unwrap();
            assert_relative_eq!(d0, d1, epsilon = 1e-9);
        }
    }
}
