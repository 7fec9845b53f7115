//! Articulation classes: named joints and their parent hierarchy.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SkeletonError {
    #[error("skeleton needs at least 3 joints, got {0}")]
    TooFewJoints(usize),
    #[error("joint name {0:?} appears more than once")]
    DuplicateJoint(String),
    #[error("parent list length {parents} does not match joint count {joints}")]
    LengthMismatch { parents: usize, joints: usize },
    #[error("joint {index} has parent {parent}, which is not -1 or a smaller index")]
    BadParent { index: usize, parent: i64 },
}

/// Named joints with a parent hierarchy defining an articulation class.
///
/// Joints are topologically ordered: every parent index is smaller than its
/// child's index, with `-1` marking roots, so the parent array always forms
/// a forest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Skeleton {
    pub name: String,
    #[serde(rename = "joints")]
    pub joint_names: Vec<String>,
    #[serde(rename = "parents")]
    pub parent_index: Vec<i64>,
}

impl Skeleton {
    pub fn new(
        name: impl Into<String>,
        joint_names: Vec<String>,
        parent_index: Vec<i64>,
    ) -> Result<Self, SkeletonError> {
        let s = Self {
            name: name.into(),
            joint_names,
            parent_index,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SkeletonError> {
        let n = self.joint_names.len();
        if n < 3 {
            return Err(SkeletonError::TooFewJoints(n));
        }
        if self.parent_index.len() != n {
            return Err(SkeletonError::LengthMismatch {
                parents: self.parent_index.len(),
                joints: n,
            });
        }
        let mut seen = std::collections::HashSet::new();
        for j in &self.joint_names {
            if !seen.insert(j.as_str()) {
                return Err(SkeletonError::DuplicateJoint(j.clone()));
            }
        }
        for (i, &p) in self.parent_index.iter().enumerate() {
            if p != -1 && (p < 0 || p as usize >= i) {
                return Err(SkeletonError::BadParent {
                    index: i,
                    parent: p,
                });
            }
        }
        Ok(())
    }

    pub fn n_joints(&self) -> usize {
        self.joint_names.len()
    }

    /// Content hash identifying the articulation class across files.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.name.as_bytes());
        for (j, p) in self.joint_names.iter().zip(&self.parent_index) {
            h.update([0u8]);
            h.update(j.as_bytes());
            h.update(p.to_le_bytes());
        }
        let digest = h.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// The fixed 16-joint quadruped used by the procedural pose sampler.
pub fn quadruped_skeleton() -> Skeleton {
    let joints = [
        "pelvis",
        "spine_mid",
        "chest",
        "neck",
        "head",
        "tail_tip",
        "lf_upper",
        "lf_paw",
        "rf_upper",
        "rf_paw",
        "lh_upper",
        "lh_paw",
        "rh_upper",
        "rh_paw",
        "left_ear",
        "right_ear",
    ];
    let parents = vec![-1, 0, 1, 2, 3, 0, 2, 6, 2, 8, 0, 10, 0, 12, 4, 4];
    Skeleton::new(
        "quadruped16",
        joints.iter().map(|s| s.to_string()).collect(),
        parents,
    )
    .expect("builtin skeleton is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_quadruped_is_valid() {
        let s = quadruped_skeleton();
        assert_eq!(s.n_joints(), 16);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn rejects_cycles_and_forward_parents() {
        let err = Skeleton::new(
            "bad",
            vec!["a".into(), "b".into(), "c".into()],
            vec![-1, 2, 1],
        );
        assert!(matches!(err, Err(SkeletonError::BadParent { index: 1, .. })));
    }

    #[test]
    fn rejects_duplicate_joint_names() {
        let err = Skeleton::new(
            "bad",
            vec!["a".into(), "a".into(), "c".into()],
            vec![-1, 0, 1],
        );
        assert!(matches!(err, Err(SkeletonError::DuplicateJoint(_))));
    }

    #[test]
    fn hash_changes_with_structure() {
        let a = quadruped_skeleton();
        let mut b = a.clone();
        b.parent_index[5] = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
