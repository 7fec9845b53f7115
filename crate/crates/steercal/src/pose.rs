//! 2D/3D poses with visibility masks and the pose-centric normalizer.
//!
//! Coordinates of invisible joints are stored as zero and excluded from
//! every reduction. Frame tags track which coordinate system a pose lives
//! in so conversions cannot be silently skipped.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PoseError {
    #[error("pose needs at least {needed} visible joints, got {got}")]
    TooFewVisible { needed: usize, got: usize },
    #[error("degenerate pose: all visible joints coincide")]
    DegeneratePose,
    #[error("pose has {got} joints, expected {expected}")]
    JointCountMismatch { expected: usize, got: usize },
}

/// Coordinate system of a 2D pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordFrame2D {
    /// Image pixels.
    Pixel,
    /// Normalized camera coordinates `(x - cx)/fx, (y - cy)/fy`.
    Normalized,
    /// Centered at the visible-joint mean and scaled by the RMS radius.
    PoseCentric,
}

/// Coordinate system of a 3D pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordFrame3D {
    World,
    Camera,
}

/// Per-joint 2D coordinates with a visibility mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub coords: Vec<[f64; 2]>,
    pub visible: Vec<bool>,
    pub frame: CoordFrame2D,
}

impl Pose2D {
    /// Builds a pose, zeroing the coordinates of invisible joints.
    pub fn new(mut coords: Vec<[f64; 2]>, visible: Vec<bool>, frame: CoordFrame2D) -> Self {
        assert_eq!(coords.len(), visible.len(), "coords/visible length mismatch");
        for (c, &v) in coords.iter_mut().zip(&visible) {
            if !v {
                *c = [0.0, 0.0];
            }
        }
        Self {
            coords,
            visible,
            frame,
        }
    }

    pub fn fully_visible(coords: Vec<[f64; 2]>, frame: CoordFrame2D) -> Self {
        let visible = vec![true; coords.len()];
        Self::new(coords, visible, frame)
    }

    pub fn n_joints(&self) -> usize {
        self.coords.len()
    }

    pub fn n_visible(&self) -> usize {
        self.visible.iter().filter(|&&v| v).count()
    }

    pub fn joint(&self, i: usize) -> Vector2<f64> {
        Vector2::new(self.coords[i][0], self.coords[i][1])
    }
}

/// Per-joint 3D coordinates with a visibility mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose3D {
    pub coords: Vec<[f64; 3]>,
    pub visible: Vec<bool>,
    pub frame: CoordFrame3D,
}

impl Pose3D {
    pub fn new(mut coords: Vec<[f64; 3]>, visible: Vec<bool>, frame: CoordFrame3D) -> Self {
        assert_eq!(coords.len(), visible.len(), "coords/visible length mismatch");
        for (c, &v) in coords.iter_mut().zip(&visible) {
            if !v {
                *c = [0.0; 3];
            }
        }
        Self {
            coords,
            visible,
            frame,
        }
    }

    pub fn fully_visible(coords: Vec<[f64; 3]>, frame: CoordFrame3D) -> Self {
        let visible = vec![true; coords.len()];
        Self::new(coords, visible, frame)
    }

    pub fn n_joints(&self) -> usize {
        self.coords.len()
    }

    pub fn joint(&self, i: usize) -> Vector3<f64> {
        Vector3::new(self.coords[i][0], self.coords[i][1], self.coords[i][2])
    }
}

/// Result of pose-centric normalization; `center` and `scale` invert it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseNormalization {
    pub center: [f64; 2],
    pub scale: f64,
}

/// Centers the visible joints at their mean and divides by the RMS distance
/// to the mean. Invisible joints stay zero.
pub fn normalize_pose_centric(p: &Pose2D) -> Result<(Pose2D, PoseNormalization), PoseError> {
    let visible_joints: Vec<usize> = (0..p.n_joints()).filter(|&i| p.visible[i]).collect();
    if visible_joints.len() < 2 {
        return Err(PoseError::TooFewVisible {
            needed: 2,
            got: visible_joints.len(),
        });
    }
    let mut center = Vector2::zeros();
    for &i in &visible_joints {
        center += p.joint(i);
    }
    center /= visible_joints.len() as f64;
    let mut rms = 0.0;
    for &i in &visible_joints {
        rms += (p.joint(i) - center).norm_squared();
    }
    let scale = (rms / visible_joints.len() as f64).sqrt();
    if scale <= 0.0 {
        return Err(PoseError::DegeneratePose);
    }
    let coords = (0..p.n_joints())
        .map(|i| {
            if p.visible[i] {
                let q = (p.joint(i) - center) / scale;
                [q.x, q.y]
            } else {
                [0.0, 0.0]
            }
        })
        .collect();
    Ok((
        Pose2D::new(coords, p.visible.clone(), CoordFrame2D::PoseCentric),
        PoseNormalization {
            center: [center.x, center.y],
            scale,
        },
    ))
}

/// Undoes [`normalize_pose_centric`].
pub fn denormalize_pose_centric(
    p: &Pose2D,
    norm: &PoseNormalization,
    frame: CoordFrame2D,
) -> Pose2D {
    let coords = (0..p.n_joints())
        .map(|i| {
            if p.visible[i] {
                [
                    p.coords[i][0] * norm.scale + norm.center[0],
                    p.coords[i][1] * norm.scale + norm.center[1],
                ]
            } else {
                [0.0, 0.0]
            }
        })
        .collect();
    Pose2D::new(coords, p.visible.clone(), frame)
}
