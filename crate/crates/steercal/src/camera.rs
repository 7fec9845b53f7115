//! Camera models and projection.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::{CoordFrame2D, CoordFrame3D, Pose2D, Pose3D};
use crate::rotation::RigidTransform;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("joints behind the camera: {0:?}")]
    BehindCamera(Vec<usize>),
    #[error("pose frame must be camera, got world")]
    NotInCameraFrame,
    #[error("perspective intrinsics required")]
    MissingIntrinsics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionKind {
    Perspective,
    Orthographic,
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Camera with projection kind, intrinsics, and a world-to-camera pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub kind: ProjectionKind,
    pub intrinsics: Intrinsics,
    pub pose: RigidTransform,
}

impl CameraModel {
    pub fn perspective(intrinsics: Intrinsics, pose: RigidTransform) -> Self {
        assert!(intrinsics.fx > 0.0 && intrinsics.fy > 0.0, "fx, fy must be positive");
        Self {
            kind: ProjectionKind::Perspective,
            intrinsics,
            pose,
        }
    }

    pub fn orthographic(pose: RigidTransform) -> Self {
        Self {
            kind: ProjectionKind::Orthographic,
            intrinsics: Intrinsics {
                fx: 1.0,
                fy: 1.0,
                cx: 0.0,
                cy: 0.0,
            },
            pose,
        }
    }

    /// Transforms a world pose into this camera's frame.
    pub fn to_camera_frame(&self, pose: &Pose3D) -> Pose3D {
        let coords = (0..pose.n_joints())
            .map(|i| {
                if pose.visible[i] {
                    let p = self.pose.apply(&pose.joint(i));
                    [p.x, p.y, p.z]
                } else {
                    [0.0; 3]
                }
            })
            .collect();
        Pose3D::new(coords, pose.visible.clone(), CoordFrame3D::Camera)
    }
}

/// Projects a camera-frame 3D pose to 2D.
///
/// Orthographic projection copies `(x, y)`; perspective applies the pinhole
/// map and reports joints at or behind the image plane.
pub fn project(pose: &Pose3D, camera: &CameraModel) -> Result<Pose2D, CameraError> {
    if pose.frame != CoordFrame3D::Camera {
        return Err(CameraError::NotInCameraFrame);
    }
    match camera.kind {
        ProjectionKind::Orthographic => {
            let coords = pose
                .coords
                .iter()
                .map(|c| [c[0], c[1]])
                .collect();
            Ok(Pose2D::new(
                coords,
                pose.visible.clone(),
                CoordFrame2D::Normalized,
            ))
        }
        ProjectionKind::Perspective => {
            let behind: Vec<usize> = (0..pose.n_joints())
                .filter(|&i| pose.visible[i] && pose.coords[i][2] <= 0.0)
                .collect();
            if !behind.is_empty() {
                return Err(CameraError::BehindCamera(behind));
            }
            let k = &camera.intrinsics;
            let coords = (0..pose.n_joints())
                .map(|i| {
                    if pose.visible[i] {
                        let [x, y, z] = pose.coords[i];
                        [k.fx * x / z + k.cx, k.fy * y / z + k.cy]
                    } else {
                        [0.0, 0.0]
                    }
                })
                .collect();
            Ok(Pose2D::new(
                coords,
                pose.visible.clone(),
                CoordFrame2D::Pixel,
            ))
        }
    }
}

/// Converts a pixel pose to normalized camera coordinates.
pub fn pixel_to_normalized(p: &Pose2D, k: &Intrinsics) -> Pose2D {
    let coords = (0..p.n_joints())
        .map(|i| {
            if p.visible[i] {
                [
                    (p.coords[i][0] - k.cx) / k.fx,
                    (p.coords[i][1] - k.cy) / k.fy,
                ]
            } else {
                [0.0, 0.0]
            }
        })
        .collect();
    Pose2D::new(coords, p.visible.clone(), CoordFrame2D::Normalized)
}

/// Inverse of [`pixel_to_normalized`].
pub fn normalized_to_pixel(p: &Pose2D, k: &Intrinsics) -> Pose2D {
    let coords = (0..p.n_joints())
        .map(|i| {
            if p.visible[i] {
                [
                    p.coords[i][0] * k.fx + k.cx,
                    p.coords[i][1] * k.fy + k.cy,
                ]
            } else {
                [0.0, 0.0]
            }
        })
        .collect();
    Pose2D::new(coords, p.visible.clone(), CoordFrame2D::Pixel)
}

/// Unit-norm bearing of a normalized image point: `(x, y, 1)` normalized.
pub fn bearing(normalized_xy: [f64; 2]) -> Vector3<f64> {
    Vector3::new(normalized_xy[0], normalized_xy[1], 1.0).normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn test_intrinsics() -> Intrinsics {
        Intrinsics {
            fx: 1000.0,
            fy: 1000.0,
            cx: 500.0,
            cy: 500.0,
        }
    }

    #[test]
    fn orthographic_copies_xy() {
        let pose = Pose3D::fully_visible(
            vec![[1.0, 2.0, 5.0], [0.0, 0.0, 1.0], [3.0, 1.0, 2.0]],
            CoordFrame3D::Camera,
        );
        let cam = CameraModel::orthographic(RigidTransform::identity());
        let p = project(&pose, &cam).unwrap();
        assert_eq!(p.coords[0], [1.0, 2.0]);
    }

    #[test]
    fn principal_ray_hits_principal_point() {
        let pose = Pose3D::fully_visible(
            vec![[0.0, 0.0, 2.0], [0.1, 0.0, 1.0], [0.0, 0.1, 1.0]],
            CoordFrame3D::Camera,
        );
        let cam = CameraModel::perspective(test_intrinsics(), RigidTransform::identity());
        let p = project(&pose, &cam).unwrap();
        assert_eq!(p.coords[0], [500.0, 500.0]);
    }

    #[test]
    fn pinhole_hand_evaluation() {
        let pose = Pose3D::fully_visible(
            vec![[1.0, 1.0, 2.0], [0.0, 0.0, 1.0], [0.1, 0.0, 1.0]],
            CoordFrame3D::Camera,
        );
        let cam = CameraModel::perspective(test_intrinsics(), RigidTransform::identity());
        let p = project(&pose, &cam).unwrap();
        assert_relative_eq!(p.coords[0][0], 1000.0);
        assert_relative_eq!(p.coords[0][1], 1000.0);
    }

    #[test]
    fn behind_camera_lists_offenders() {
        let pose = Pose3D::fully_visible(
            vec![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [0.0, 0.0, 2.0]],
            CoordFrame3D::Camera,
        );
        let cam = CameraModel::perspective(test_intrinsics(), RigidTransform::identity());
        match project(&pose, &cam) {
            Err(CameraError::BehindCamera(js)) => assert_eq!(js, vec![1]),
            other => panic!("expected BehindCamera, got {other:?}"),
        }
    }

    #[test]
    fn principal_point_maps_to_origin() {
        let k = test_intrinsics();
        let p = Pose2D::fully_visible(vec![[500.0, 500.0], [1500.0, 500.0]], CoordFrame2D::Pixel);
        let n = pixel_to_normalized(&p, &k);
        assert_eq!(n.coords[0], [0.0, 0.0]);
        assert_eq!(n.coords[1], [1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn pixel_normalized_roundtrip(
            x in -2000.0..2000.0f64,
            y in -2000.0..2000.0f64,
        ) {
            let k = test_intrinsics();
            let p = Pose2D::fully_visible(vec![[x, y], [0.0, 0.0]], CoordFrame2D::Pixel);
            let back = normalized_to_pixel(&pixel_to_normalized(&p, &k), &k);
            prop_assert!((back.coords[0][0] - x).abs() < 1e-12 * x.abs().max(1.0));
            prop_assert!((back.coords[0][1] - y).abs() < 1e-12 * y.abs().max(1.0));
        }
    }
}
