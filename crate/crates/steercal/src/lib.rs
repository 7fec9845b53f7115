//! Extrinsic multi-camera calibration and cross-view instance matching from
//! 2D articulated poses alone.
//!
//! The toolkit trains a pose-rotation network that maps a 2D pose plus a
//! hypothesized 3D rotation to the 2D pose seen from the rotated viewpoint,
//! then runs an inference-time joint optimization of the relative rotation,
//! the soft cross-view matching, and a translation-feasibility loss to
//! calibrate camera pairs. Multi-view rigs are assembled by rotation
//! averaging, cycle-consistent correspondence merging, and bundle adjustment.
//!
//! Main entry points:
//!
//! - [`synth`]: synthetic training-pair and scene generation
//! - [`steerer`]: the pose-rotation network, its training, and keypoint completion
//! - [`matching`]: differentiable Sinkhorn matching and the matching loss
//! - [`epipolar`]: translation feasibility, triangulation, five-point baseline
//! - [`calib`]: two-view and multi-view calibration drivers
//! - [`metrics`]: evaluation quantities and aggregation
//! - [`io`]: file formats, configuration, and reports

pub mod autodiff;
pub mod calib;
pub mod camera;
pub mod epipolar;
pub mod fivepoint;
pub mod io;
pub mod matching;
pub mod metrics;
pub mod plot;
pub mod pose;
pub mod rotation;
pub mod serde_util;
pub mod skeleton;
pub mod steerer;
pub mod synth;

pub use camera::{CameraModel, ProjectionKind};
pub use pose::{CoordFrame2D, CoordFrame3D, Pose2D, Pose3D};
pub use rotation::{RigidTransform, RotationSO3};
pub use skeleton::Skeleton;
