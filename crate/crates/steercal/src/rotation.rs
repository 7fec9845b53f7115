//! Rotation parameterization and rigid transforms.
//!
//! Rotations are carried as Rodrigues vectors (axis times angle, radians)
//! with the canonical angle range `[0, pi]`. The Rodrigues form is both the
//! network conditioning token and the optimization variable of the
//! calibrator, so conversion to a matrix is available for plain values and
//! for dual numbers.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::DualN;

/// Angle below which the Rodrigues series expansion replaces the closed form.
const SMALL_ANGLE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum RotationError {
    #[error("matrix is not a rotation: orthonormality residual {residual:.3e} exceeds {tol:.1e}")]
    NotARotation { residual: f64, tol: f64 },
}

/// Rotation in SO(3) stored as a Rodrigues vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationSO3 {
    pub rodrigues: [f64; 3],
}

impl RotationSO3 {
    pub fn identity() -> Self {
        Self {
            rodrigues: [0.0; 3],
        }
    }

    pub fn new(rodrigues: [f64; 3]) -> Self {
        Self { rodrigues }.canonical()
    }

    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self, RotationError> {
        matrix_to_rodrigues(m).map(|v| Self { rodrigues: v.into() })
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        rodrigues_to_matrix(&Vector3::from(self.rodrigues))
    }

    pub fn angle(&self) -> f64 {
        Vector3::from(self.rodrigues).norm()
    }

    /// Inverse rotation: the negated Rodrigues vector.
    pub fn inverse(&self) -> Self {
        Self {
            rodrigues: [
                -self.rodrigues[0],
                -self.rodrigues[1],
                -self.rodrigues[2],
            ],
        }
    }

    /// `self` composed after `other`: result matrix = self * other.
    pub fn compose(&self, other: &Self) -> Self {
        let m = self.to_matrix() * other.to_matrix();
        Self::from_matrix(&m).expect("product of rotations is a rotation")
    }

    /// Maps the angle into `[0, pi]` by wrapping and flipping the axis.
    pub fn canonical(self) -> Self {
        let v = Vector3::from(self.rodrigues);
        let angle = v.norm();
        if angle <= std::f64::consts::PI {
            return self;
        }
        let axis = v / angle;
        let tau = 2.0 * std::f64::consts::PI;
        let mut a = angle % tau;
        // (axis, a) with a in (pi, 2pi) equals (-axis, 2pi - a).
        let flipped = a > std::f64::consts::PI;
        if flipped {
            a = tau - a;
        }
        let axis = if flipped { -axis } else { axis };
        Self {
            rodrigues: (axis * a).into(),
        }
    }

    /// Uniform random rotation via a random unit quaternion.
    pub fn random_uniform<R: rand::Rng>(rng: &mut R) -> Self {
        use rand_distr::{Distribution, StandardNormal};
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        let q = nalgebra::Quaternion::new(q[0] / n, q[1] / n, q[2] / n, q[3] / n);
        let uq = nalgebra::UnitQuaternion::from_quaternion(q);
        Self::from_matrix(&uq.to_rotation_matrix().into_inner())
            .expect("unit quaternion yields a rotation")
    }

    /// Geodesic angle in degrees between two rotations.
    ///
    /// Uses the atan2 form, which stays accurate near zero where the
    /// arccosine of the trace loses half the significant digits.
    pub fn angle_to_deg(&self, other: &Self) -> f64 {
        let rel = self.to_matrix() * other.to_matrix().transpose();
        let sin = Vector3::new(
            rel[(2, 1)] - rel[(1, 2)],
            rel[(0, 2)] - rel[(2, 0)],
            rel[(1, 0)] - rel[(0, 1)],
        )
        .norm()
            / 2.0;
        let cos = (rel.trace() - 1.0) / 2.0;
        sin.atan2(cos).to_degrees()
    }
}

/// Rotation plus translation. `scale_free` marks a translation known only up
/// to scale, in which case it is stored unit-norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: RotationSO3,
    pub translation: [f64; 3],
    pub scale_free: bool,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: RotationSO3::identity(),
            translation: [0.0; 3],
            scale_free: false,
        }
    }

    pub fn new(rotation: RotationSO3, translation: [f64; 3]) -> Self {
        Self {
            rotation,
            translation,
            scale_free: false,
        }
    }

    /// Scale-free transform; the translation is normalized to unit length.
    pub fn new_scale_free(rotation: RotationSO3, translation: [f64; 3]) -> Self {
        let t = Vector3::from(translation);
        let n = t.norm();
        let t = if n > 0.0 { t / n } else { t };
        Self {
            rotation,
            translation: t.into(),
            scale_free: true,
        }
    }

    /// Applies the transform: `R x + t`.
    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.to_matrix() * x + Vector3::from(self.translation)
    }

    /// Camera center `-R^T t` for a world-to-camera transform.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.to_matrix().transpose() * Vector3::from(self.translation))
    }
}

/// Rodrigues vector to rotation matrix; total and smooth near zero angle.
pub fn rodrigues_to_matrix(v: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = v.dot(v);
    let theta = theta2.sqrt();
    let k = skew(v);
    if theta < SMALL_ANGLE {
        // sin(t)/t ~ 1 - t^2/6, (1-cos t)/t^2 ~ 1/2 - t^2/24
        let a = 1.0 - theta2 / 6.0;
        let b = 0.5 - theta2 / 24.0;
        Matrix3::identity() + k * a + k * k * b
    } else {
        let a = theta.sin() / theta;
        let b = (1.0 - theta.cos()) / theta2;
        Matrix3::identity() + k * a + k * k * b
    }
}

/// Dual-number variant of [`rodrigues_to_matrix`] for gradient propagation.
pub fn rodrigues_to_matrix_dual<const N: usize>(v: &[DualN<N>; 3]) -> [[DualN<N>; 3]; 3] {
    let theta2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let theta = theta2.sqrt();
    let (a, b) = if theta.value < SMALL_ANGLE {
        (
            -theta2 / 6.0 + 1.0,
            -theta2 / 24.0 + 0.5,
        )
    } else {
        (theta.sin() / theta, (-theta.cos() + 1.0) / theta2)
    };
    let zero = DualN::constant(0.0);
    // K and K^2 written out to avoid a dual matrix type.
    let k = [
        [zero, -v[2], v[1]],
        [v[2], zero, -v[0]],
        [-v[1], v[0], zero],
    ];
    let mut k2 = [[zero; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = zero;
            for l in 0..3 {
                s += k[i][l] * k[l][j];
            }
            k2[i][j] = s;
        }
    }
    let mut out = [[zero; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { 1.0 } else { 0.0 };
            out[i][j] = k[i][j] * a + k2[i][j] * b + id;
        }
    }
    out
}

/// Rotation matrix to canonical Rodrigues vector (angle in `[0, pi]`).
///
/// At angle pi the axis sign is ambiguous; a deterministic sign convention
/// (first nonzero component positive) is applied.
pub fn matrix_to_rodrigues(m: &Matrix3<f64>) -> Result<Vector3<f64>, RotationError> {
    const ORTHO_TOL: f64 = 1e-6;
    let residual = (m * m.transpose() - Matrix3::identity()).norm();
    let det = m.determinant();
    if residual > ORTHO_TOL || (det - 1.0).abs() > ORTHO_TOL {
        return Err(RotationError::NotARotation {
            residual: residual.max((det - 1.0).abs()),
            tol: ORTHO_TOL,
        });
    }
    let cos_theta = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    if theta < SMALL_ANGLE {
        // First order: v ~ vee(M - M^T)/2
        return Ok(Vector3::new(
            (m[(2, 1)] - m[(1, 2)]) / 2.0,
            (m[(0, 2)] - m[(2, 0)]) / 2.0,
            (m[(1, 0)] - m[(0, 1)]) / 2.0,
        ));
    }
    if std::f64::consts::PI - theta < 1e-6 {
        // Near pi: recover the axis from the symmetric part M = I + 2 aa^T - ...
        let s = (m + Matrix3::identity()) / 2.0;
        let mut axis = Vector3::new(s[(0, 0)].sqrt(), s[(1, 1)].sqrt(), s[(2, 2)].sqrt());
        // Fix relative signs from the off-diagonal terms, anchored on the
        // largest component.
        let imax = (0..3)
            .max_by(|&a, &b| axis[a].partial_cmp(&axis[b]).unwrap())
            .unwrap();
        for i in 0..3 {
            if i != imax && axis[imax] > 0.0 {
                let sij = s[(imax.min(i), imax.max(i))];
                if sij < 0.0 {
                    axis[i] = -axis[i];
                }
            }
        }
        if axis.norm() == 0.0 {
            axis = Vector3::x();
        }
        let mut axis = axis.normalize();
        // Deterministic sign at the pi ambiguity.
        for i in 0..3 {
            if axis[i].abs() > 1e-12 {
                if axis[i] < 0.0 {
                    axis = -axis;
                }
                break;
            }
        }
        return Ok(axis * theta);
    }
    let axis = Vector3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    ) / (2.0 * theta.sin());
    Ok(axis * theta)
}

/// Cross-product (skew-symmetric) matrix of `v`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}
