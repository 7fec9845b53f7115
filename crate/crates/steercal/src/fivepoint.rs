//! Five-point essential-matrix estimation and a RANSAC wrapper.
//!
//! The minimal solver follows the classic formulation: the 4-dimensional
//! null space of the epipolar constraints is parameterized as
//! `E = x E1 + y E2 + z E3 + E4`, the cubic determinant and trace
//! constraints are expanded over the degree-3 monomials, Gauss-Jordan
//! elimination reduces them to relations between the leading and trailing
//! monomials, and eliminating `x` and `y` leaves a degree-10 polynomial in
//! `z` whose real roots give the essential-matrix candidates. Roots are
//! found as companion-matrix eigenvalues.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rotation::{RigidTransform, RotationSO3};

#[derive(Debug, Error)]
pub enum FivePointError {
    #[error("need at least 5 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("no hypothesis reached {needed} inliers (best {best})")]
    TooFewInliers { needed: usize, best: usize },
}

/// Relative pose estimate with the supporting inliers.
#[derive(Debug, Clone)]
pub struct EpipolarSolution {
    pub rotation: RotationSO3,
    pub translation_dir: Vector3<f64>,
    pub inlier_mask: Vec<bool>,
    /// Median Sampson residual of the inliers (normalized coordinates).
    pub residual: f64,
}

// ── Degree-3 trivariate polynomials ──────────────────────────────────────────

/// Exponents of the 20 monomials of total degree <= 3 in (x, y, z), ordered
/// so elimination leaves the trailing 10 as polynomials in z times x, y, 1.
const MONOMIALS: [(u8, u8, u8); 20] = [
    (3, 0, 0), // x^3
    (0, 3, 0), // y^3
    (2, 1, 0), // x^2 y
    (1, 2, 0), // x y^2
    (2, 0, 1), // x^2 z
    (2, 0, 0), // x^2
    (0, 2, 1), // y^2 z
    (0, 2, 0), // y^2
    (1, 1, 1), // x y z
    (1, 1, 0), // x y
    (1, 0, 2), // x z^2
    (1, 0, 1), // x z
    (1, 0, 0), // x
    (0, 1, 2), // y z^2
    (0, 1, 1), // y z
    (0, 1, 0), // y
    (0, 0, 3), // z^3
    (0, 0, 2), // z^2
    (0, 0, 1), // z
    (0, 0, 0), // 1
];

fn monomial_index(e: (u8, u8, u8)) -> usize {
    MONOMIALS
        .iter()
        .position(|&m| m == e)
        .expect("exponent within degree 3")
}

/// Dense polynomial over the 20 monomials above.
#[derive(Debug, Clone, Copy)]
struct Poly3 {
    c: [f64; 20],
}

impl Poly3 {
    fn zero() -> Self {
        Self { c: [0.0; 20] }
    }

    /// Degree-1 polynomial a*x + b*y + c*z + d.
    fn linear(a: f64, b: f64, cz: f64, d: f64) -> Self {
        let mut p = Self::zero();
        p.c[monomial_index((1, 0, 0))] = a;
        p.c[monomial_index((0, 1, 0))] = b;
        p.c[monomial_index((0, 0, 1))] = cz;
        p.c[monomial_index((0, 0, 0))] = d;
        p
    }

    fn add(&self, o: &Self) -> Self {
        let mut out = *self;
        for i in 0..20 {
            out.c[i] += o.c[i];
        }
        out
    }

    fn sub(&self, o: &Self) -> Self {
        let mut out = *self;
        for i in 0..20 {
            out.c[i] -= o.c[i];
        }
        out
    }

    fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for c in out.c.iter_mut() {
            *c *= s;
        }
        out
    }

    fn mul(&self, o: &Self) -> Self {
        let mut out = Self::zero();
        for (i, &a) in self.c.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let (xa, ya, za) = MONOMIALS[i];
            for (j, &b) in o.c.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let (xb, yb, zb) = MONOMIALS[j];
                let e = (xa + xb, ya + yb, za + zb);
                assert!(
                    e.0 + e.1 + e.2 <= 3,
                    "product exceeds degree 3"
                );
                out.c[monomial_index(e)] += a * b;
            }
        }
        out
    }
}

// ── Univariate polynomials in z ──────────────────────────────────────────────

/// Coefficients ascending: c[0] + c[1] z + ...
#[derive(Debug, Clone)]
struct UniPoly(Vec<f64>);

impl UniPoly {
    fn zero() -> Self {
        Self(vec![0.0])
    }

    fn add(&self, o: &Self) -> Self {
        let n = self.0.len().max(o.0.len());
        let mut c = vec![0.0; n];
        for (i, v) in self.0.iter().enumerate() {
            c[i] += v;
        }
        for (i, v) in o.0.iter().enumerate() {
            c[i] += v;
        }
        Self(c)
    }

    fn sub(&self, o: &Self) -> Self {
        self.add(&Self(o.0.iter().map(|v| -v).collect()))
    }

    fn mul(&self, o: &Self) -> Self {
        let mut c = vec![0.0; self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Self(c)
    }

    /// Multiply by z.
    fn shift(&self) -> Self {
        let mut c = vec![0.0];
        c.extend_from_slice(&self.0);
        Self(c)
    }

    fn eval(&self, z: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * z + c)
    }

    fn derivative(&self) -> Self {
        if self.0.len() <= 1 {
            return Self::zero();
        }
        Self(
            self.0[1..]
                .iter()
                .enumerate()
                .map(|(i, &c)| c * (i + 1) as f64)
                .collect(),
        )
    }

    /// Real roots via companion-matrix eigenvalues.
    fn real_roots(&self) -> Vec<f64> {
        let mut c = self.0.clone();
        let max_abs = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_abs == 0.0 {
            return Vec::new();
        }
        while c.len() > 1 && c.last().unwrap().abs() < 1e-12 * max_abs {
            c.pop();
        }
        let n = c.len() - 1;
        if n == 0 {
            return Vec::new();
        }
        let lead = c[n];
        let mut comp = DMatrix::zeros(n, n);
        for i in 0..n {
            comp[(i, n - 1)] = -c[i] / lead;
            if i > 0 {
                comp[(i, i - 1)] = 1.0;
            }
        }
        let eig = comp.complex_eigenvalues();
        eig.iter()
            .filter(|e| e.im.abs() < 1e-8 * (1.0 + e.re.abs()))
            .map(|e| e.re)
            .collect()
    }
}

// ── Minimal solver ───────────────────────────────────────────────────────────

/// Right-singular directions of `q` for its `k` smallest singular values,
/// via the symmetric eigendecomposition of `q^T q` (nalgebra's SVD is thin
/// and does not expose the null space of wide matrices).
fn smallest_right_directions(q: &DMatrix<f64>, k: usize) -> Vec<nalgebra::DVector<f64>> {
    let qtq = q.transpose() * q;
    let eig = nalgebra::SymmetricEigen::new(qtq);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap()
    });
    order[..k]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect()
}

/// Essential matrices consistent with exactly five correspondences
/// (normalized coordinates, `u2^T E u1 = 0` with `x2 = R x1 + t`).
pub fn five_point_essentials(
    pts1: &[[f64; 2]; 5],
    pts2: &[[f64; 2]; 5],
) -> Vec<Matrix3<f64>> {
    // Epipolar constraint matrix over the row-major flattening of E.
    let mut q = DMatrix::zeros(5, 9);
    for r in 0..5 {
        let (x1, y1) = (pts1[r][0], pts1[r][1]);
        let (x2, y2) = (pts2[r][0], pts2[r][1]);
        let row = [
            x2 * x1,
            x2 * y1,
            x2,
            y2 * x1,
            y2 * y1,
            y2,
            x1,
            y1,
            1.0,
        ];
        for c in 0..9 {
            q[(r, c)] = row[c];
        }
    }
    let basis: Vec<Matrix3<f64>> = smallest_right_directions(&q, 4)
        .iter()
        .map(|r| Matrix3::new(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]))
        .collect();

    // E(x, y, z) entries as degree-1 polynomials (w = 1 on basis[3]).
    let e_poly: [[Poly3; 3]; 3] = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            Poly3::linear(
                basis[0][(i, j)],
                basis[1][(i, j)],
                basis[2][(i, j)],
                basis[3][(i, j)],
            )
        })
    });

    // Ten cubic constraints: det(E) = 0 and 2 E E^T E - tr(E E^T) E = 0.
    let mut rows: Vec<Poly3> = Vec::with_capacity(10);
    let det = e_poly[0][0]
        .mul(&e_poly[1][1].mul(&e_poly[2][2]).sub(&e_poly[1][2].mul(&e_poly[2][1])))
        .sub(
            &e_poly[0][1].mul(
                &e_poly[1][0]
                    .mul(&e_poly[2][2])
                    .sub(&e_poly[1][2].mul(&e_poly[2][0])),
            ),
        )
        .add(
            &e_poly[0][2].mul(
                &e_poly[1][0]
                    .mul(&e_poly[2][1])
                    .sub(&e_poly[1][1].mul(&e_poly[2][0])),
            ),
        );
    rows.push(det);

    // E E^T (degree 2 entries).
    let mut eet = [[Poly3::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = Poly3::zero();
            for k in 0..3 {
                s = s.add(&e_poly[i][k].mul(&e_poly[j][k]));
            }
            eet[i][j] = s;
        }
    }
    let trace = eet[0][0].add(&eet[1][1]).add(&eet[2][2]);
    for i in 0..3 {
        for j in 0..3 {
            let mut s = Poly3::zero();
            for k in 0..3 {
                s = s.add(&eet[i][k].mul(&e_poly[k][j]));
            }
            rows.push(s.scale(2.0).sub(&trace.mul(&e_poly[i][j])));
        }
    }

    // Gauss-Jordan with partial pivoting on the leading 10 columns.
    let mut a = DMatrix::zeros(10, 20);
    for (r, p) in rows.iter().enumerate() {
        for c in 0..20 {
            a[(r, c)] = p.c[c];
        }
    }
    for col in 0..10 {
        let (pivot_row, pivot_val) = (col..10)
            .map(|r| (r, a[(r, col)].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if pivot_val < 1e-12 {
            return Vec::new(); // degenerate sample
        }
        a.swap_rows(col, pivot_row);
        let inv = 1.0 / a[(col, col)];
        for c in col..20 {
            a[(col, c)] *= inv;
        }
        for r in 0..10 {
            if r != col {
                let f = a[(r, col)];
                if f != 0.0 {
                    for c in col..20 {
                        a[(r, c)] -= f * a[(col, c)];
                    }
                }
            }
        }
    }

    // Row k now reads: leading_k + x*Pk_x(z) + y*Pk_y(z) + Pk_1(z) = 0 with
    // Pk_x from columns (xz^2, xz, x), Pk_y from (yz^2, yz, y), Pk_1 from
    // (z^3, z^2, z, 1).
    let part = |k: usize| -> (UniPoly, UniPoly, UniPoly) {
        let px = UniPoly(vec![a[(k, 12)], a[(k, 11)], a[(k, 10)]]);
        let py = UniPoly(vec![a[(k, 15)], a[(k, 14)], a[(k, 13)]]);
        let p1 = UniPoly(vec![a[(k, 19)], a[(k, 18)], a[(k, 17)], a[(k, 16)]]);
        (px, py, p1)
    };

    // Eliminate pairs whose leading monomials differ by a factor z:
    // rows (x^2 z, x^2), (y^2 z, y^2), (x y z, x y).
    let mut m_rows: Vec<[UniPoly; 3]> = Vec::with_capacity(3);
    for &(hi, lo) in &[(4usize, 5usize), (6, 7), (8, 9)] {
        let (hx, hy, h1) = part(hi);
        let (lx, ly, l1) = part(lo);
        m_rows.push([
            hx.sub(&lx.shift()),
            hy.sub(&ly.shift()),
            h1.sub(&l1.shift()),
        ]);
    }

    // Determinant of the 3x3 polynomial matrix: degree-10 polynomial in z.
    let det_m = {
        let m = &m_rows;
        let c0 = m[1][1].mul(&m[2][2]).sub(&m[1][2].mul(&m[2][1]));
        let c1 = m[1][0].mul(&m[2][2]).sub(&m[1][2].mul(&m[2][0]));
        let c2 = m[1][0].mul(&m[2][1]).sub(&m[1][1].mul(&m[2][0]));
        m[0][0]
            .mul(&c0)
            .sub(&m[0][1].mul(&c1))
            .add(&m[0][2].mul(&c2))
    };

    let det_dz = det_m.derivative();
    let mut out = Vec::new();
    for z0 in det_m.real_roots() {
        // Newton polish: companion eigenvalues of the squared-conditioning
        // pipeline carry a few ulps more error than the constraints allow.
        let mut z = z0;
        for _ in 0..3 {
            let d = det_dz.eval(z);
            if d.abs() < 1e-300 {
                break;
            }
            let step = det_m.eval(z) / d;
            if !step.is_finite() {
                break;
            }
            z -= step;
        }
        // Null vector of M(z) gives (x, y, 1) up to scale.
        let mz = Matrix3::from_fn(|i, j| m_rows[i][j].eval(z));
        let svd = mz.svd(false, true);
        let vt = svd.v_t.expect("v_t requested");
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&i, &j| {
            svd.singular_values[i]
                .partial_cmp(&svd.singular_values[j])
                .unwrap()
        });
        let h = vt.row(order[0]).transpose();
        if h[2].abs() < 1e-10 {
            continue;
        }
        let x = h[0] / h[2];
        let y = h[1] / h[2];
        let e = basis[0] * x + basis[1] * y + basis[2] * z + basis[3];
        let n = e.norm();
        if n.is_finite() && n > 1e-12 {
            out.push(e / n);
        }
    }
    out
}

/// Sampson distance of a correspondence under an essential matrix.
pub fn sampson_distance(e: &Matrix3<f64>, p1: [f64; 2], p2: [f64; 2]) -> f64 {
    let u1 = Vector3::new(p1[0], p1[1], 1.0);
    let u2 = Vector3::new(p2[0], p2[1], 1.0);
    let eu1 = e * u1;
    let etu2 = e.transpose() * u2;
    let num = u2.dot(&eu1);
    let den = eu1.x * eu1.x + eu1.y * eu1.y + etu2.x * etu2.x + etu2.y * etu2.y;
    if den <= 0.0 {
        return f64::INFINITY;
    }
    num * num / den
}

/// Decomposes an essential matrix into the chirality-consistent `(R, t)`.
///
/// Returns the pose maximizing the number of correspondences triangulating
/// in front of both cameras, together with that count.
pub fn decompose_essential(
    e: &Matrix3<f64>,
    pts1: &[[f64; 2]],
    pts2: &[[f64; 2]],
) -> Option<(RotationSO3, Vector3<f64>, usize)> {
    let svd = e.svd(true, true);
    let mut u = svd.u?;
    let mut vt = svd.v_t?;
    if u.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
    }
    if vt.determinant() < 0.0 {
        vt.row_mut(2).neg_mut();
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let r1 = u * w * vt;
    let r2 = u * w.transpose() * vt;
    let t = u.column(2).into_owned();
    let mut best: Option<(RotationSO3, Vector3<f64>, usize)> = None;
    for r in [r1, r2] {
        for sign in [1.0, -1.0] {
            let tt = t * sign;
            let rot = RotationSO3::from_matrix(&r).ok()?;
            let pose_b = RigidTransform::new(rot, tt.into());
            let corr: Vec<([f64; 2], [f64; 2])> = pts1
                .iter()
                .zip(pts2)
                .map(|(a, b)| (*a, *b))
                .collect();
            let Ok(tri) = crate::epipolar::triangulate(
                &RigidTransform::identity(),
                &pose_b,
                &corr,
                None,
            ) else {
                continue;
            };
            let rm = rot.to_matrix();
            let front = tri
                .iter()
                .filter(|p| {
                    let z1 = p.point.z;
                    let z2 = (rm * p.point + tt).z;
                    z1 > 0.0 && z2 > 0.0 && p.point.iter().all(|v| v.is_finite())
                })
                .count();
            if best.as_ref().map_or(true, |b| front > b.2) {
                best = Some((rot, tt, front));
            }
        }
    }
    best
}

/// Five-point RANSAC over normalized-coordinate correspondences.
///
/// `threshold` is the Sampson distance bound in normalized coordinates.
pub fn five_point_ransac(
    pts1: &[[f64; 2]],
    pts2: &[[f64; 2]],
    threshold: f64,
    max_iters: usize,
    seed: u64,
) -> Result<EpipolarSolution, FivePointError> {
    let n = pts1.len();
    if n < 5 || pts2.len() != n {
        return Err(FivePointError::TooFewCorrespondences(n.min(pts2.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_e: Option<Matrix3<f64>> = None;
    let mut best_count = 0usize;
    let mut best_score = f64::INFINITY;
    for _ in 0..max_iters {
        let idx = sample(&mut rng, n, 5).into_vec();
        let s1: [[f64; 2]; 5] = std::array::from_fn(|i| pts1[idx[i]]);
        let s2: [[f64; 2]; 5] = std::array::from_fn(|i| pts2[idx[i]]);
        for e in five_point_essentials(&s1, &s2) {
            let mut count = 0usize;
            let mut score = 0.0;
            for i in 0..n {
                let d = sampson_distance(&e, pts1[i], pts2[i]);
                if d < threshold {
                    count += 1;
                    score += d;
                } else {
                    score += threshold;
                }
            }
            if count > best_count || (count == best_count && score < best_score) {
                best_count = count;
                best_score = score;
                best_e = Some(e);
            }
        }
    }
    let Some(e0) = best_e else {
        return Err(FivePointError::TooFewInliers { needed: 5, best: 0 });
    };
    if best_count < 5 {
        return Err(FivePointError::TooFewInliers {
            needed: 5,
            best: best_count,
        });
    }

    // Refine linearly on the inliers and project back to the essential
    // manifold (singular values 1, 1, 0).
    let inliers: Vec<usize> = (0..n)
        .filter(|&i| sampson_distance(&e0, pts1[i], pts2[i]) < threshold)
        .collect();
    let e_refined = if inliers.len() >= 8 {
        let mut q = DMatrix::zeros(inliers.len(), 9);
        for (r, &i) in inliers.iter().enumerate() {
            let (x1, y1) = (pts1[i][0], pts1[i][1]);
            let (x2, y2) = (pts2[i][0], pts2[i][1]);
            let row = [x2 * x1, x2 * y1, x2, y2 * x1, y2 * y1, y2, x1, y1, 1.0];
            for c in 0..9 {
                q[(r, c)] = row[c];
            }
        }
        let r = &smallest_right_directions(&q, 1)[0];
        let e_lin = Matrix3::new(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]);
        let svd = e_lin.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0)) * vt
    } else {
        e0
    };

    let inlier_mask: Vec<bool> = (0..n)
        .map(|i| sampson_distance(&e_refined, pts1[i], pts2[i]) < threshold)
        .collect();
    let in1: Vec<[f64; 2]> = (0..n).filter(|&i| inlier_mask[i]).map(|i| pts1[i]).collect();
    let in2: Vec<[f64; 2]> = (0..n).filter(|&i| inlier_mask[i]).map(|i| pts2[i]).collect();
    let (rotation, t, _) = decompose_essential(&e_refined, &in1, &in2)
        .ok_or(FivePointError::TooFewInliers {
            needed: 5,
            best: inlier_mask.iter().filter(|&&b| b).count(),
        })?;
    let residuals: Vec<f64> = (0..n)
        .filter(|&i| inlier_mask[i])
        .map(|i| sampson_distance(&e_refined, pts1[i], pts2[i]).sqrt())
        .collect();
    Ok(EpipolarSolution {
        rotation,
        translation_dir: t,
        inlier_mask,
        residual: crate::epipolar::median(&residuals),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random rig with exact normalized correspondences.
    fn random_rig(
        seed: u64,
        n: usize,
        coplanar: bool,
    ) -> (
        Matrix3<f64>,
        Vector3<f64>,
        Vec<[f64; 2]>,
        Vec<[f64; 2]>,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let axis = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize();
            let r = crate::rotation::rodrigues_to_matrix(&(axis * rng.random_range(0.2..0.6)));
            let t = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-0.4..0.4),
            )
            .normalize();
            let mut p1 = Vec::new();
            let mut p2 = Vec::new();
            for _ in 0..n {
                let x = Vector3::new(
                    rng.random_range(-1.5..1.5),
                    rng.random_range(-1.5..1.5),
                    if coplanar {
                        4.0
                    } else {
                        rng.random_range(2.5..7.0)
                    },
                );
                let x2 = r * x + t;
                if x2.z <= 0.3 {
                    continue;
                }
                p1.push([x.x / x.z, x.y / x.z]);
                p2.push([x2.x / x2.z, x2.y / x2.z]);
            }
            if p1.len() == n {
                return (r, t, p1, p2);
            }
        }
    }

    #[test]
    fn minimal_solutions_satisfy_essential_constraints() {
        for seed in 0..10 {
            let (_, _, p1, p2) = random_rig(seed, 5, false);
            let s1: [[f64; 2]; 5] = std::array::from_fn(|i| p1[i]);
            let s2: [[f64; 2]; 5] = std::array::from_fn(|i| p2[i]);
            let es = five_point_essentials(&s1, &s2);
            assert!(!es.is_empty(), "seed {seed}: no solutions");
            for e in &es {
                // Epipolar residuals on the sample points.
                for i in 0..5 {
                    let u1 = Vector3::new(p1[i][0], p1[i][1], 1.0);
                    let u2 = Vector3::new(p2[i][0], p2[i][1], 1.0);
                    assert!(u2.dot(&(e * u1)).abs() < 1e-6);
                }
                // det(E) = 0 and the trace constraint on normalized E.
                assert!(e.determinant().abs() < 1e-6);
                let eet = e * e.transpose();
                let c = (eet * e) * 2.0 - e * eet.trace();
                assert!(c.norm() < 1e-6, "trace constraint residual {}", c.norm());
            }
        }
    }

    #[test]
    fn minimal_solver_contains_true_essential() {
        for seed in 20..30 {
            let (r, t, p1, p2) = random_rig(seed, 5, false);
            let e_true = crate::rotation::skew(&t) * r;
            let e_true = e_true / e_true.norm();
            let s1: [[f64; 2]; 5] = std::array::from_fn(|i| p1[i]);
            let s2: [[f64; 2]; 5] = std::array::from_fn(|i| p2[i]);
            let es = five_point_essentials(&s1, &s2);
            let found = es.iter().any(|e| {
                let d1 = (e - e_true).norm();
                let d2 = (e + e_true).norm();
                d1.min(d2) < 1e-6
            });
            assert!(found, "seed {seed}: true E not among {} candidates", es.len());
        }
    }

    #[test]
    fn ransac_recovers_exact_pose() {
        let (r, t, p1, p2) = random_rig(3, 20, false);
        let sol = five_point_ransac(&p1, &p2, 1e-8, 50, 7).unwrap();
        let gt = RotationSO3::from_matrix(&r).unwrap();
        let e_r = sol.rotation.angle_to_deg(&gt);
        assert!(e_r < 0.01, "rotation error {e_r} deg");
        let cos = sol.translation_dir.dot(&t).clamp(-1.0, 1.0);
        let e_t = cos.acos().to_degrees();
        assert!(e_t < 0.05, "translation error {e_t} deg");
        assert!(sol.inlier_mask.iter().all(|&b| b));
    }

    #[test]
    fn ransac_survives_outlier_contamination() {
        let mut rng = ChaCha8Rng::seed_from_u64(momentum_seed());
        let (r, _, mut p1, mut p2) = random_rig(5, 30, false);
        // 40% gross outliers appended.
        for _ in 0..20 {
            p1.push([rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            p2.push([rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        }
        let sol = five_point_ransac(&p1, &p2, 1e-6, 200, 11).unwrap();
        let true_inliers = 30usize;
        let recovered = sol.inlier_mask[..true_inliers]
            .iter()
            .filter(|&&b| b)
            .count();
        assert!(
            recovered as f64 >= 0.95 * true_inliers as f64,
            "recovered {recovered}/{true_inliers} true inliers"
        );
        let gt = RotationSO3::from_matrix(&r).unwrap();
        assert!(sol.rotation.angle_to_deg(&gt) < 0.5);
    }

    fn momentum_seed() -> u64 {
        99
    }

    #[test]
    fn coplanar_targets_degrade_accuracy() {
        // All scene points on the z = 4 plane: the essential matrix is no
        // longer unique, so accuracy collapses or the solution is ambiguous.
        let mut worst: f64 = 0.0;
        for seed in 40..45 {
            let (r, _, p1, p2) = random_rig(seed, 20, true);
            if let Ok(sol) = five_point_ransac(&p1, &p2, 1e-8, 50, 13) {
                let gt = RotationSO3::from_matrix(&r).unwrap();
                worst = worst.max(sol.rotation.angle_to_deg(&gt));
            } else {
                worst = 180.0;
            }
        }
        // Documented behavior: at least one coplanar scene goes badly wrong
        // compared to the 0.01-degree exact-case accuracy.
        assert!(worst > 0.5, "coplanar scenes unexpectedly accurate: {worst}");
    }
}
