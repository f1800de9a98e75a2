//! Unit-sphere primitives and rigid isometries of ℝ³.

use nalgebra::{Matrix3, Vector3, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

pub const DEGENERATE_CHORD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate chord: |p - q| = {0:e}")]
    DegenerateChord(f64),
    #[error("matrix is not orthogonal (max |RᵀR - I| = {0:e})")]
    NotOrthogonal(f64),
    #[error("zero vector cannot be normalized")]
    ZeroVector,
}

/// A point of S². Always renormalized on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitVec3 {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVec3 {
    pub fn new(v: Vec3) -> Result<UnitVec3, GeometryError> {
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(GeometryError::ZeroVector);
        }
        Ok(UnitVec3 {
            x: v.x / n,
            y: v.y / n,
            z: v.z / n,
        })
    }

    pub fn from_xyz(x: f64, y: f64, z: f64) -> Result<UnitVec3, GeometryError> {
        UnitVec3::new(Vec3::new(x, y, z))
    }

    pub const NORTH: UnitVec3 = UnitVec3 {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }
    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }
    #[inline]
    pub fn z(&self) -> f64 {
        self.z
    }

    #[inline]
    pub fn vec(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    #[inline]
    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Exact negation; keeps the antipodal pair bit-symmetric.
    #[inline]
    pub fn antipode(&self) -> UnitVec3 {
        UnitVec3 {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Azimuth θ = atan2(y, x) in (−π, π]. `None` at the poles.
    pub fn azimuth(&self) -> Option<f64> {
        if self.x == 0.0 && self.y == 0.0 {
            return None;
        }
        Some(normalize_azimuth(self.y.atan2(self.x)))
    }

    pub fn distance(&self, other: &UnitVec3) -> f64 {
        (self.vec() - other.vec()).norm()
    }

    /// Image under an orthogonal map, renormalized.
    pub fn rotate(&self, r: &Mat3) -> UnitVec3 {
        // orthogonal images of unit vectors are nonzero
        UnitVec3::new(r * self.vec()).expect("orthogonal image of a unit vector")
    }
}

/// Maps −π onto π so azimuths live in (−π, π].
#[inline]
pub fn normalize_azimuth(theta: f64) -> f64 {
    if theta <= -std::f64::consts::PI {
        theta + 2.0 * std::f64::consts::PI
    } else {
        theta
    }
}

/// Direction of the chord from `q` to `p`: (p − q)/|p − q|.
pub fn direction(p: &Vec3, q: &Vec3) -> Result<UnitVec3, GeometryError> {
    let d = p - q;
    let n = d.norm();
    if n < DEGENERATE_CHORD {
        return Err(GeometryError::DegenerateChord(n));
    }
    UnitVec3::new(d)
}

/// The sphere map v ↦ (x, y, cz)/|(x, y, cz)|, describing how chord directions
/// of a graph move when the argument is scaled by `c`.
///
/// Panics if `c` is not positive.
#[inline]
pub fn psi(c: f64, v: &UnitVec3) -> UnitVec3 {
    assert!(c > 0.0, "psi requires c > 0, got {c}");
    UnitVec3::new(Vec3::new(v.x, v.y, c * v.z)).expect("psi image of a unit vector is nonzero")
}

/// An isometry `p ↦ ort·p + trans` of ℝ³.
///
/// Serialized as `{ "ort": [9 reals, row-major], "trans": [3 reals] }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "IsometryRepr", try_from = "IsometryRepr")]
pub struct RigidIsometry {
    ort: Mat3,
    trans: Vec3,
}

pub const ORTHOGONALITY_TOL: f64 = 1e-10;

fn orthogonality_defect(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).abs().max()
}

impl RigidIsometry {
    pub fn identity() -> RigidIsometry {
        RigidIsometry {
            ort: Mat3::identity(),
            trans: Vec3::zeros(),
        }
    }

    pub fn translation(t: Vec3) -> RigidIsometry {
        RigidIsometry {
            ort: Mat3::identity(),
            trans: t,
        }
    }

    pub fn new(ort: Mat3, trans: Vec3) -> Result<RigidIsometry, GeometryError> {
        let defect = orthogonality_defect(&ort);
        if !(defect <= ORTHOGONALITY_TOL) {
            return Err(GeometryError::NotOrthogonal(defect));
        }
        Ok(RigidIsometry { ort, trans })
    }

    /// Projects an approximately orthogonal matrix to its polar factor first.
    pub fn from_approx(ort: &Mat3, trans: Vec3) -> RigidIsometry {
        RigidIsometry {
            ort: nearest_orthogonal(ort),
            trans,
        }
    }

    pub fn ort(&self) -> &Mat3 {
        &self.ort
    }

    pub fn trans(&self) -> &Vec3 {
        &self.trans
    }

    pub fn determinant(&self) -> f64 {
        self.ort.determinant()
    }

    pub fn preserves_orientation(&self) -> bool {
        self.determinant() > 0.0
    }

    #[inline]
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.ort * p + self.trans
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidIsometry) -> RigidIsometry {
        RigidIsometry {
            ort: self.ort * other.ort,
            trans: self.ort * other.trans + self.trans,
        }
    }

    pub fn inverse(&self) -> RigidIsometry {
        let rt = self.ort.transpose();
        RigidIsometry {
            ort: rt,
            trans: -(rt * self.trans),
        }
    }

    /// Row-major orthogonal part.
    pub fn ort_row_major(&self) -> [f64; 9] {
        let m = &self.ort;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn trans_array(&self) -> [f64; 3] {
        [self.trans.x, self.trans.y, self.trans.z]
    }
}

#[derive(Serialize, Deserialize)]
struct IsometryRepr {
    ort: [f64; 9],
    trans: [f64; 3],
}

impl From<RigidIsometry> for IsometryRepr {
    fn from(iso: RigidIsometry) -> Self {
        IsometryRepr {
            ort: iso.ort_row_major(),
            trans: iso.trans_array(),
        }
    }
}

impl TryFrom<IsometryRepr> for RigidIsometry {
    type Error = GeometryError;

    fn try_from(r: IsometryRepr) -> Result<Self, Self::Error> {
        RigidIsometry::new(Mat3::from_row_slice(&r.ort), Vec3::from(r.trans))
    }
}

impl Default for RigidIsometry {
    fn default() -> Self {
        RigidIsometry::identity()
    }
}

pub fn rotation_about_x(angle: f64) -> RigidIsometry {
    let (s, c) = angle.sin_cos();
    RigidIsometry {
        ort: Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
        trans: Vec3::zeros(),
    }
}

/// Rotation by `|w|` radians about the axis `w` (Rodrigues).
pub fn rotation_from_vector(w: &Vec3) -> Mat3 {
    let angle = w.norm();
    if angle < 1e-300 {
        return Mat3::identity();
    }
    let k = w / angle;
    let kx = Mat3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Mat3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos())
}

/// Polar factor U·Vᵀ of the SVD M = U·Σ·Vᵀ: the orthogonal matrix closest
/// to `m` in Frobenius norm.
pub fn nearest_orthogonal(m: &Mat3) -> Mat3 {
    let svd = SVD::new(*m, true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    u * vt
}

/// Orthogonal Procrustes: the orthogonal `R` with det(R) = `orientation`
/// (±1) minimizing Σ |R·a_i − b_i|² over centered inputs.
pub fn procrustes(cross: &Mat3, orientation: f64) -> Mat3 {
    // cross = Σ b_i a_iᵀ
    let svd = SVD::new(*cross, true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * vt;
    if r.determinant() * orientation < 0.0 {
        // flip the column of U belonging to the smallest singular value
        let (imin, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, s)| {
                if *s < acc.1 {
                    (i, *s)
                } else {
                    acc
                }
            });
        let mut u2 = u;
        u2.column_mut(imin).scale_mut(-1.0);
        r = u2 * vt;
    }
    r
}

/// Kabsch fit of the rigid map sending `src[i]` closest to `dst[i]`,
/// with the orthogonal part constrained to det = `orientation`.
pub fn kabsch(src: &[Vec3], dst: &[Vec3], orientation: f64) -> RigidIsometry {
    assert_eq!(src.len(), dst.len());
    assert!(!src.is_empty());
    let n = src.len() as f64;
    let ms = src.iter().sum::<Vec3>() / n;
    let md = dst.iter().sum::<Vec3>() / n;
    let mut cross = Mat3::zeros();
    for (a, b) in src.iter().zip(dst) {
        cross += (b - md) * (a - ms).transpose();
    }
    let r = procrustes(&cross, orientation);
    RigidIsometry {
        ort: r,
        trans: md - r * ms,
    }
}

/// The 48 signed permutation matrices (24 proper, 24 improper).
pub fn signed_permutations() -> Vec<Mat3> {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut out = Vec::with_capacity(48);
    for perm in PERMS {
        for signs in 0..8u32 {
            let mut m = Mat3::zeros();
            for (row, &col) in perm.iter().enumerate() {
                let s = if signs >> row & 1 == 1 { -1.0 } else { 1.0 };
                m[(row, col)] = s;
            }
            out.push(m);
        }
    }
    out
}
