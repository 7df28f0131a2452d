//! Camera model: the four coordinate frames and their transforms.
//!
//! World lengths are millimeters, image coordinates are pixels (sub-pixel
//! real values allowed). The pixel skew correction is folded into the
//! intrinsic matrix, so projection is the single 3x4 matrix
//! `M = K_aug * [R | T]`.

use nalgebra::{Matrix3, Matrix3x4, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// World- or camera-frame point, millimeters.
pub type Point3 = nalgebra::Point3<f64>;
/// Image point, pixels: `x` is the column (u), `y` the row (v).
pub type Pixel = nalgebra::Point2<f64>;

/// Homogeneous third coordinates below this are treated as degenerate
/// rather than dividing into huge pixel values.
const DEHOMOGENIZE_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("point depth is non-positive (Z = {0})")]
    DepthNonPositive(f64),
    #[error("rotation matrix is not orthonormal (|R R^T - I| = {0:.3e})")]
    NonOrthonormalRotation(f64),
    #[error("rotation determinant {0} is not +1")]
    ImproperRotation(f64),
    #[error("intrinsics invalid: {0}")]
    InvalidIntrinsics(String),
    #[error("matrix is not rank 3 or not finite")]
    DegenerateProjection,
    #[error("non-finite input")]
    NonFinite,
}

/// Pinhole intrinsics with skew folded in: `fx = f/dx`, `fy = f/dy`,
/// `skew = tan(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub skew: f64,
    pub u0: f64,
    pub v0: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, skew: f64, u0: f64, v0: f64) -> Result<Self, GeometryError> {
        let k = Self { fx, fy, skew, u0, v0 };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let all = [self.fx, self.fy, self.skew, self.u0, self.v0];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics("non-finite entry".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "fx, fy must be positive (got {}, {})",
                self.fx, self.fy
            )));
        }
        Ok(())
    }

    /// The augmented 3x4 intrinsic matrix `[K | 0]`.
    pub fn matrix(&self) -> Matrix3x4<f64> {
        Matrix3x4::new(
            self.fx, self.skew, self.u0, 0.0, //
            0.0, self.fy, self.v0, 0.0, //
            0.0, 0.0, 1.0, 0.0,
        )
    }
}

/// Rigid world-to-camera transform. Construction rejects non-orthonormal
/// rotations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Extrinsics {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if !rotation.iter().all(|x| x.is_finite()) || !translation.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let residual = (rotation * rotation.transpose() - Matrix3::identity()).abs().max();
        if residual >= 1e-9 {
            return Err(GeometryError::NonOrthonormalRotation(residual));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > 1e-9 {
            return Err(GeometryError::ImproperRotation(det));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// The homogeneous 4x4 matrix `[R T; 0 1]`.
    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

/// 3x4 world-to-pixel projection matrix, rank 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionMatrix {
    m: Matrix3x4<f64>,
}

impl ProjectionMatrix {
    pub fn new(m: Matrix3x4<f64>) -> Result<Self, GeometryError> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::DegenerateProjection);
        }
        let svd = m.svd(false, false);
        let s = &svd.singular_values;
        if s[2] <= 1e-12 * s[0].max(1.0) {
            return Err(GeometryError::DegenerateProjection);
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.m
    }

    pub fn row(&self, i: usize) -> [f64; 4] {
        [self.m[(i, 0)], self.m[(i, 1)], self.m[(i, 2)], self.m[(i, 3)]]
    }
}

/// Rigid transform into the camera frame: `R p + T`.
pub fn world_to_camera(p: &Point3, e: &Extrinsics) -> Point3 {
    Point3::from(e.rotation * p.coords + e.translation)
}

/// Perspective division plus pixel mapping:
/// `u = fx X/Z + skew Y/Z + u0`, `v = fy Y/Z + v0`.
pub fn camera_to_pixel(p: &Point3, k: &CameraIntrinsics) -> Result<Pixel, GeometryError> {
    if p.z <= DEHOMOGENIZE_EPS {
        return Err(GeometryError::DepthNonPositive(p.z));
    }
    let x = p.x / p.z;
    let y = p.y / p.z;
    Ok(Pixel::new(k.fx * x + k.skew * y + k.u0, k.fy * y + k.v0))
}

/// `M = [K | 0] * [R T; 0 1]`.
pub fn compose_projection(k: &CameraIntrinsics, e: &Extrinsics) -> ProjectionMatrix {
    let m = k.matrix() * e.matrix();
    // K has positive diagonal and [R|T] is rigid, so the product is rank 3.
    ProjectionMatrix::new(m).expect("projection composed from valid intrinsics/extrinsics")
}

/// Projects through a full 3x4 matrix and dehomogenizes.
pub fn project(p: &Point3, m: &ProjectionMatrix) -> Result<Pixel, GeometryError> {
    let h = m.m * Vector4::new(p.x, p.y, p.z, 1.0);
    if h[2] <= DEHOMOGENIZE_EPS {
        return Err(GeometryError::DepthNonPositive(h[2]));
    }
    Ok(Pixel::new(h[0] / h[2], h[1] / h[2]))
}

/// One camera's intrinsics + extrinsics as a flat JSON document.
/// Field names are part of the wire format; `R` is row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraJson {
    pub fx: f64,
    pub fy: f64,
    pub skew: f64,
    pub u0: f64,
    pub v0: f64,
    #[serde(rename = "R")]
    pub r: [[f64; 3]; 3],
    #[serde(rename = "T")]
    pub t: [f64; 3],
}

impl CameraJson {
    pub fn from_parts(k: &CameraIntrinsics, e: &Extrinsics) -> Self {
        let rm = e.rotation();
        let r = [
            [rm[(0, 0)], rm[(0, 1)], rm[(0, 2)]],
            [rm[(1, 0)], rm[(1, 1)], rm[(1, 2)]],
            [rm[(2, 0)], rm[(2, 1)], rm[(2, 2)]],
        ];
        let tv = e.translation();
        Self {
            fx: k.fx,
            fy: k.fy,
            skew: k.skew,
            u0: k.u0,
            v0: k.v0,
            r,
            t: [tv[0], tv[1], tv[2]],
        }
    }

    pub fn into_parts(&self) -> Result<(CameraIntrinsics, Extrinsics), GeometryError> {
        let k = CameraIntrinsics::new(self.fx, self.fy, self.skew, self.u0, self.v0)?;
        let r = Matrix3::from_iterator(
            (0..3).flat_map(|col| (0..3).map(move |row| self.r[row][col])),
        );
        let e = Extrinsics::new(r, Vector3::new(self.t[0], self.t[1], self.t[2]))?;
        Ok((k, e))
    }
}
