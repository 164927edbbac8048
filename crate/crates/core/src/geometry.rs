//! Rigid-frame algebra and pinhole camera projection.
//!
//! Frames follow the usual aerial-robotics convention: the world frame `W`
//! is z-up, the body frame `B` is x-forward/y-left/z-up, and the camera
//! frame `C` is z-forward/x-right/y-down.

use std::fmt;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 3-D point or direction in meters.
pub type Vec3 = Vector3<f64>;

/// Tolerance used for orthonormality checks on rotation matrices.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("cannot compose {outer_from} <- {inner_to}: frame chain is inconsistent")]
    FrameMismatch { outer_from: Frame, inner_to: Frame },
    #[error("point lies behind the camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("rotation matrix is not orthonormal")]
    NotOrthonormal,
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("non-finite input")]
    NonFinite,
}

/// Coordinate frame identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    World,
    Body,
    Lidar,
    Camera,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Frame::World => "W",
            Frame::Body => "B",
            Frame::Lidar => "L",
            Frame::Camera => "C",
        };
        f.write_str(s)
    }
}

/// Rigid transform mapping coordinates expressed in `from` into `to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
    from: Frame,
    to: Frame,
}

impl RigidTransform {
    pub fn new(
        rotation: Matrix3<f64>,
        translation: Vec3,
        from: Frame,
        to: Frame,
    ) -> Result<Self, GeometryError> {
        if !rotation.iter().all(|v| v.is_finite()) || !is_finite(&translation) {
            return Err(GeometryError::NonFinite);
        }
        let gram = rotation.transpose() * rotation;
        let ortho_err = (gram - Matrix3::identity()).amax();
        if ortho_err > ORTHONORMAL_TOL || (rotation.determinant() - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(GeometryError::NotOrthonormal);
        }
        Ok(Self {
            rotation,
            translation,
            from,
            to,
        })
    }

    pub fn identity(from: Frame, to: Frame) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
            from,
            to,
        }
    }

    pub fn from_translation(t: Vec3, from: Frame, to: Frame) -> Self {
        Self {
            translation: t,
            ..Self::identity(from, to)
        }
    }

    /// Rotation about +z by `angle` radians followed by translation `t`.
    pub fn from_yaw(angle: f64, t: Vec3, from: Frame, to: Frame) -> Self {
        Self {
            rotation: *Rotation3::from_axis_angle(&Vector3::z_axis(), angle).matrix(),
            translation: t,
            from,
            to,
        }
    }

    /// Builds a transform from yaw-pitch-roll angles in degrees
    /// (Z-Y-X intrinsic order).
    pub fn from_ypr_deg(ypr_deg: [f64; 3], t: Vec3, from: Frame, to: Frame) -> Self {
        let [yaw, pitch, roll] = ypr_deg.map(f64::to_radians);
        let r = Rotation3::from_euler_angles(roll, pitch, yaw);
        Self {
            rotation: *r.matrix(),
            translation: t,
            from,
            to,
        }
    }

    /// Yaw-pitch-roll in degrees, the inverse of [`Self::from_ypr_deg`].
    pub fn ypr_deg(&self) -> [f64; 3] {
        let r = Rotation3::from_matrix_unchecked(self.rotation);
        let (roll, pitch, yaw) = r.euler_angles();
        [yaw.to_degrees(), pitch.to_degrees(), roll.to_degrees()]
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn from_frame(&self) -> Frame {
        self.from
    }

    pub fn to_frame(&self) -> Frame {
        self.to
    }

    /// Returns a copy relabelled with new frame identifiers.
    pub fn with_frames(mut self, from: Frame, to: Frame) -> Self {
        self.from = from;
        self.to = to;
        self
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
            from: self.to,
            to: self.from,
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }
}

/// `outer ∘ inner`: maps `inner.from` into `outer.to`.
pub fn compose(
    outer: &RigidTransform,
    inner: &RigidTransform,
) -> Result<RigidTransform, GeometryError> {
    if outer.from != inner.to {
        return Err(GeometryError::FrameMismatch {
            outer_from: outer.from,
            inner_to: inner.to,
        });
    }
    Ok(RigidTransform {
        rotation: outer.rotation * inner.rotation,
        translation: outer.rotation * inner.translation + outer.translation,
        from: inner.from,
        to: outer.to,
    })
}

pub fn transform_point(t: &RigidTransform, p: &Vec3) -> Vec3 {
    t.transform_point(p)
}

/// Maps a LiDAR-frame point into the camera frame through the body frame.
pub fn lidar_to_camera(
    p_lidar: &Vec3,
    t_bl: &RigidTransform,
    t_cb: &RigidTransform,
) -> Result<Vec3, GeometryError> {
    let t_cl = compose(t_cb, t_bl)?;
    if t_bl.from != Frame::Lidar || t_cb.to != Frame::Camera {
        return Err(GeometryError::FrameMismatch {
            outer_from: t_cb.from,
            inner_to: t_bl.to,
        });
    }
    Ok(t_cl.transform_point(p_lidar))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
}

/// Brown-Conrady coefficients `(k1, k2, p1, p2, k3)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Distortion {
    pub k1: f64,
    pub k2: f64,
    pub p1: f64,
    pub p2: f64,
    pub k3: f64,
}

impl Distortion {
    pub fn is_zero(&self) -> bool {
        self.k1 == 0.0 && self.k2 == 0.0 && self.p1 == 0.0 && self.p2 == 0.0 && self.k3 == 0.0
    }

    /// Applies the model to normalized image coordinates.
    pub fn distort(&self, x: f64, y: f64) -> (f64, f64) {
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3));
        let xd = x * radial + 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x);
        let yd = y * radial + self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y;
        (xd, yd)
    }

    /// Fixed-point inversion of [`Self::distort`].
    pub fn undistort(&self, xd: f64, yd: f64) -> (f64, f64) {
        if self.is_zero() {
            return (xd, yd);
        }
        let (mut x, mut y) = (xd, yd);
        for _ in 0..50 {
            let (fx, fy) = self.distort(x, y);
            let (ex, ey) = (fx - xd, fy - yd);
            x -= ex;
            y -= ey;
            if ex.abs() < 1e-14 && ey.abs() < 1e-14 {
                break;
            }
        }
        (x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntrinsicsRepr", into = "IntrinsicsRepr")]
pub struct CameraIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    distortion: Distortion,
}

#[derive(Serialize, Deserialize)]
struct IntrinsicsRepr {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    #[serde(default)]
    distortion: Distortion,
}

impl TryFrom<IntrinsicsRepr> for CameraIntrinsics {
    type Error = GeometryError;

    fn try_from(r: IntrinsicsRepr) -> Result<Self, Self::Error> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height, r.distortion)
    }
}

impl From<CameraIntrinsics> for IntrinsicsRepr {
    fn from(k: CameraIntrinsics) -> Self {
        IntrinsicsRepr {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
            distortion: k.distortion,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        distortion: Distortion,
    ) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(
                "focal lengths must be positive".into(),
            ));
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidIntrinsics(
                "image size must be positive".into(),
            ));
        }
        if !(0.0..f64::from(width)).contains(&cx) || !(0.0..f64::from(height)).contains(&cy) {
            return Err(GeometryError::InvalidIntrinsics(
                "principal point outside the image".into(),
            ));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            distortion,
        })
    }

    /// Distortion-free intrinsics.
    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        Self::new(fx, fy, cx, cy, width, height, Distortion::default())
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn distortion(&self) -> &Distortion {
        &self.distortion
    }

    pub fn contains(&self, p: &ImagePoint) -> bool {
        p.u >= 0.0 && p.v >= 0.0 && p.u <= f64::from(self.width) && p.v <= f64::from(self.height)
    }

    /// Unit-depth ray (x/z, y/z, 1) through pixel `p`.
    pub fn pixel_ray(&self, p: &ImagePoint) -> Vec3 {
        let xd = (p.u - self.cx) / self.fx;
        let yd = (p.v - self.cy) / self.fy;
        let (x, y) = self.distortion.undistort(xd, yd);
        Vec3::new(x, y, 1.0)
    }

    /// Camera-frame point at depth `z` that projects onto `p`.
    pub fn backproject(&self, p: &ImagePoint, z: f64) -> Vec3 {
        self.pixel_ray(p) * z
    }
}

pub fn project_to_image(k: &CameraIntrinsics, p_c: &Vec3) -> Result<ImagePoint, GeometryError> {
    if !is_finite(p_c) {
        return Err(GeometryError::NonFinite);
    }
    if p_c.z <= 0.0 {
        return Err(GeometryError::BehindCamera { z: p_c.z });
    }
    let (mut x, mut y) = (p_c.x / p_c.z, p_c.y / p_c.z);
    if !k.distortion.is_zero() {
        (x, y) = k.distortion.distort(x, y);
    }
    Ok(ImagePoint {
        u: k.fx * x + k.cx,
        v: k.fy * y + k.cy,
    })
}

pub fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Camera-from-body rotation for a forward-looking camera on an FLU body.
pub fn forward_camera_rotation() -> Matrix3<f64> {
    Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0)
}

/// Pose configuration as written in scene files: translation plus
/// yaw-pitch-roll in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseConfig {
    pub translation: [f64; 3],
    #[serde(default)]
    pub ypr_deg: [f64; 3],
}

impl PoseConfig {
    pub fn to_transform(&self, from: Frame, to: Frame) -> RigidTransform {
        RigidTransform::from_ypr_deg(self.ypr_deg, Vec3::from(self.translation), from, to)
    }
}
