//! Time-dependent pinhole model for a camera mounted on a rotational stage.
//!
//! World frame: origin at the baseline midpoint, `x` towards the right camera,
//! `y` down along gravity, `z` forward. Camera frames have `x` right, `y` down
//! and `z` along the optical axis. Pixel coordinates are measured from the
//! image center (`x` right, `y` down); top-left conversion happens only at the
//! file boundary.

use std::fmt;

use nalgebra::{Matrix3, Matrix3x4, Vector2, Vector3, Vector4};

use crate::error::{Error, Result};

pub type Pixel = Vector2<f64>;
pub type Point3 = Vector3<f64>;

/// Default sensor of the reference cameras, in pixels.
pub const DEFAULT_SENSOR_PX: [f64; 2] = [3840.0, 2400.0];

const MAX_UNDISTORT_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Some(Side::Left),
            "right" | "r" => Some(Side::Right),
            _ => None,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Focal length, principal point offset and first-order radial distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub focal_px: f64,
    /// Principal point offset from the image center, px.
    pub center: Pixel,
    pub k1: f64,
    pub sensor_size: Pixel,
}

impl CameraIntrinsics {
    pub fn new(focal_px: f64, center: Pixel, k1: f64, sensor_size: Pixel) -> Result<Self> {
        let intr = CameraIntrinsics {
            focal_px,
            center,
            k1,
            sensor_size,
        };
        intr.validate()?;
        Ok(intr)
    }

    /// Ideal camera with no principal point offset and no distortion.
    pub fn ideal(focal_px: f64) -> Self {
        CameraIntrinsics {
            focal_px,
            center: Pixel::zeros(),
            k1: 0.0,
            sensor_size: Pixel::new(DEFAULT_SENSOR_PX[0], DEFAULT_SENSOR_PX[1]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal_px.is_finite() && self.focal_px > 0.0) {
            return Err(Error::InvalidInput(format!(
                "focal length must be positive, got {}",
                self.focal_px
            )));
        }
        if !(self.sensor_size.x > 0.0 && self.sensor_size.y > 0.0) {
            return Err(Error::InvalidInput("sensor size must be positive".into()));
        }
        if !self.k1.is_finite() || !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidInput("non-finite intrinsics".into()));
        }
        if !self.in_sensor(&self.center) {
            return Err(Error::InvalidInput(format!(
                "principal point ({}, {}) outside the sensor",
                self.center.x, self.center.y
            )));
        }
        Ok(())
    }

    pub fn k_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.focal_px,
            0.0,
            self.center.x,
            0.0,
            self.focal_px,
            self.center.y,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Whether a center-origin pixel falls on the sensor.
    pub fn in_sensor(&self, px: &Pixel) -> bool {
        px.x.abs() <= 0.5 * self.sensor_size.x && px.y.abs() <= 0.5 * self.sensor_size.y
    }

    /// `observed = ideal * (1 + k1 r^2)` about the principal point, `r` in focal units.
    pub fn distort(&self, ideal: &Pixel) -> Pixel {
        if self.k1 == 0.0 {
            return *ideal;
        }
        let rel = ideal - self.center;
        let r2 = rel.norm_squared() / (self.focal_px * self.focal_px);
        self.center + rel * (1.0 + self.k1 * r2)
    }

    /// Inverse of [`distort`](Self::distort) by fixed-point iteration.
    pub fn undistort(&self, observed: &Pixel) -> Result<Pixel> {
        if self.k1 == 0.0 {
            return Ok(*observed);
        }
        let f2 = self.focal_px * self.focal_px;
        let obs = observed - self.center;
        let mut ideal = obs;
        for _ in 0..MAX_UNDISTORT_ITERATIONS {
            let next = obs / (1.0 + self.k1 * ideal.norm_squared() / f2);
            let step = (next - ideal).norm();
            ideal = next;
            if step <= 1e-14 * (1.0 + obs.norm()) {
                return Ok(self.center + ideal);
            }
        }
        Err(Error::NoConvergence {
            iterations: MAX_UNDISTORT_ITERATIONS,
        })
    }
}

/// Home orientation of a camera: yaw about `y`, pitch about `x`, roll about `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraStaticPose {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub side: Side,
}

impl CameraStaticPose {
    pub fn new(side: Side, yaw: f64, pitch: f64, roll: f64) -> Self {
        CameraStaticPose {
            yaw,
            pitch,
            roll,
            side,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("yaw", self.yaw), ("pitch", self.pitch), ("roll", self.roll)] {
            if !a.is_finite() || a.abs() >= std::f64::consts::FRAC_PI_2 {
                return Err(Error::InvalidInput(format!(
                    "{} camera {name} {a} rad outside (-pi/2, pi/2)",
                    self.side
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraConfig {
    pub pose: CameraStaticPose,
    pub intrinsics: CameraIntrinsics,
}

/// Two cameras on a horizontal baseline of length `baseline_m`, centered on the world origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigConfig {
    pub baseline_m: f64,
    pub left: CameraConfig,
    pub right: CameraConfig,
}

impl RigConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.baseline_m.is_finite() && self.baseline_m > 0.0) {
            return Err(Error::InvalidInput(format!(
                "baseline must be positive, got {}",
                self.baseline_m
            )));
        }
        for cam in [&self.left, &self.right] {
            cam.pose.validate()?;
            cam.intrinsics.validate()?;
        }
        Ok(())
    }

    pub fn camera(&self, side: Side) -> &CameraConfig {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn camera_mut(&mut self, side: Side) -> &mut CameraConfig {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    /// `C_L = (-d/2, 0, 0)`, `C_R = (d/2, 0, 0)`.
    pub fn camera_center(&self, side: Side) -> Point3 {
        let half = 0.5 * self.baseline_m;
        match side {
            Side::Left => Point3::new(-half, 0.0, 0.0),
            Side::Right => Point3::new(half, 0.0, 0.0),
        }
    }

    pub fn projection(&self, side: Side, stage_angle: f64) -> ProjectionMatrix {
        let cam = self.camera(side);
        projection_matrix(
            &cam.intrinsics,
            &cam.pose,
            stage_angle,
            &self.camera_center(side),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        RotationMatrix(Matrix3::identity())
    }

    pub fn about_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RotationMatrix(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn about_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RotationMatrix(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RotationMatrix(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        RotationMatrix(self.0.transpose())
    }

    /// `max |R^T R - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).amax()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    /// World direction of the optical axis (third row of `R`).
    pub fn optical_axis(&self) -> Vector3<f64> {
        self.0.row(2).transpose()
    }
}

impl std::ops::Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

/// `R_S = R_z(-roll) R_x(-pitch) R_y(-yaw)`.
pub fn rotation_static(pose: &CameraStaticPose) -> RotationMatrix {
    RotationMatrix::about_z(-pose.roll)
        * RotationMatrix::about_x(-pose.pitch)
        * RotationMatrix::about_y(-pose.yaw)
}

/// Home rotation followed by the stage rotation `phi` about the camera `y` axis.
pub fn rotation_at(pose: &CameraStaticPose, phi: f64) -> RotationMatrix {
    RotationMatrix::about_y(-phi) * rotation_static(pose)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionMatrix(Matrix3x4<f64>);

impl ProjectionMatrix {
    pub fn from_matrix(m: Matrix3x4<f64>) -> Self {
        ProjectionMatrix(m)
    }

    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.0
    }

    /// Left 3x3 block, `K R`.
    pub fn left_block(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    /// Camera center as the right null vector of `P`.
    pub fn center(&self) -> Option<Point3> {
        let m = self.left_block();
        let inv = m.try_inverse()?;
        Some(-(inv * self.0.column(3)))
    }

    pub fn apply(&self, homogeneous: &Vector4<f64>) -> Vector3<f64> {
        self.0 * homogeneous
    }
}

/// `P = K R(phi) [I | -C]`.
pub fn projection_matrix(
    intr: &CameraIntrinsics,
    pose: &CameraStaticPose,
    phi: f64,
    center: &Point3,
) -> ProjectionMatrix {
    let kr = intr.k_matrix() * rotation_at(pose, phi).matrix();
    let t = -(kr * center);
    let mut p = Matrix3x4::zeros();
    p.fixed_view_mut::<3, 3>(0, 0).copy_from(&kr);
    p.set_column(3, &t);
    ProjectionMatrix(p)
}

/// Central projection of an inhomogeneous world point.
pub fn project(p: &ProjectionMatrix, q: &Point3) -> Result<Pixel> {
    project_homogeneous(p, &q.push(1.0))
}

pub fn project_homogeneous(p: &ProjectionMatrix, q: &Vector4<f64>) -> Result<Pixel> {
    let x = p.apply(q);
    if x.z.abs() < 1e-12 {
        return Err(Error::DegenerateProjection { w: x.z });
    }
    Ok(Pixel::new(x.x / x.z, x.y / x.z))
}

/// Signed depth of `q` along the optical axis of a camera.
pub fn depth(p: &ProjectionMatrix, q: &Point3) -> f64 {
    p.apply(&q.push(1.0)).z
}

/// Convert a top-left-origin pixel to the center-origin convention.
pub fn from_top_left(px: &Pixel, sensor: &Pixel) -> Pixel {
    px - 0.5 * sensor
}

pub fn to_top_left(px: &Pixel, sensor: &Pixel) -> Pixel {
    px + 0.5 * sensor
}
