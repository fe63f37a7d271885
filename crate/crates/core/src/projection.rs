//! Tilt compensation, pinhole projection and mask rasterization.
//!
//! Points travel leveled frame → body frame (undo measured roll, then pitch)
//! → camera optical frame (X right, Y down, Z forward) → pixels. Polygons are
//! clipped against the near plane in the optical frame before projection.

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Point3};
use crate::mask::Mask;

pub const DEFAULT_Z_NEAR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let i = Self { fx, fy, cx, cy, width, height };
        i.validate()?;
        Ok(i)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.fx.is_finite()
            && self.fy.is_finite()
            && self.cx >= 0.0
            && self.cy >= 0.0
            && self.cx < self.width as f64
            && self.cy < self.height as f64;
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid intrinsics {self:?}")));
        }
        Ok(())
    }
}

/// Rotation from the optical frame (X right, Y down, Z forward) to a
/// forward-looking camera link frame (x forward, y left, z up).
fn link_from_optical() -> Rotation3<f64> {
    Rotation3::from_matrix_unchecked(Matrix3::new(
        0.0, 0.0, 1.0, //
        -1.0, 0.0, 0.0, //
        0.0, -1.0, 0.0,
    ))
}

/// Camera optical frame pose relative to the vehicle body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraExtrinsics {
    /// body ← optical
    pub rotation: Rotation3<f64>,
    /// Optical center in the body frame, meters.
    pub translation: Vector3<f64>,
}

impl CameraExtrinsics {
    /// From a mounting position and roll/pitch/yaw of the camera link frame;
    /// all-zero angles look straight ahead along the body x-axis.
    pub fn from_mount(translation: [f64; 3], rpy: [f64; 3]) -> Self {
        let link = Rotation3::from_euler_angles(rpy[0], rpy[1], rpy[2]);
        Self { rotation: link * link_from_optical(), translation: Vector3::from(translation) }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let orth = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if orth > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("extrinsic rotation must be a proper rotation".into()));
        }
        Ok(Self { rotation: Rotation3::from_matrix_unchecked(rotation), translation })
    }

    /// Body frame → optical frame.
    pub fn body_to_optical(&self, p: Point3) -> Point3 {
        let v = self.rotation.inverse_transform_vector(&(Vector3::new(p.x, p.y, p.z) - self.translation));
        Point3::new(v.x, v.y, v.z)
    }

    /// Same camera with the body tilt folded into its mounting.
    pub fn tilted(&self, tilt: &TiltState) -> Self {
        let body = tilt.body_rotation();
        Self { rotation: body * self.rotation, translation: body * self.translation }
    }
}

/// Measured body roll and pitch, radians, right-handed about vehicle x and y.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TiltState {
    pub roll: f64,
    pub pitch: f64,
}

impl TiltState {
    pub fn new(roll: f64, pitch: f64) -> Result<Self> {
        let limit = std::f64::consts::FRAC_PI_4;
        if !(roll.abs() < limit && pitch.abs() < limit) {
            return Err(Error::InvalidParameter(format!("tilt ({roll}, {pitch}) exceeds ±π/4")));
        }
        Ok(Self { roll, pitch })
    }

    /// leveled ← body: `R_x(roll) · R_y(pitch)`.
    pub fn body_rotation(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::x_axis(), self.roll)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), self.pitch)
    }
}

/// Leveled frame → body frame: `R_y(pitch)ᵀ · R_x(roll)ᵀ · p`.
pub fn compensate_tilt(p: Point3, tilt: &TiltState) -> Point3 {
    let v = tilt.body_rotation().inverse_transform_vector(&Vector3::new(p.x, p.y, p.z));
    Point3::new(v.x, v.y, v.z)
}

/// Pinhole projection of an optical-frame point.
pub fn project_point(intr: &CameraIntrinsics, p: Point3, z_near: f64) -> Result<Point2> {
    if !(p.z > z_near) {
        return Err(Error::BehindCamera { z: p.z });
    }
    Ok(Point2::new(intr.cx + intr.fx * p.x / p.z, intr.cy + intr.fy * p.y / p.z))
}

/// Sutherland–Hodgman against the plane `z = z_near` (keeping `z ≥ z_near`).
pub fn clip_near_plane(poly: &[Point3], z_near: f64) -> Option<Vec<Point3>> {
    let n = poly.len();
    if poly.iter().all(|p| p.z >= z_near) {
        return (n >= 3).then(|| poly.to_vec());
    }
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let (pin, qin) = (p.z >= z_near, q.z >= z_near);
        if pin {
            out.push(p);
        }
        if pin != qin {
            let t = (z_near - p.z) / (q.z - p.z);
            let mut x = p.lerp(q, t);
            x.z = z_near;
            out.push(x);
        }
    }
    (out.len() >= 3).then_some(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
}

impl Camera {
    /// Optical center in the leveled frame for the given tilt.
    pub fn center_leveled(&self, tilt: &TiltState) -> Point3 {
        let c = tilt.body_rotation() * self.extrinsics.translation;
        Point3::new(c.x, c.y, c.z)
    }

    /// Camera ground position used as the visibility origin.
    pub fn ground_position(&self, tilt: &TiltState) -> Point2 {
        self.center_leveled(tilt).xy()
    }
}

/// Leveled-frame polygon → image polygon. `None` when nothing lies in front of
/// the near plane.
pub fn project_polygon(
    poly: &[Point3],
    camera: &Camera,
    tilt: &TiltState,
    z_near: f64,
) -> Option<Vec<Point2>> {
    let optical: Vec<Point3> =
        poly.iter().map(|&p| camera.extrinsics.body_to_optical(compensate_tilt(p, tilt))).collect();
    let clipped = clip_near_plane(&optical, z_near)?;
    Some(
        clipped
            .iter()
            .map(|&p| {
                let i = &camera.intrinsics;
                // z ≥ z_near after clipping; equality only on the clip line.
                Point2::new(i.cx + i.fx * p.x / p.z, i.cy + i.fy * p.y / p.z)
            })
            .collect(),
    )
}

/// Even-odd fill of one polygon at pixel centers into `buf`.
fn fill_polygon(poly: &[Point2], width: usize, height: usize, buf: &mut [bool], xs: &mut Vec<f64>) {
    if poly.len() < 3 {
        return;
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in poly {
        lo = lo.min(p.y);
        hi = hi.max(p.y);
    }
    let row_start = (lo - 0.5).ceil().max(0.0);
    let row_end = (hi - 0.5).floor().min(height as f64 - 1.0);
    if row_start > row_end {
        return;
    }
    let n = poly.len();
    for row in row_start as usize..=row_end as usize {
        let y = row as f64 + 0.5;
        xs.clear();
        for k in 0..n {
            let (a, b) = (poly[k], poly[(k + 1) % n]);
            if (a.y > y) != (b.y > y) {
                xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        xs.sort_unstable_by(f64::total_cmp);
        let line = &mut buf[row * width..(row + 1) * width];
        for pair in xs.chunks_exact(2) {
            // Centers with x0 ≤ c + ½ < x1.
            let c0 = (pair[0] - 0.5).ceil().max(0.0);
            let c1 = ((pair[1] - 0.5).ceil() - 1.0).min(width as f64 - 1.0);
            if c0 <= c1 {
                line[c0 as usize..=c1 as usize].fill(true);
            }
        }
    }
}

/// Pixel set iff its center lies inside some `add` polygon (even-odd) and
/// inside no `subtract` polygon.
pub fn rasterize_mask(add: &[Vec<Point2>], subtract: &[Vec<Point2>], intr: &CameraIntrinsics) -> Mask {
    let (w, h) = (intr.width, intr.height);
    let mut mask = Mask::new(w, h);
    let mut xs = Vec::new();
    for poly in add {
        fill_polygon(poly, w, h, &mut mask.bits, &mut xs);
    }
    if !subtract.is_empty() && mask.bits.iter().any(|&b| b) {
        let mut cut = vec![false; w * h];
        for poly in subtract {
            fill_polygon(poly, w, h, &mut cut, &mut xs);
        }
        for (m, c) in mask.bits.iter_mut().zip(cut) {
            *m &= !c;
        }
    }
    mask
}
