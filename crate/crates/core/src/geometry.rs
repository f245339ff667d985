//! Rigid transforms, point clouds and pinhole RGB-D unprojection.
//!
//! All poses live in the camera frame: x right, y down, z forward.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// An SE(3) pose: unit-quaternion rotation followed by a translation in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: UnitQuaternion<f64>,
    translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::new(rotation, Vec3::zeros())
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self> {
        let axis = Unit::try_new(axis, 1e-12)
            .ok_or_else(|| Error::Degenerate("rotation axis has zero length".into()))?;
        Ok(Self::from_rotation(UnitQuaternion::from_axis_angle(
            &axis, angle,
        )))
    }

    /// Builds a transform from `[qw, qx, qy, qz, tx, ty, tz]`, renormalizing the quaternion.
    pub fn from_wxyz_xyz(v: [f64; 7]) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("pose contains non-finite values".into()));
        }
        let q = Quaternion::new(v[0], v[1], v[2], v[3]);
        if q.norm() < 1e-12 {
            return Err(Error::Degenerate("pose quaternion has zero norm".into()));
        }
        Ok(Self::new(
            UnitQuaternion::from_quaternion(q),
            Vec3::new(v[4], v[5], v[6]),
        ))
    }

    pub fn to_wxyz_xyz(&self) -> [f64; 7] {
        let q = self.rotation.quaternion();
        let t = self.translation;
        [q.w, q.i, q.j, q.k, t.x, t.y, t.z]
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let rotation = renormalize(self.rotation * other.rotation);
        let translation = self.rotation * other.translation + self.translation;
        RigidTransform::new(rotation, translation)
    }

    pub fn inverse(&self) -> RigidTransform {
        let rotation = self.rotation.inverse();
        RigidTransform::new(rotation, -(rotation * self.translation))
    }

    /// Geodesic angle in radians between the two rotations.
    pub fn rotation_distance(&self, other: &RigidTransform) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }

    pub fn translation_distance(&self, other: &RigidTransform) -> f64 {
        (self.translation - other.translation).norm()
    }
}

fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(q.into_inner())
}

/// Applies `b` then `a`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

pub fn invert(t: &RigidTransform) -> RigidTransform {
    t.inverse()
}

pub type Rgb = [f64; 3];

/// Unordered 3D points in meters with optional per-point RGB in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Vec3>,
    colors: Option<Vec<Rgb>>,
}

impl PointCloud {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        check_finite(&points)?;
        Ok(Self {
            points,
            colors: None,
        })
    }

    pub fn with_colors(points: Vec<Vec3>, colors: Vec<Rgb>) -> Result<Self> {
        check_finite(&points)?;
        if colors.len() != points.len() {
            return Err(Error::Shape(format!(
                "{} colors for {} points",
                colors.len(),
                points.len()
            )));
        }
        if colors
            .iter()
            .flatten()
            .any(|c| !c.is_finite() || !(0.0..=1.0).contains(c))
        {
            return Err(Error::Validation("colors must lie in [0, 1]".into()));
        }
        Ok(Self {
            points,
            colors: Some(colors),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn colors(&self) -> Option<&[Rgb]> {
        self.colors.as_deref()
    }

    pub fn into_parts(self) -> (Vec<Vec3>, Option<Vec<Rgb>>) {
        (self.points, self.colors)
    }

    /// Keeps the points for which `keep(i)` is true, preserving order and colors.
    pub fn select(&self, mut keep: impl FnMut(usize) -> bool) -> PointCloud {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        PointCloud {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            colors: self
                .colors
                .as_ref()
                .map(|c| idx.iter().map(|&i| c[i]).collect()),
        }
    }

    /// Concatenates `self` then `other`. If only one side carries colors, the
    /// other side is filled with `fill`.
    pub fn concat(&self, other: &PointCloud, fill: Rgb) -> PointCloud {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let colors = match (&self.colors, &other.colors) {
            (None, None) => None,
            (a, b) => {
                let mut c = Vec::with_capacity(points.len());
                match a {
                    Some(a) => c.extend_from_slice(a),
                    None => c.resize(self.len(), fill),
                }
                match b {
                    Some(b) => c.extend_from_slice(b),
                    None => c.resize(points.len(), fill),
                }
                Some(c)
            }
        };
        PointCloud { points, colors }
    }
}

fn check_finite(points: &[Vec3]) -> Result<()> {
    if points.iter().any(|p| !p.iter().all(|x| x.is_finite())) {
        return Err(Error::Validation("point cloud contains non-finite coordinates".into()));
    }
    Ok(())
}

/// Maps every point through `t`; colors are carried unchanged.
pub fn transform_cloud(t: &RigidTransform, cloud: &PointCloud) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|p| t.apply(p)).collect(),
        colors: cloud.colors.clone(),
    }
}

/// Pinhole intrinsics. `depth_scale` converts raw depth units to meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub depth_scale: f64,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        depth_scale: f64,
    ) -> Result<Self> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            depth_scale,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.fx) || !positive(self.fy) {
            return Err(Error::Validation("focal lengths must be positive".into()));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::Validation("principal point must be finite".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Validation("image size must be positive".into()));
        }
        if !positive(self.depth_scale) {
            return Err(Error::Validation("depth_scale must be positive".into()));
        }
        Ok(())
    }

    /// Back-projects pixel `(u, v)` at metric depth `z`.
    pub fn unproject_pixel(&self, u: f64, v: f64, z: f64) -> Vec3 {
        Vec3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }

    /// Projects a camera-frame point to continuous pixel coordinates.
    pub fn project(&self, p: &Vec3) -> (f64, f64) {
        (
            p.x / p.z * self.fx + self.cx,
            p.y / p.z * self.fy + self.cy,
        )
    }

    /// Unit-free ray direction through pixel `(u, v)` with z component 1.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        self.unproject_pixel(u, v, 1.0)
    }
}

/// Row-major raster of raw 16-bit depth units; 0 marks invalid depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    values: Vec<u16>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, values: Vec<u16>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "depth buffer has {} values, expected {width}x{height}",
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: alloc::vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u16] {
        &self.values
    }

    pub fn get(&self, u: usize, v: usize) -> u16 {
        self.values[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: u16) {
        self.values[v * self.width + u] = value;
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|&&d| d > 0).count()
    }
}

/// Row-major boolean raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoolImage {
    width: usize,
    height: usize,
    values: Vec<bool>,
}

impl BoolImage {
    pub fn new(width: usize, height: usize, values: Vec<bool>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "mask buffer has {} values, expected {width}x{height}",
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            values: alloc::vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.values[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: bool) {
        self.values[v * self.width + u] = value;
    }

    pub fn not(&self) -> BoolImage {
        BoolImage {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|b| !b).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }
}

/// One point per pixel with positive depth (and `keep_mask` true, when given),
/// in row-major pixel order.
pub fn unproject(
    depth: &DepthImage,
    intr: &CameraIntrinsics,
    keep_mask: Option<&BoolImage>,
) -> Result<PointCloud> {
    intr.validate()?;
    if depth.width != intr.width || depth.height != intr.height {
        return Err(Error::Shape(format!(
            "depth is {}x{}, intrinsics expect {}x{}",
            depth.width, depth.height, intr.width, intr.height
        )));
    }
    if let Some(mask) = keep_mask {
        if mask.width != depth.width || mask.height != depth.height {
            return Err(Error::Shape(format!(
                "mask is {}x{}, depth is {}x{}",
                mask.width, mask.height, depth.width, depth.height
            )));
        }
    }
    let mut points = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let idx = v * depth.width + u;
            let raw = depth.values[idx];
            if raw == 0 || keep_mask.is_some_and(|m| !m.values[idx]) {
                continue;
            }
            let z = intr.depth_scale * f64::from(raw);
            points.push(intr.unproject_pixel(u as f64, v as f64, z));
        }
    }
    Ok(PointCloud {
        points,
        colors: None,
    })
}
