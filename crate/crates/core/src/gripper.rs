//! Canonical two-finger gripper template, fingertip-to-TCP fitting and hybrid
//! observation assembly.
//!
//! Gripper frame: origin at the tool center point midway between the tips,
//! x along the closing direction (left tip at -x), z along the approach
//! direction (fingers point to +z), y = z × x.

#[allow(unused_imports)] // inherent float methods exist only with std
use num_traits::Float;
use alloc::format;
use alloc::vec::Vec;
use nalgebra::{Matrix3, Rotation3, UnitQuaternion};

use crate::error::{Error, Result};
use crate::geometry::{transform_cloud, PointCloud, Rgb, RigidTransform, Vec3};

/// Color given to filled gripper points.
pub const GRIPPER_MARKER_COLOR: Rgb = [1.0, 0.0, 1.0];
/// Color given to uncolored background points when a hybrid cloud is assembled.
pub const BACKGROUND_FILL_COLOR: Rgb = [0.5, 0.5, 0.5];

/// Minimum fingertip separation accepted by the fitter, meters.
pub const DEGENERATE_TIP_DISTANCE: f64 = 1e-6;

/// Schematic parallel-jaw gripper: two finger pads and a back plate.
#[derive(Debug, Clone, PartialEq)]
pub struct GripperTemplate {
    /// Tip separation at full opening, meters.
    pub max_open: f64,
    /// Pad length along the approach axis, meters.
    pub finger_length: f64,
    /// Pad extent along y, meters.
    pub pad_width: f64,
    /// Back-plate overhang beyond the fully open pads, meters.
    pub plate_overhang: f64,
    /// Pad sample grid: (across width, along length).
    pub pad_grid: (usize, usize),
    /// Back-plate samples per half-width along x, and along y.
    pub plate_grid: (usize, usize),
    /// Distance of the approach anchor behind the TCP, meters.
    pub anchor_depth: f64,
}

impl Default for GripperTemplate {
    /// 85 mm stroke two-finger gripper.
    fn default() -> Self {
        Self {
            max_open: 0.085,
            finger_length: 0.045,
            pad_width: 0.02,
            plate_overhang: 0.01,
            pad_grid: (5, 10),
            plate_grid: (6, 5),
            anchor_depth: 0.12,
        }
    }
}

impl GripperTemplate {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        for (field, v) in [
            ("max_open", self.max_open),
            ("finger_length", self.finger_length),
            ("pad_width", self.pad_width),
            ("anchor_depth", self.anchor_depth),
        ] {
            if !pos(v) {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if !(self.plate_overhang.is_finite() && self.plate_overhang >= 0.0) {
            return Err(Error::config("plate_overhang", "must be non-negative"));
        }
        if self.pad_grid.0 < 2 || self.pad_grid.1 < 2 {
            return Err(Error::config("pad_grid", "needs at least 2x2 samples"));
        }
        if self.plate_grid.0 == 0 || self.plate_grid.1 < 2 {
            return Err(Error::config("plate_grid", "needs at least 1x2 samples"));
        }
        Ok(())
    }

    pub fn points_per_pad(&self) -> usize {
        self.pad_grid.0 * self.pad_grid.1
    }

    /// Number of points produced by [`template_points`].
    pub fn len(&self) -> usize {
        2 + 2 * self.points_per_pad() + 2 * self.plate_grid.0 * self.plate_grid.1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn left_tip(&self, s: f64) -> Vec3 {
        Vec3::new(-0.5 * s * self.max_open, 0.0, 0.0)
    }

    pub fn right_tip(&self, s: f64) -> Vec3 {
        Vec3::new(0.5 * s * self.max_open, 0.0, 0.0)
    }

    /// Point on the approach axis behind the TCP, used to fix roll about the tip axis.
    pub fn approach_anchor(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, -self.anchor_depth)
    }
}

fn check_opening(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::Range(format!("gripper opening {s} outside [0, 1]")))
    }
}

/// Template cloud `P^g(s)` in the gripper frame, colored with the marker color.
///
/// Layout: left tip, right tip, left pad grid, right pad grid (mirror of the
/// left pad), then mirrored pairs of back-plate samples.
pub fn template_points(t: &GripperTemplate, s: f64) -> Result<PointCloud> {
    check_opening(s)?;
    t.validate()?;
    let half = 0.5 * s * t.max_open;
    let mut points = Vec::with_capacity(t.len());
    points.push(t.left_tip(s));
    points.push(t.right_tip(s));

    let (nw, nl) = t.pad_grid;
    let mut left_pad = Vec::with_capacity(nw * nl);
    for i in 0..nw {
        let y = t.pad_width * (i as f64 / (nw - 1) as f64 - 0.5);
        for j in 0..nl {
            let z = -t.finger_length * (j as f64 / (nl - 1) as f64);
            left_pad.push(Vec3::new(-half, y, z));
        }
    }
    points.extend_from_slice(&left_pad);
    points.extend(left_pad.iter().map(|p| Vec3::new(-p.x, p.y, p.z)));

    let (nx, ny) = t.plate_grid;
    let plate_half = 0.5 * t.max_open + t.plate_overhang;
    for k in 0..nx {
        let x = plate_half * (k as f64 + 0.5) / nx as f64;
        for i in 0..ny {
            let y = t.pad_width * (i as f64 / (ny - 1) as f64 - 0.5);
            points.push(Vec3::new(-x, y, -t.finger_length));
            points.push(Vec3::new(x, y, -t.finger_length));
        }
    }
    let colors = alloc::vec![GRIPPER_MARKER_COLOR; points.len()];
    PointCloud::with_colors(points, colors)
}

/// 3D fingertip (and optional wrist) positions from a hand-pose estimator, camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HandObservation {
    pub thumb_tip: Vec3,
    pub index_tip: Vec3,
    pub wrist: Option<Vec3>,
    /// Full 21-keypoint hand skeleton when available; not used by the fitter.
    pub joints: Option<Vec<Vec3>>,
}

impl HandObservation {
    pub fn new(thumb_tip: Vec3, index_tip: Vec3, wrist: Option<Vec3>) -> Result<Self> {
        let hand = Self {
            thumb_tip,
            index_tip,
            wrist,
            joints: None,
        };
        hand.validate()?;
        Ok(hand)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |p: &Vec3| p.iter().all(|x| x.is_finite());
        if !finite(&self.thumb_tip)
            || !finite(&self.index_tip)
            || self.wrist.as_ref().is_some_and(|w| !finite(w))
            || self.joints.iter().flatten().any(|p| !finite(p))
        {
            return Err(Error::Validation("hand observation has non-finite coordinates".into()));
        }
        if let Some(j) = &self.joints {
            if j.len() != 21 {
                return Err(Error::Shape(format!("expected 21 hand joints, got {}", j.len())));
            }
        }
        if self.thumb_tip == self.index_tip {
            return Err(Error::Degenerate("thumb and index tips coincide".into()));
        }
        Ok(())
    }
}

/// Equivalent TCP pose and normalized opening.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperState {
    pub pose: RigidTransform,
    pub opening: f64,
}

impl GripperState {
    pub fn new(pose: RigidTransform, opening: f64) -> Result<Self> {
        check_opening(opening)?;
        Ok(Self { pose, opening })
    }
}

/// Which template tip the thumb is matched to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FingertipPairing {
    #[default]
    ThumbLeft,
    /// Mirrored hands: thumb on the right tip.
    ThumbRight,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperFit {
    pub state: GripperState,
    /// RMS distance between aligned template anchors and observed anchors, meters.
    pub residual: f64,
}

/// Least-squares rigid transform (no scaling) mapping `src[i]` onto `dst[i]`.
///
/// Cross-covariance SVD with a determinant correction so the result is a
/// proper rotation.
pub fn rigid_align(src: &[Vec3], dst: &[Vec3]) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(Error::Shape(format!(
            "{} source points vs {} target points",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(Error::Degenerate("rigid alignment needs at least 3 points".into()));
    }
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vec3>() / n;
    let cd = dst.iter().sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    for (a, b) in src.iter().zip(dst) {
        h += (a - cs) * (b - cd).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Degenerate("SVD did not converge".into())),
    };
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d));
    let r = v * correction * u.transpose();
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let translation = cd - rotation * cs;
    Ok(RigidTransform::new(rotation, translation))
}

fn rms_error(t: &RigidTransform, src: &[Vec3], dst: &[Vec3]) -> f64 {
    let sum: f64 = src
        .iter()
        .zip(dst)
        .map(|(a, b)| (t.apply(a) - b).norm_squared())
        .sum();
    (sum / src.len() as f64).sqrt()
}

/// Unit vector orthogonal to `axis` closest to `preferred`, falling back to `fallback`.
fn orthogonal_direction(axis: &Vec3, preferred: &Vec3, fallback: &Vec3) -> Vec3 {
    for d in [preferred, fallback] {
        let v = d - axis * axis.dot(d);
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
    // axis is parallel to both candidates; any orthogonal vector will do
    let v = axis.cross(&Vec3::x());
    v / v.norm()
}

/// Fits an equivalent gripper state to thumb/index fingertips with thumb on the left tip.
pub fn fit_gripper_from_fingertips(
    hand: &HandObservation,
    t: &GripperTemplate,
) -> Result<GripperFit> {
    fit_gripper_with_pairing(hand, t, FingertipPairing::ThumbLeft)
}

/// Fits opening in closed form from tip distance, then the TCP pose by rigid
/// alignment of {left tip, right tip, approach anchor}.
///
/// The observed anchor sits `anchor_depth` from the tip midpoint in the
/// direction of the wrist projected onto the plane orthogonal to the tip
/// axis. Without a usable wrist, the approach axis is chosen closest to
/// camera +z.
pub fn fit_gripper_with_pairing(
    hand: &HandObservation,
    t: &GripperTemplate,
    pairing: FingertipPairing,
) -> Result<GripperFit> {
    t.validate()?;
    let (left_obs, right_obs) = match pairing {
        FingertipPairing::ThumbLeft => (hand.thumb_tip, hand.index_tip),
        FingertipPairing::ThumbRight => (hand.index_tip, hand.thumb_tip),
    };
    let span = right_obs - left_obs;
    let dist = span.norm();
    if !dist.is_finite() || dist < DEGENERATE_TIP_DISTANCE {
        return Err(Error::Degenerate(format!(
            "fingertips {dist:e} m apart, below {DEGENERATE_TIP_DISTANCE:e} m"
        )));
    }
    let opening = (dist / t.max_open).clamp(0.0, 1.0);
    let axis = span / dist;
    let mid = 0.5 * (left_obs + right_obs);

    let back = match hand.wrist {
        Some(w) => {
            let rel = w - mid;
            let proj = rel - axis * axis.dot(&rel);
            let n = proj.norm();
            if n > 1e-9 {
                proj / n
            } else {
                -orthogonal_direction(&axis, &Vec3::z(), &Vec3::y())
            }
        }
        None => -orthogonal_direction(&axis, &Vec3::z(), &Vec3::y()),
    };
    let anchor_obs = mid + back * t.anchor_depth;

    let src = [t.left_tip(opening), t.right_tip(opening), t.approach_anchor()];
    let dst = [left_obs, right_obs, anchor_obs];
    let pose = rigid_align(&src, &dst)?;
    let residual = rms_error(&pose, &src, &dst);
    Ok(GripperFit {
        state: GripperState { pose, opening },
        residual,
    })
}

/// `bg ∪ (T · P^g(s))`: background first, then gripper points in template order.
pub fn assemble_hybrid(
    bg: &PointCloud,
    state: &GripperState,
    t: &GripperTemplate,
) -> Result<PointCloud> {
    let gripper = transform_cloud(&state.pose, &template_points(t, state.opening)?);
    Ok(bg.concat(&gripper, BACKGROUND_FILL_COLOR))
}
