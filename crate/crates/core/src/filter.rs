//! Removal of embodiment geometry (human hand/arm or robot arm) from scene clouds.

use alloc::vec::Vec;

use crate::error::Result;
use crate::geometry::{unproject, BoolImage, CameraIntrinsics, DepthImage, PointCloud};
use crate::kinematics::{
    check_margin, forward_kinematics, JointState, KinematicChain, OccupancyModel,
};

/// Default occupancy inflation, on the order of RGB-D depth noise at 1 m.
pub const DEFAULT_MARGIN: f64 = 0.01;

/// Pixel mask where `true` marks embodiment (hand/arm) pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask(pub BoolImage);

impl SegmentationMask {
    pub fn image(&self) -> &BoolImage {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterReport {
    pub total: usize,
    pub removed: usize,
    pub kept: usize,
    /// Occupancy margin in meters; zero for mask-based filtering.
    pub margin: f64,
}

/// Unprojects only the non-embodiment pixels of a human demonstration frame.
pub fn filter_human(
    depth: &DepthImage,
    intr: &CameraIntrinsics,
    mask: &SegmentationMask,
) -> Result<(PointCloud, FilterReport)> {
    let keep = mask.0.not();
    let cloud = unproject(depth, intr, Some(&keep))?;
    let total = depth.valid_count();
    Ok((
        cloud.clone(),
        FilterReport {
            total,
            removed: total - cloud.len(),
            kept: cloud.len(),
            margin: 0.0,
        },
    ))
}

/// Per-point embodiment labels: `true` where the point lies within `margin` of
/// the robot occupancy volume posed at `q`.
pub fn classify_robot_points(
    cloud: &PointCloud,
    chain: &KinematicChain,
    occ: &OccupancyModel,
    q: &JointState,
    margin: f64,
) -> Result<Vec<bool>> {
    check_margin(margin)?;
    occ.check_against(chain)?;
    let poses = forward_kinematics(chain, q)?;
    let posed = occ.posed(&poses)?;
    Ok(cloud
        .points()
        .iter()
        .map(|p| posed.contains(p, margin))
        .collect())
}

/// Drops every point within `margin` of the posed robot occupancy, keeping order and colors.
pub fn filter_robot(
    cloud: &PointCloud,
    chain: &KinematicChain,
    occ: &OccupancyModel,
    q: &JointState,
    margin: f64,
) -> Result<(PointCloud, FilterReport)> {
    let robot = classify_robot_points(cloud, chain, occ, q, margin)?;
    let kept = cloud.select(|i| !robot[i]);
    let report = FilterReport {
        total: cloud.len(),
        removed: cloud.len() - kept.len(),
        kept: kept.len(),
        margin,
    };
    Ok((kept, report))
}

impl From<BoolImage> for SegmentationMask {
    fn from(img: BoolImage) -> Self {
        SegmentationMask(img)
    }
}
