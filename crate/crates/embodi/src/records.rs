//! Per-frame JSON records. An input directory holds `frames.jsonl`, one
//! [`FrameRecord`] per line; image paths are relative to that directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use embodi_core::geometry::{RigidTransform, Vec3};
use embodi_core::gripper::{GripperState, HandObservation};
use embodi_core::kinematics::JointState;
use serde::{Deserialize, Serialize};

use crate::error::{read_string, write_file, Error, Result};

pub const FRAME_INDEX: &str = "frames.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointRecord {
    pub timestamp: f64,
    pub values: BTreeMap<String, f64>,
}

impl JointRecord {
    pub fn to_state(&self) -> JointState {
        self.values.iter().map(|(k, v)| (k.clone(), *v)).collect()
    }
}

/// `pose` is `qw qx qy qz tx ty tz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripperRecord {
    pub timestamp: f64,
    pub pose: [f64; 7],
    pub opening: f64,
}

impl GripperRecord {
    pub fn from_state(timestamp: f64, s: &GripperState) -> Self {
        Self {
            timestamp,
            pose: s.pose.to_wxyz_xyz(),
            opening: s.opening,
        }
    }

    pub fn to_state(&self) -> embodi_core::Result<GripperState> {
        GripperState::new(RigidTransform::from_wxyz_xyz(self.pose)?, self.opening)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandRecord {
    pub timestamp: f64,
    pub thumb_tip: [f64; 3],
    pub index_tip: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wrist: Option<[f64; 3]>,
}

impl HandRecord {
    pub fn from_observation(timestamp: f64, h: &HandObservation) -> Self {
        let a = |v: &Vec3| [v.x, v.y, v.z];
        Self {
            timestamp,
            thumb_tip: a(&h.thumb_tip),
            index_tip: a(&h.index_tip),
            wrist: h.wrist.as_ref().map(a),
        }
    }

    pub fn to_observation(&self) -> embodi_core::Result<HandObservation> {
        HandObservation::new(
            Vec3::from(self.thumb_tip),
            Vec3::from(self.index_tip),
            self.wrist.map(Vec3::from),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub timestamp: f64,
    pub depth: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hand: Option<HandRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joints: Option<JointRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gripper: Option<GripperRecord>,
}

/// Embodiment evidence carried by a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evidence<'a> {
    Human { mask: &'a Path, hand: &'a HandRecord },
    Robot { joints: &'a JointRecord, gripper: &'a GripperRecord },
}

impl FrameRecord {
    /// Enforces that exactly one of (mask + hand) and (joints + gripper) is present.
    pub fn evidence(&self) -> std::result::Result<Evidence<'_>, String> {
        let human = self.mask.is_some() || self.hand.is_some();
        let robot = self.joints.is_some() || self.gripper.is_some();
        match (human, robot) {
            (true, true) => Err("mixed human and robot evidence".into()),
            (false, false) => Err("no embodiment evidence".into()),
            (true, false) => match (&self.mask, &self.hand) {
                (Some(mask), Some(hand)) => Ok(Evidence::Human { mask, hand }),
                (None, _) => Err("missing mask".into()),
                (_, None) => Err("missing hand observation".into()),
            },
            (false, true) => match (&self.joints, &self.gripper) {
                (Some(joints), Some(gripper)) => Ok(Evidence::Robot { joints, gripper }),
                (None, _) => Err("missing joint state".into()),
                (_, None) => Err("missing gripper state".into()),
            },
        }
    }
}

/// One entry per line of `frames.jsonl`; unparsable lines become `Err(reason)`
/// so that the frame can be reported as failed.
pub fn read_frame_index(dir: &Path) -> Result<Vec<std::result::Result<FrameRecord, String>>> {
    let path = dir.join(FRAME_INDEX);
    if !path.exists() {
        return Ok(Vec::new());
    }
    Ok(read_string(&path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| format!("invalid record: {e}")))
        .collect())
}

pub fn write_frame_index(dir: &Path, records: &[FrameRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::Run(e.to_string()))?);
        out.push('\n');
    }
    write_file(&dir.join(FRAME_INDEX), out)
}
