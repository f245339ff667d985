//! `synth-data`: deterministic synthetic inputs for the other commands.

use std::path::{Path, PathBuf};

use embodi_core::scene::SyntheticWorld;
use embodi_core::toy::{synthesize_pairs, synthesize_triplets};
use serde::Serialize;

use super::{load_config, Status};
use crate::config::{CameraSection, PipelineConfig, RobotSection};
use crate::dataset::{save_dataset, Dataset};
use crate::error::{create_dir, write_file, Error, Result};
use crate::manifest::RunManifest;
use crate::occupancy_file::save_occupancy;
use crate::raster::{write_depth_png, write_mask_png};
use crate::records::{write_frame_index, FrameRecord, GripperRecord, HandRecord, JointRecord};

pub const TRUTH_FILE: &str = "truth.jsonl";
pub const URDF_FILE: &str = "robot.urdf";
pub const OCCUPANCY_FILE: &str = "occupancy.toml";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Paired toy frames for `distill`.
    Pairs,
    /// Human and robot depth frames of the desk scene for `align-*`.
    Scenes,
}

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub kind: SynthKind,
    pub output: PathBuf,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Scene frames per domain.
    pub frames: usize,
}

/// Ground truth for one scene frame index, shared by both domains.
#[derive(Serialize)]
struct TruthRecord {
    frame: usize,
    gripper_pose: [f64; 7],
    opening: f64,
    human_mask_pixels: usize,
    robot_arm_pixels: usize,
}

fn to_json_line<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string(v).map_err(|e| Error::Run(e.to_string()))
}

fn frame_time(k: usize) -> f64 {
    k as f64 / 30.0
}

fn write_scenes(dir: &Path, frames: usize) -> Result<()> {
    let world = SyntheticWorld::desk();
    let human_dir = dir.join("human");
    let robot_dir = dir.join("robot");
    let mut human = Vec::with_capacity(frames);
    let mut robot = Vec::with_capacity(frames);
    let mut truth = String::new();
    for k in 0..frames {
        let h = world.render_human(k)?;
        let depth = format!("depth/{k:04}.png");
        let mask = format!("mask/{k:04}.png");
        write_depth_png(&human_dir.join(&depth), &h.depth)?;
        write_mask_png(&human_dir.join(&mask), &h.mask.0)?;
        human.push(FrameRecord {
            timestamp: frame_time(k),
            depth: depth.clone().into(),
            color: None,
            mask: Some(mask.into()),
            hand: Some(HandRecord::from_observation(frame_time(k), &h.hand)),
            joints: None,
            gripper: None,
        });

        let r = world.render_robot(k)?;
        write_depth_png(&robot_dir.join(&depth), &r.depth)?;
        robot.push(FrameRecord {
            timestamp: frame_time(k),
            depth: depth.into(),
            color: None,
            mask: None,
            hand: None,
            joints: Some(JointRecord {
                timestamp: frame_time(k),
                values: r.joints.values.clone(),
            }),
            gripper: Some(GripperRecord::from_state(frame_time(k), &r.gripper)),
        });

        truth.push_str(&to_json_line(&TruthRecord {
            frame: k,
            gripper_pose: h.truth.pose.to_wxyz_xyz(),
            opening: h.truth.opening,
            human_mask_pixels: h.mask.0.count(),
            robot_arm_pixels: r.arm_pixels.count(),
        })?);
        truth.push('\n');
    }
    write_frame_index(&human_dir, &human)?;
    write_frame_index(&robot_dir, &robot)?;
    write_file(&dir.join(TRUTH_FILE), truth)?;
    write_file(&dir.join(URDF_FILE), crate::urdf::write_chain(&world.chain))?;
    save_occupancy(&dir.join(OCCUPANCY_FILE), &world.occupancy)?;

    let cfg = PipelineConfig {
        camera: CameraSection::from_intrinsics(&world.intrinsics),
        robot: RobotSection {
            urdf: Some(URDF_FILE.into()),
            occupancy: Some(OCCUPANCY_FILE.into()),
        },
        ..PipelineConfig::default()
    };
    let text = toml::to_string(&cfg).map_err(|e| Error::Run(e.to_string()))?;
    write_file(&dir.join(CONFIG_FILE), text)
}

pub fn synth(opts: &SynthOptions) -> Result<Status> {
    let (cfg, _) = load_config(opts.config.as_deref())?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    create_dir(&opts.output)?;
    match opts.kind {
        SynthKind::Pairs => {
            let synth = cfg.data.synth();
            let frames = cfg.data.frames_per_sequence;
            let data = Dataset {
                pairs: synthesize_pairs(seed, cfg.data.train_sequences, frames, &synth)?,
                triplets: synthesize_triplets(seed, cfg.data.heldout_sequences, frames, &synth)?,
            };
            save_dataset(&opts.output, &data)?;
        }
        SynthKind::Scenes => {
            if opts.frames == 0 {
                return Err(Error::Run("--frames must be at least 1".into()));
            }
            // The desk scene is fixed; the seed is recorded but does not change it.
            write_scenes(&opts.output, opts.frames)?;
        }
    }
    RunManifest::new("synth-data", opts.config.as_deref(), None, seed).write(&opts.output)?;
    Ok(Status::Success)
}
