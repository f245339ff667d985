//! `align-human` and `align-robot`: depth frames to hybrid point clouds.

use std::path::{Path, PathBuf};

use embodi_core::filter::{filter_human, filter_robot, FilterReport};
use embodi_core::geometry::{unproject, CameraIntrinsics, PointCloud};
use embodi_core::gripper::{assemble_hybrid, fit_gripper_with_pairing, FingertipPairing, GripperTemplate};
use embodi_core::kinematics::{limit_violations, KinematicChain, OccupancyModel};
use rayon::prelude::*;
use serde::Serialize;

use super::{load_config, write_csv, Status};
use crate::error::{create_dir, read_string, Error, Result};
use crate::manifest::{FrameEntry, RunManifest};
use crate::occupancy_file::load_occupancy;
use crate::ply::save_ply;
use crate::raster::{read_depth_png, read_mask_png};
use crate::records::{read_frame_index, Evidence, FrameRecord};

pub const REPORT_FILE: &str = "filter_report.csv";

#[derive(Debug, Clone, Default)]
pub struct AlignOptions {
    pub input: PathBuf,
    pub output: PathBuf,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    /// Robot path only: overrides `filter.margin`.
    pub margin: Option<f64>,
    pub urdf: Option<PathBuf>,
    pub occupancy: Option<PathBuf>,
}

/// `0007_human.ply`: frame index first so both domains sort together.
pub fn ply_name(index: usize, tag: &str) -> String {
    format!("{index:04}_{tag}.ply")
}

struct Converted {
    cloud: PointCloud,
    report: FilterReport,
    opening: f64,
    residual: Option<f64>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct ReportRow {
    frame: usize,
    status: String,
    total: Option<usize>,
    removed: Option<usize>,
    kept: Option<usize>,
    margin: Option<f64>,
    opening: Option<f64>,
    residual: Option<f64>,
}

type FrameResult = std::result::Result<Converted, String>;

fn run_frames<F>(records: &[std::result::Result<FrameRecord, String>], jobs: usize, convert: F) -> Result<Vec<FrameResult>>
where
    F: Fn(&FrameRecord) -> FrameResult + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Run(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        records
            .par_iter()
            .map(|r| match r {
                Ok(rec) => convert(rec),
                Err(reason) => Err(reason.clone()),
            })
            .collect()
    }))
}

fn finish(
    mut manifest: RunManifest,
    output: &Path,
    tag: &str,
    results: Vec<FrameResult>,
) -> Result<Status> {
    let mut rows = Vec::with_capacity(results.len());
    for (index, res) in results.into_iter().enumerate() {
        match res {
            Ok(c) => {
                let name = ply_name(index, tag);
                save_ply(&output.join(&name), &c.cloud)?;
                for w in &c.warnings {
                    eprintln!("warning: frame {index}: {w}");
                }
                rows.push(ReportRow {
                    frame: index,
                    status: "converted".into(),
                    total: Some(c.report.total),
                    removed: Some(c.report.removed),
                    kept: Some(c.report.kept),
                    margin: Some(c.report.margin),
                    opening: Some(c.opening),
                    residual: c.residual,
                });
                manifest.push(FrameEntry::converted(index, name, c.warnings));
            }
            Err(reason) => {
                eprintln!("frame {index} failed: {reason}");
                rows.push(ReportRow {
                    frame: index,
                    status: format!("failed: {reason}"),
                    total: None,
                    removed: None,
                    kept: None,
                    margin: None,
                    opening: None,
                    residual: None,
                });
                manifest.push(FrameEntry::failed(index, &reason));
            }
        }
    }
    write_csv(&output.join(REPORT_FILE), &rows)?;
    manifest.write(output)?;
    match (manifest.converted, manifest.failed) {
        (0, n) => Err(Error::Run(format!("all {n} frames failed"))),
        (_, 0) => Ok(Status::Success),
        _ => Ok(Status::Partial),
    }
}

fn load_records(input: &Path) -> Result<Vec<std::result::Result<FrameRecord, String>>> {
    if !input.is_dir() {
        return Err(Error::Run(format!("input directory {} does not exist", input.display())));
    }
    let records = read_frame_index(input)?;
    if records.is_empty() {
        return Err(Error::Run("no frames".into()));
    }
    Ok(records)
}

fn read_depth(input: &Path, rec: &FrameRecord) -> std::result::Result<embodi_core::geometry::DepthImage, String> {
    let path = input.join(&rec.depth);
    if !path.is_file() {
        return Err("missing depth".into());
    }
    read_depth_png(&path).map_err(|e| format!("unreadable depth: {e}"))
}

fn convert_human(
    input: &Path,
    rec: &FrameRecord,
    intr: &CameraIntrinsics,
    template: &GripperTemplate,
    pairing: FingertipPairing,
) -> FrameResult {
    let (mask_rel, hand) = match rec.evidence()? {
        Evidence::Human { mask, hand } => (mask, hand),
        Evidence::Robot { .. } => return Err("robot frame in human input".into()),
    };
    let mask_path = input.join(mask_rel);
    if !mask_path.is_file() {
        return Err("missing mask".into());
    }
    let mask = read_mask_png(&mask_path).map_err(|e| format!("unreadable mask: {e}"))?;
    let depth = read_depth(input, rec)?;
    let (bg, report) = filter_human(&depth, intr, &mask).map_err(|e| e.to_string())?;
    let obs = hand.to_observation().map_err(|e| e.to_string())?;
    let fit = fit_gripper_with_pairing(&obs, template, pairing).map_err(|e| e.to_string())?;
    let cloud = assemble_hybrid(&bg, &fit.state, template).map_err(|e| e.to_string())?;
    Ok(Converted {
        cloud,
        report,
        opening: fit.state.opening,
        residual: Some(fit.residual),
        warnings: Vec::new(),
    })
}

pub fn align_human(opts: &AlignOptions) -> Result<Status> {
    let (cfg, _) = load_config(opts.config.as_deref())?;
    let intr = cfg.intrinsics()?;
    let template = cfg.template()?;
    let pairing = cfg.pairing();
    let jobs = opts.jobs.unwrap_or(cfg.jobs()?);
    let records = load_records(&opts.input)?;
    create_dir(&opts.output)?;
    let results = run_frames(&records, jobs.max(1), |rec| {
        convert_human(&opts.input, rec, &intr, &template, pairing)
    })?;
    let manifest = RunManifest::new(
        "align-human",
        opts.config.as_deref(),
        Some(&opts.input),
        opts.seed.unwrap_or(cfg.seed),
    );
    finish(manifest, &opts.output, "human", results)
}

struct RobotModel {
    chain: KinematicChain,
    occupancy: OccupancyModel,
}

fn load_robot(opts: &AlignOptions, cfg_robot: &crate::config::RobotSection, base: &Path) -> Result<RobotModel> {
    let pick = |flag: &Option<PathBuf>, from_cfg: &Option<PathBuf>, what: &str| -> Result<PathBuf> {
        flag.clone()
            .or_else(|| from_cfg.as_ref().map(|p| base.join(p)))
            .ok_or_else(|| Error::Run(format!("align-robot needs a {what} file (--{what} or [robot].{what})")))
    };
    let urdf_path = pick(&opts.urdf, &cfg_robot.urdf, "urdf")?;
    let chain = crate::urdf::parse_chain(&read_string(&urdf_path)?)
        .map_err(|e| Error::Run(format!("{}: {e}", urdf_path.display())))?;
    let occ_path = pick(&opts.occupancy, &cfg_robot.occupancy, "occupancy")?;
    let occupancy = load_occupancy(&occ_path)?;
    occupancy
        .check_against(&chain)
        .map_err(|e| Error::Run(format!("{}: {e}", occ_path.display())))?;
    Ok(RobotModel { chain, occupancy })
}

fn convert_robot(
    input: &Path,
    rec: &FrameRecord,
    intr: &CameraIntrinsics,
    template: &GripperTemplate,
    robot: &RobotModel,
    margin: f64,
) -> FrameResult {
    let (joints, gripper) = match rec.evidence()? {
        Evidence::Robot { joints, gripper } => (joints, gripper),
        Evidence::Human { .. } => return Err("human frame in robot input".into()),
    };
    let depth = read_depth(input, rec)?;
    let cloud = unproject(&depth, intr, None).map_err(|e| e.to_string())?;
    let q = joints.to_state();
    let warnings = limit_violations(&robot.chain, &q)
        .iter()
        .map(|v| format!("joint {} = {} outside limits [{}, {}]", v.joint, v.value, v.lower, v.upper))
        .collect();
    let (bg, report) =
        filter_robot(&cloud, &robot.chain, &robot.occupancy, &q, margin).map_err(|e| e.to_string())?;
    // Proprioceptive state is used as is; the fingertip fitter is never involved.
    let state = gripper.to_state().map_err(|e| e.to_string())?;
    let cloud = assemble_hybrid(&bg, &state, template).map_err(|e| e.to_string())?;
    Ok(Converted {
        cloud,
        report,
        opening: state.opening,
        residual: None,
        warnings,
    })
}

pub fn align_robot(opts: &AlignOptions) -> Result<Status> {
    let (mut cfg, base) = load_config(opts.config.as_deref())?;
    if let Some(m) = opts.margin {
        cfg.filter.margin = m;
    }
    let margin = cfg.margin()?;
    let intr = cfg.intrinsics()?;
    let template = cfg.template()?;
    let jobs = opts.jobs.unwrap_or(cfg.jobs()?);
    let robot = load_robot(opts, &cfg.robot, &base)?;
    let records = load_records(&opts.input)?;
    create_dir(&opts.output)?;
    let results = run_frames(&records, jobs.max(1), |rec| {
        convert_robot(&opts.input, rec, &intr, &template, &robot, margin)
    })?;
    let manifest = RunManifest::new(
        "align-robot",
        opts.config.as_deref(),
        Some(&opts.input),
        opts.seed.unwrap_or(cfg.seed),
    );
    finish(manifest, &opts.output, "robot", results)
}
