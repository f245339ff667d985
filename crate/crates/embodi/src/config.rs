//! Pipeline configuration: one TOML file, every field optional.
//!
//! `embodi config --print-defaults` prints the full default document.

use std::path::{Path, PathBuf};

use embodi_core::distill::DistillConfig;
use embodi_core::geometry::CameraIntrinsics;
use embodi_core::gripper::{FingertipPairing, GripperTemplate};
use embodi_core::toy::{EncoderDims, StageConfig, SynthConfig, TransitiveConfig};
use serde::{Deserialize, Serialize};

use crate::error::{read_string, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSection {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Meters per depth unit.
    pub depth_scale: f64,
}

impl Default for CameraSection {
    fn default() -> Self {
        Self {
            fx: 110.0,
            fy: 110.0,
            cx: 63.5,
            cy: 47.5,
            width: 128,
            height: 96,
            depth_scale: 0.001,
        }
    }
}

impl CameraSection {
    pub fn from_intrinsics(i: &CameraIntrinsics) -> Self {
        Self {
            fx: i.fx,
            fy: i.fy,
            cx: i.cx,
            cy: i.cy,
            width: i.width,
            height: i.height,
            depth_scale: i.depth_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    /// Occupancy inflation for robot self-filtering, meters.
    pub margin: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            margin: embodi_core::filter::DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    #[default]
    ThumbLeft,
    ThumbRight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GripperSection {
    pub max_open: f64,
    pub finger_length: f64,
    pub pad_width: f64,
    pub plate_overhang: f64,
    pub pad_grid: [usize; 2],
    pub plate_grid: [usize; 2],
    pub anchor_depth: f64,
    /// Which template tip the thumb maps to.
    pub pairing: Pairing,
}

impl Default for GripperSection {
    fn default() -> Self {
        let t = GripperTemplate::default();
        Self {
            max_open: t.max_open,
            finger_length: t.finger_length,
            pad_width: t.pad_width,
            plate_overhang: t.plate_overhang,
            pad_grid: [t.pad_grid.0, t.pad_grid.1],
            plate_grid: [t.plate_grid.0, t.plate_grid.1],
            anchor_depth: t.anchor_depth,
            pairing: Pairing::ThumbLeft,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RobotSection {
    /// URDF file, relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub urdf: Option<PathBuf>,
    /// Occupancy sidecar, relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub occupancy: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub train_sequences: usize,
    pub heldout_sequences: usize,
    pub frames_per_sequence: usize,
    pub image_size: usize,
    pub photometric_shift: f64,
    pub photometric_noise: f64,
    pub free_motion_weight: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        let s = SynthConfig::default();
        Self {
            train_sequences: 8,
            heldout_sequences: 20,
            frames_per_sequence: 8,
            image_size: s.image_size,
            photometric_shift: s.photometric_shift,
            photometric_noise: s.photometric_noise,
            free_motion_weight: s.free_motion_weight,
        }
    }
}

impl DataSection {
    pub fn synth(&self) -> SynthConfig {
        SynthConfig {
            image_size: self.image_size,
            photometric_shift: self.photometric_shift,
            photometric_noise: self.photometric_noise,
            free_motion_weight: self.free_motion_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    pub patch: usize,
    pub hidden: usize,
    pub feature: usize,
}

impl Default for EncoderSection {
    fn default() -> Self {
        let d = EncoderDims::default();
        Self {
            patch: d.patch,
            hidden: d.hidden,
            feature: d.feature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillSection {
    pub lambda: f64,
    pub teacher_temp: f64,
    pub student_temp: f64,
    pub prototypes: usize,
    pub mask_ratio: f64,
    pub koleo_epsilon: f64,
    pub center_momentum: f64,
}

impl Default for DistillSection {
    fn default() -> Self {
        let d = DistillConfig::default();
        Self {
            lambda: d.lambda,
            teacher_temp: d.teacher_temp,
            student_temp: d.student_temp,
            prototypes: d.prototypes,
            mask_ratio: d.mask_ratio,
            koleo_epsilon: d.koleo_epsilon,
            center_momentum: d.center_momentum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageSection {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub local_views: usize,
    pub local_scale: [f64; 2],
    pub roint_probability: f64,
}

impl StageSection {
    fn from_core(s: StageConfig) -> Self {
        Self {
            steps: s.steps,
            batch_size: s.batch_size,
            learning_rate: s.learning_rate,
            local_views: s.local_views,
            local_scale: [s.local_scale.0, s.local_scale.1],
            roint_probability: s.roint_probability,
        }
    }

    fn to_core(&self) -> StageConfig {
        StageConfig {
            steps: self.steps,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            local_views: self.local_views,
            local_scale: (self.local_scale[0], self.local_scale[1]),
            roint_probability: self.roint_probability,
        }
    }
}

impl Default for StageSection {
    fn default() -> Self {
        Self::from_core(StageConfig::stage1())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub pca_components: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { pca_components: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads for per-frame conversion.
    pub jobs: usize,
    pub camera: CameraSection,
    pub filter: FilterSection,
    pub gripper: GripperSection,
    pub robot: RobotSection,
    pub data: DataSection,
    pub encoder: EncoderSection,
    pub distill: DistillSection,
    pub stage1: StageSection,
    pub stage2: StageSection,
    pub analysis: AnalysisSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 1,
            camera: CameraSection::default(),
            filter: FilterSection::default(),
            gripper: GripperSection::default(),
            robot: RobotSection::default(),
            data: DataSection::default(),
            encoder: EncoderSection::default(),
            distill: DistillSection::default(),
            stage1: StageSection::from_core(StageConfig::stage1()),
            stage2: StageSection::from_core(StageConfig::stage2()),
            analysis: AnalysisSection::default(),
        }
    }
}

fn in_section(section: &str) -> impl Fn(embodi_core::Error) -> Error + '_ {
    move |e| match e {
        embodi_core::Error::Config { field, reason } => Error::Config(format!("{section}.{field}: {reason}")),
        other => Error::Config(format!("{section}: {other}")),
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string() + &span_hint(&e)))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg = Self::parse(&read_string(path)?).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok(cfg)
    }

    /// Commented default document.
    pub fn defaults_toml() -> String {
        let body = toml::to_string(&Self::default()).expect("defaults serialize");
        format!(
            "# embodi pipeline configuration; every key is optional.\n\
             # camera: pinhole intrinsics, depth_scale in meters per unit.\n\
             # filter.margin: robot occupancy inflation in meters.\n\
             # gripper: canonical template geometry in meters; pairing = thumb-left | thumb-right.\n\
             # robot: urdf and occupancy paths, relative to this file.\n\
             # data, encoder, distill, stage1, stage2: toy distillation run.\n\n{body}"
        )
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        let c = &self.camera;
        CameraIntrinsics::new(c.fx, c.fy, c.cx, c.cy, c.width, c.height, c.depth_scale)
            .map_err(|e| Error::Config(format!("camera: {e}")))
    }

    pub fn template(&self) -> Result<GripperTemplate> {
        let g = &self.gripper;
        let t = GripperTemplate {
            max_open: g.max_open,
            finger_length: g.finger_length,
            pad_width: g.pad_width,
            plate_overhang: g.plate_overhang,
            pad_grid: (g.pad_grid[0], g.pad_grid[1]),
            plate_grid: (g.plate_grid[0], g.plate_grid[1]),
            anchor_depth: g.anchor_depth,
        };
        t.validate().map_err(in_section("gripper"))?;
        Ok(t)
    }

    pub fn pairing(&self) -> FingertipPairing {
        match self.gripper.pairing {
            Pairing::ThumbLeft => FingertipPairing::ThumbLeft,
            Pairing::ThumbRight => FingertipPairing::ThumbRight,
        }
    }

    pub fn margin(&self) -> Result<f64> {
        let m = self.filter.margin;
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::Config(format!("filter.margin: must be >= 0, got {m}")));
        }
        Ok(m)
    }

    pub fn jobs(&self) -> Result<usize> {
        if self.jobs == 0 {
            return Err(Error::Config("jobs: must be at least 1".into()));
        }
        Ok(self.jobs)
    }

    pub fn transitive(&self) -> Result<TransitiveConfig> {
        let dims = EncoderDims {
            image: self.data.image_size,
            patch: self.encoder.patch,
            hidden: self.encoder.hidden,
            feature: self.encoder.feature,
        };
        dims.validate().map_err(in_section("encoder"))?;
        let d = &self.distill;
        let distill = DistillConfig {
            lambda: d.lambda,
            teacher_temp: d.teacher_temp,
            student_temp: d.student_temp,
            prototypes: d.prototypes,
            mask_ratio: d.mask_ratio,
            koleo_epsilon: d.koleo_epsilon,
            center_momentum: d.center_momentum,
        };
        distill.validate().map_err(in_section("distill"))?;
        let stage1 = self.stage1.to_core();
        stage1.validate().map_err(in_section("stage1"))?;
        let stage2 = self.stage2.to_core();
        stage2.validate().map_err(in_section("stage2"))?;
        self.data.synth().validate().map_err(in_section("data"))?;
        for (name, v) in [
            ("train_sequences", self.data.train_sequences),
            ("heldout_sequences", self.data.heldout_sequences),
            ("frames_per_sequence", self.data.frames_per_sequence),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("data.{name}: must be at least 1")));
            }
        }
        Ok(TransitiveConfig {
            dims,
            distill,
            stage1,
            stage2,
        })
    }
}

fn span_hint(e: &toml::de::Error) -> String {
    e.span().map(|s| format!(" (at byte {})", s.start)).unwrap_or_default()
}
