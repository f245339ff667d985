//! Synthetic desk world rendered to depth images with ground-truth labels.
//!
//! A table, a box-shaped object and either a human hand or a ceiling-mounted
//! 3-joint arm share one camera. The hand's fingertips and the arm's TCP
//! follow the same gripper trajectory, so human and robot frames of the same
//! index show equivalent interactions.

#[allow(unused_imports)] // inherent float methods exist only with std
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use nalgebra::{Matrix3, Rotation3, UnitQuaternion};

use crate::error::Result;
use crate::filter::SegmentationMask;
use crate::geometry::{BoolImage, CameraIntrinsics, DepthImage, RigidTransform, Vec3};
use crate::gripper::{GripperState, GripperTemplate, HandObservation};
use crate::kinematics::{
    forward_kinematics, rotation_from_rpy, CollisionPrimitive, Joint, JointKind, JointState,
    KinematicChain, OccupancyModel, Shape,
};

/// Name of the chain's root link; FK poses are expressed in the camera frame.
pub const CAMERA_LINK: &str = "camera";
pub const TOOL_LINK: &str = "tool";

const NEAR: f64 = 0.05;
const FAR: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelLabel {
    Empty,
    Scene,
    Embodiment,
}

/// A posed analytic shape, stored with its camera-to-local transform.
#[derive(Debug, Clone, Copy)]
struct Solid {
    shape: Shape,
    to_local: RigidTransform,
}

impl Solid {
    fn new(shape: Shape, pose: RigidTransform) -> Self {
        Self {
            shape,
            to_local: pose.inverse(),
        }
    }

    fn distance(&self, p: &Vec3) -> f64 {
        self.shape.signed_distance(&self.to_local.apply(p))
    }
}

/// Pose of a capsule spanning segment `a → b` (capsule axis is local z).
fn capsule_between(a: Vec3, b: Vec3, radius: f64) -> (Shape, RigidTransform) {
    let axis = b - a;
    let length = axis.norm();
    let rot = UnitQuaternion::rotation_between(&Vec3::z(), &axis)
        .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vec3::x_axis(), core::f64::consts::PI));
    (
        Shape::Capsule { radius, length },
        RigidTransform::new(rot, 0.5 * (a + b)),
    )
}

/// Camera pose looking from `eye` at `target` with world +z up (camera y down).
fn look_at(eye: Vec3, target: Vec3) -> RigidTransform {
    let forward = (target - eye).normalize();
    let right = forward.cross(&Vec3::z()).normalize();
    let down = forward.cross(&right);
    let m = Matrix3::from_columns(&[right, down, forward]);
    let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
    RigidTransform::new(rot, eye)
}

/// Rendered depth with per-pixel labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendering {
    pub depth: DepthImage,
    pub labels: Vec<PixelLabel>,
}

impl Rendering {
    pub fn embodiment_mask(&self) -> BoolImage {
        BoolImage::new(
            self.depth.width(),
            self.depth.height(),
            self.labels.iter().map(|l| *l == PixelLabel::Embodiment).collect(),
        )
        .expect("labels match depth size")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumanFrame {
    pub index: usize,
    pub depth: DepthImage,
    pub mask: SegmentationMask,
    pub hand: HandObservation,
    /// Gripper state the hand was posed from.
    pub truth: GripperState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotFrame {
    pub index: usize,
    pub depth: DepthImage,
    /// Pixels where the arm was hit.
    pub arm_pixels: BoolImage,
    pub joints: JointState,
    pub gripper: GripperState,
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub intrinsics: CameraIntrinsics,
    /// Camera pose in the world (table) frame.
    pub camera_in_world: RigidTransform,
    pub chain: KinematicChain,
    pub occupancy: OccupancyModel,
    pub template: GripperTemplate,
    /// TCP pose in the tool link frame.
    pub tcp_offset: RigidTransform,
    scene: Vec<Solid>,
}

impl SyntheticWorld {
    /// The default desk: 128×96 camera 1 m from a table, one box object,
    /// arm base hanging 0.45 m above the table.
    pub fn desk() -> Self {
        let intrinsics = CameraIntrinsics::new(110.0, 110.0, 63.5, 47.5, 128, 96, 0.001)
            .expect("valid intrinsics");
        let camera_in_world = look_at(Vec3::new(0.0, -0.7, 0.7), Vec3::new(0.0, 0.05, 0.05));
        let world_to_camera = camera_in_world.inverse();
        let in_camera = |pose: RigidTransform| world_to_camera.compose(&pose);

        let scene = vec![
            Solid::new(
                Shape::Box { size: [4.0, 4.0, 0.02] },
                in_camera(RigidTransform::from_translation(Vec3::new(0.0, 0.0, -0.01))),
            ),
            Solid::new(
                Shape::Box { size: [0.08, 0.08, 0.06] },
                in_camera(RigidTransform::new(
                    UnitQuaternion::from_axis_angle(&Vec3::z_axis(), 0.3),
                    Vec3::new(0.05, 0.08, 0.03),
                )),
            ),
        ];

        let base_in_world = RigidTransform::from_translation(Vec3::new(-0.30, 0.20, 0.45));
        let chain = desk_arm_chain(&in_camera(base_in_world));
        let occupancy = desk_arm_occupancy();
        Self {
            intrinsics,
            camera_in_world,
            chain,
            occupancy,
            template: GripperTemplate::default(),
            tcp_offset: RigidTransform::from_translation(Vec3::new(0.0, 0.0, 0.09)),
            scene,
        }
    }

    /// Arm configuration for frame `k`.
    pub fn joint_state(&self, k: usize) -> JointState {
        let k = k as f64;
        JointState::new()
            .with("shoulder_yaw", -0.33 + 0.15 * (0.5 * k).sin())
            .with("shoulder_pitch", -0.2 + 0.05 * (0.7 * k).sin())
            .with("elbow", 1.466 + 0.08 * (0.4 * k).cos())
    }

    pub fn opening(&self, k: usize) -> f64 {
        0.5 + 0.3 * (0.9 * k as f64).sin()
    }

    /// TCP pose from proprioception: FK of the tool link composed with the TCP offset.
    pub fn tcp_pose(&self, q: &JointState) -> Result<RigidTransform> {
        let poses = forward_kinematics(&self.chain, q)?;
        Ok(poses[TOOL_LINK].compose(&self.tcp_offset))
    }

    pub fn gripper_state(&self, k: usize) -> Result<GripperState> {
        GripperState::new(self.tcp_pose(&self.joint_state(k))?, self.opening(k))
    }

    /// Fingertip and wrist keypoints of a hand realizing `state`.
    pub fn hand_observation(&self, state: &GripperState) -> HandObservation {
        let t = &self.template;
        HandObservation {
            thumb_tip: state.pose.apply(&t.left_tip(state.opening)),
            index_tip: state.pose.apply(&t.right_tip(state.opening)),
            wrist: Some(state.pose.apply(&t.approach_anchor())),
            joints: None,
        }
    }

    fn hand_solids(&self, state: &GripperState) -> Vec<Solid> {
        let t = &self.template;
        let s = state.opening;
        let parts = [
            capsule_between(t.left_tip(s), Vec3::new(-0.035, 0.0, -0.06), 0.009),
            capsule_between(t.right_tip(s), Vec3::new(0.035, 0.0, -0.06), 0.008),
            (
                Shape::Box { size: [0.085, 0.03, 0.07] },
                RigidTransform::from_translation(Vec3::new(0.0, 0.0, -0.09)),
            ),
            capsule_between(Vec3::new(0.0, 0.0, -0.13), Vec3::new(0.0, 0.0, -0.33), 0.03),
        ];
        parts
            .iter()
            .map(|(shape, local)| Solid::new(*shape, state.pose.compose(local)))
            .collect()
    }

    fn arm_solids(&self, q: &JointState) -> Result<Vec<Solid>> {
        let poses = forward_kinematics(&self.chain, q)?;
        let mut out = Vec::new();
        for (link, prims) in self.occupancy.links() {
            for p in prims {
                out.push(Solid::new(p.shape, poses[link].compose(&p.local_pose)));
            }
        }
        Ok(out)
    }

    fn render(&self, embodiment: &[Solid]) -> Rendering {
        let intr = &self.intrinsics;
        let mut depth = DepthImage::zeros(intr.width, intr.height);
        let mut labels = vec![PixelLabel::Empty; intr.width * intr.height];
        for v in 0..intr.height {
            for u in 0..intr.width {
                let dir = intr.ray(u as f64, v as f64).normalize();
                if let Some((p, label)) = self.march(&dir, embodiment) {
                    let raw = (p.z / intr.depth_scale).round();
                    if raw >= 1.0 && raw <= f64::from(u16::MAX) {
                        depth.set(u, v, raw as u16);
                        labels[v * intr.width + u] = label;
                    }
                }
            }
        }
        Rendering { depth, labels }
    }

    fn march(&self, dir: &Vec3, embodiment: &[Solid]) -> Option<(Vec3, PixelLabel)> {
        let closest = |p: &Vec3| {
            let scene = self.scene.iter().map(|s| s.distance(p)).fold(f64::INFINITY, f64::min);
            let body = embodiment.iter().map(|s| s.distance(p)).fold(f64::INFINITY, f64::min);
            if body < scene {
                (body, PixelLabel::Embodiment)
            } else {
                (scene, PixelLabel::Scene)
            }
        };
        let mut t = NEAR;
        let mut last = (f64::INFINITY, PixelLabel::Empty);
        for _ in 0..4000 {
            let p = dir * t;
            last = closest(&p);
            if last.0 < 1e-7 {
                return Some((p, last.1));
            }
            t += last.0;
            if t > FAR {
                return None;
            }
        }
        (last.0 < 1e-4).then(|| (dir * t, last.1))
    }

    /// Scene without any embodiment.
    pub fn render_background(&self) -> Rendering {
        self.render(&[])
    }

    pub fn render_human(&self, k: usize) -> Result<HumanFrame> {
        let truth = self.gripper_state(k)?;
        let r = self.render(&self.hand_solids(&truth));
        Ok(HumanFrame {
            index: k,
            mask: SegmentationMask(r.embodiment_mask()),
            depth: r.depth,
            hand: self.hand_observation(&truth),
            truth,
        })
    }

    pub fn render_robot(&self, k: usize) -> Result<RobotFrame> {
        let joints = self.joint_state(k);
        let gripper = self.gripper_state(k)?;
        let r = self.render(&self.arm_solids(&joints)?);
        Ok(RobotFrame {
            index: k,
            arm_pixels: r.embodiment_mask(),
            depth: r.depth,
            joints,
            gripper,
        })
    }
}

/// Ceiling-mounted yaw-pitch-pitch arm. Root link is the camera; the
/// `camera_to_base` fixed joint carries the extrinsics.
pub fn desk_arm_chain(base_in_camera: &RigidTransform) -> KinematicChain {
    let links = [CAMERA_LINK, "base", "link1", "link2", "link3", TOOL_LINK]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let joint = |name: &str, parent: &str, child: &str, kind, origin, axis, limits| Joint {
        name: name.into(),
        parent: parent.into(),
        child: child.into(),
        kind,
        origin,
        axis,
        limits,
    };
    let t = |x: f64, y: f64, z: f64| RigidTransform::from_translation(Vec3::new(x, y, z));
    let joints = vec![
        joint("camera_to_base", CAMERA_LINK, "base", JointKind::Fixed, *base_in_camera, Vec3::z(), None),
        joint("shoulder_yaw", "base", "link1", JointKind::Revolute, t(0.0, 0.0, 0.0), Vec3::z(), Some((-3.1, 3.1))),
        joint("shoulder_pitch", "link1", "link2", JointKind::Revolute, t(0.0, 0.0, -0.06), Vec3::y(), Some((-2.0, 2.0))),
        joint("elbow", "link2", "link3", JointKind::Revolute, t(0.25, 0.0, 0.0), Vec3::y(), Some((-2.5, 2.5))),
        joint(
            "tool_mount",
            "link3",
            TOOL_LINK,
            JointKind::Fixed,
            RigidTransform::new(rotation_from_rpy(0.0, FRAC_PI_2, 0.0), Vec3::new(0.20, 0.0, 0.0)),
            Vec3::z(),
            None,
        ),
    ];
    KinematicChain::new("desk_arm", links, joints).expect("fixture chain is valid")
}

pub fn desk_arm_occupancy() -> OccupancyModel {
    let along_x = |center: f64| {
        RigidTransform::new(
            UnitQuaternion::from_axis_angle(&Vec3::y_axis(), FRAC_PI_2),
            Vec3::new(center, 0.0, 0.0),
        )
    };
    let prim = |shape, local_pose| CollisionPrimitive { shape, local_pose };
    let mut links: BTreeMap<String, Vec<CollisionPrimitive>> = BTreeMap::new();
    links.insert("base".into(), vec![prim(Shape::Sphere { radius: 0.05 }, RigidTransform::identity())]);
    links.insert(
        "link1".into(),
        vec![prim(
            Shape::Sphere { radius: 0.045 },
            RigidTransform::from_translation(Vec3::new(0.0, 0.0, -0.06)),
        )],
    );
    links.insert(
        "link2".into(),
        vec![prim(Shape::Capsule { radius: 0.03, length: 0.25 }, along_x(0.125))],
    );
    links.insert(
        "link3".into(),
        vec![prim(Shape::Capsule { radius: 0.025, length: 0.20 }, along_x(0.10))],
    );
    links.insert(
        TOOL_LINK.into(),
        vec![prim(
            Shape::Box { size: [0.09, 0.03, 0.09] },
            RigidTransform::from_translation(Vec3::new(0.0, 0.0, 0.045)),
        )],
    );
    OccupancyModel::new(links).expect("fixture occupancy is valid")
}

/// Median pixel footprint `z / fx` over a cloud, meters.
pub fn sampling_pitch(points: &[Vec3], intr: &CameraIntrinsics) -> f64 {
    let mut z: Vec<f64> = points.iter().map(|p| p.z / intr.fx).collect();
    if z.is_empty() {
        return 0.0;
    }
    z.sort_by(f64::total_cmp);
    z[z.len() / 2]
}
