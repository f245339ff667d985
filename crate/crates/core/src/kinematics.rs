//! Serial/tree kinematic chains, forward kinematics and analytic occupancy volumes.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use nalgebra::{UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    Fixed,
    Revolute,
    Prismatic,
}

impl JointKind {
    pub fn parse(kind: &str) -> Result<Self> {
        match kind {
            "fixed" => Ok(JointKind::Fixed),
            "revolute" => Ok(JointKind::Revolute),
            "prismatic" => Ok(JointKind::Prismatic),
            other => Err(Error::Unsupported(format!("joint type `{other}`"))),
        }
    }

    pub fn is_moving(self) -> bool {
        !matches!(self, JointKind::Fixed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: String,
    pub child: String,
    pub kind: JointKind,
    pub origin: RigidTransform,
    /// Unit motion axis in the joint frame. Unused for fixed joints.
    pub axis: Vec3,
    /// `(lower, upper)` in radians or meters.
    pub limits: Option<(f64, f64)>,
}

impl Joint {
    /// Transform contributed by the joint variable alone.
    pub fn motion(&self, value: f64) -> RigidTransform {
        match self.kind {
            JointKind::Fixed => RigidTransform::identity(),
            JointKind::Revolute => RigidTransform::from_rotation(UnitQuaternion::from_axis_angle(
                &nalgebra::Unit::new_unchecked(self.axis),
                value,
            )),
            JointKind::Prismatic => RigidTransform::from_translation(self.axis * value),
        }
    }
}

/// URDF `rpy`: fixed-axis roll about x, then pitch about y, then yaw about z.
pub fn rotation_from_rpy(roll: f64, pitch: f64, yaw: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_euler_angles(roll, pitch, yaw)
}

/// A validated kinematic tree.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    name: String,
    links: Vec<String>,
    joints: Vec<Joint>,
    root: String,
    /// Joint indices in breadth-first order from the root.
    order: Vec<usize>,
}

impl KinematicChain {
    /// Validates the joint graph (single root, tree, unit axes, ordered limits).
    /// Non-unit axes on moving joints are normalized; zero axes are rejected.
    pub fn new(name: impl Into<String>, links: Vec<String>, mut joints: Vec<Joint>) -> Result<Self> {
        let link_set: BTreeSet<&str> = links.iter().map(String::as_str).collect();
        if link_set.len() != links.len() {
            return Err(Error::Structure("duplicate link names".into()));
        }
        if links.is_empty() {
            return Err(Error::Structure("chain has no links".into()));
        }
        let mut joint_names = BTreeSet::new();
        let mut parent_of: BTreeMap<&str, &str> = BTreeMap::new();
        for joint in &joints {
            if !joint_names.insert(joint.name.as_str()) {
                return Err(Error::Structure(format!("duplicate joint `{}`", joint.name)));
            }
            if joint.parent == joint.child {
                return Err(Error::Structure(format!(
                    "joint `{}` connects link `{}` to itself",
                    joint.name, joint.parent
                )));
            }
            for link in [&joint.parent, &joint.child] {
                if !link_set.contains(link.as_str()) {
                    return Err(Error::Structure(format!(
                        "joint `{}` references unknown link `{link}`",
                        joint.name
                    )));
                }
            }
            if parent_of.insert(&joint.child, &joint.parent).is_some() {
                return Err(Error::Structure(format!(
                    "link `{}` has more than one parent joint",
                    joint.child
                )));
            }
        }
        let roots: Vec<&str> = links
            .iter()
            .map(String::as_str)
            .filter(|l| !parent_of.contains_key(l))
            .collect();
        let root = match roots.as_slice() {
            [root] => (*root).to_string(),
            [] => return Err(Error::Structure("joint graph has a cycle (no root link)".into())),
            many => {
                return Err(Error::Structure(format!(
                    "expected one root link, found {}: {}",
                    many.len(),
                    many.join(", ")
                )))
            }
        };

        for joint in &mut joints {
            if let Some((lo, hi)) = joint.limits {
                if !(lo <= hi) {
                    return Err(Error::Validation(format!(
                        "joint `{}` has lower limit {lo} above upper limit {hi}",
                        joint.name
                    )));
                }
            }
            if joint.kind.is_moving() {
                let n = joint.axis.norm();
                if !(n.is_finite() && n > 1e-12) {
                    return Err(Error::Validation(format!(
                        "joint `{}` has a zero-length axis",
                        joint.name
                    )));
                }
                joint.axis /= n;
            }
        }

        let mut children: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, joint) in joints.iter().enumerate() {
            children.entry(joint.parent.as_str()).or_default().push(i);
        }
        let mut order = Vec::with_capacity(joints.len());
        let mut queue = VecDeque::from([root.as_str()]);
        while let Some(link) = queue.pop_front() {
            for &j in children.get(link).map(Vec::as_slice).unwrap_or(&[]) {
                order.push(j);
                queue.push_back(joints[j].child.as_str());
            }
        }
        if order.len() != joints.len() {
            return Err(Error::Structure(
                "joint graph has a cycle unreachable from the root".into(),
            ));
        }

        Ok(Self {
            name: name.into(),
            links,
            joints,
            root,
            order,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn links(&self) -> &[String] {
        &self.links
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn joint(&self, name: &str) -> Option<&Joint> {
        self.joints.iter().find(|j| j.name == name)
    }

    pub fn moving_joints(&self) -> impl Iterator<Item = &Joint> {
        self.joints.iter().filter(|j| j.kind.is_moving())
    }

    pub fn has_link(&self, name: &str) -> bool {
        self.links.iter().any(|l| l == name)
    }
}

/// Joint values keyed by joint name (radians or meters).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JointState {
    pub values: BTreeMap<String, f64>,
}

impl JointState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, joint: &str, value: f64) -> Self {
        self.values.insert(joint.into(), value);
        self
    }

    pub fn get(&self, joint: &str) -> Option<f64> {
        self.values.get(joint).copied()
    }
}

impl FromIterator<(String, f64)> for JointState {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        Self {
            values: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitViolation {
    pub joint: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Joint values outside their nominal limits. Logged states may legitimately
/// exceed limits, so this is reported separately from FK.
pub fn limit_violations(chain: &KinematicChain, q: &JointState) -> Vec<LimitViolation> {
    chain
        .moving_joints()
        .filter_map(|j| {
            let (lower, upper) = j.limits?;
            let value = q.get(&j.name)?;
            (value < lower || value > upper).then(|| LimitViolation {
                joint: j.name.clone(),
                value,
                lower,
                upper,
            })
        })
        .collect()
}

pub type LinkPoses = BTreeMap<String, RigidTransform>;

/// Pose of every link in the base frame; the root link sits at identity.
pub fn forward_kinematics(chain: &KinematicChain, q: &JointState) -> Result<LinkPoses> {
    forward_kinematics_from(chain, q, &RigidTransform::identity())
}

/// Forward kinematics with the root link placed at `base`.
pub fn forward_kinematics_from(
    chain: &KinematicChain,
    q: &JointState,
    base: &RigidTransform,
) -> Result<LinkPoses> {
    let mut poses = LinkPoses::new();
    poses.insert(chain.root.clone(), *base);
    for &j in &chain.order {
        let joint = &chain.joints[j];
        let value = if joint.kind.is_moving() {
            let v = q.get(&joint.name).ok_or_else(|| {
                Error::Validation(format!("missing value for joint `{}`", joint.name))
            })?;
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "joint `{}` has a non-finite value",
                    joint.name
                )));
            }
            v
        } else {
            0.0
        };
        let parent = poses[&joint.parent];
        let pose = parent.compose(&joint.origin).compose(&joint.motion(value));
        poses.insert(joint.child.clone(), pose);
    }
    Ok(poses)
}

/// Analytic collision shape in its local frame. Capsules run along local z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Sphere { radius: f64 },
    /// Segment from `z = -length/2` to `z = +length/2`, swept by `radius`.
    Capsule { radius: f64, length: f64 },
    /// Full edge lengths along local x, y, z.
    Box { size: [f64; 3] },
}

impl Shape {
    /// Exact signed distance from `p` (local frame) to the surface; negative inside.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        match *self {
            Shape::Sphere { radius } => p.norm() - radius,
            Shape::Capsule { radius, length } => {
                let h = 0.5 * length;
                let z = p.z.clamp(-h, h);
                (p - Vec3::new(0.0, 0.0, z)).norm() - radius
            }
            Shape::Box { size } => {
                let q = Vector3::new(
                    p.x.abs() - 0.5 * size[0],
                    p.y.abs() - 0.5 * size[1],
                    p.z.abs() - 0.5 * size[2],
                );
                let outside = q.map(|v| v.max(0.0)).norm();
                let inside = q.x.max(q.y).max(q.z).min(0.0);
                outside + inside
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let valid = match *self {
            Shape::Sphere { radius } => ok(radius),
            Shape::Capsule { radius, length } => ok(radius) && ok(length),
            Shape::Box { size } => size.iter().all(|&s| ok(s)),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "collision primitive {self:?} must have strictly positive dimensions"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionPrimitive {
    pub shape: Shape,
    /// Pose of the primitive in its link frame.
    pub local_pose: RigidTransform,
}

/// Per-link collision primitives; the union over links is the occupancy volume.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OccupancyModel {
    links: BTreeMap<String, Vec<CollisionPrimitive>>,
}

impl OccupancyModel {
    pub fn new(links: BTreeMap<String, Vec<CollisionPrimitive>>) -> Result<Self> {
        for prim in links.values().flatten() {
            prim.shape.validate()?;
        }
        Ok(Self { links })
    }

    pub fn links(&self) -> &BTreeMap<String, Vec<CollisionPrimitive>> {
        &self.links
    }

    /// Checks that every referenced link exists in `chain`.
    pub fn check_against(&self, chain: &KinematicChain) -> Result<()> {
        match self.links.keys().find(|l| !chain.has_link(l)) {
            Some(missing) => Err(Error::Validation(format!(
                "occupancy model references unknown link `{missing}`"
            ))),
            None => Ok(()),
        }
    }

    /// Resolves every primitive to its world pose for repeated queries.
    pub fn posed(&self, link_poses: &LinkPoses) -> Result<PosedOccupancy> {
        let mut prims = Vec::new();
        for (link, list) in &self.links {
            let pose = link_poses.get(link).ok_or_else(|| {
                Error::Validation(format!("no pose supplied for link `{link}`"))
            })?;
            for prim in list {
                let world = pose.compose(&prim.local_pose);
                prims.push((prim.shape, world.inverse()));
            }
        }
        Ok(PosedOccupancy { prims })
    }
}

/// Occupancy primitives with cached world-to-primitive transforms.
#[derive(Debug, Clone)]
pub struct PosedOccupancy {
    prims: Vec<(Shape, RigidTransform)>,
}

impl PosedOccupancy {
    /// Minimum signed distance over all primitives (`+inf` for an empty model).
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.prims
            .iter()
            .map(|(shape, to_local)| shape.signed_distance(&to_local.apply(p)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: &Vec3, margin: f64) -> bool {
        self.signed_distance(p) <= margin
    }
}

/// True iff `p` lies within `margin` of the posed occupancy volume.
pub fn point_in_occupancy(
    model: &OccupancyModel,
    link_poses: &LinkPoses,
    p: &Vec3,
    margin: f64,
) -> Result<bool> {
    check_margin(margin)?;
    Ok(model.posed(link_poses)?.contains(p, margin))
}

pub(crate) fn check_margin(margin: f64) -> Result<()> {
    if margin.is_finite() && margin >= 0.0 {
        Ok(())
    } else {
        Err(Error::Range(format!("margin must be finite and >= 0, got {margin}")))
    }
}
