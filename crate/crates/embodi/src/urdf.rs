//! Reader and writer for the supported URDF subset: `robot`, `link`,
//! `joint` (fixed, revolute, prismatic) with `origin`, `axis` and `limit`.
//!
//! Link `visual`/`collision`/`inertial` blocks with primitive geometry are
//! accepted and ignored; collision volumes come from the occupancy sidecar.
//! Meshes, mimic joints and transmissions are rejected.

use std::fmt::Write as _;

use embodi_core::geometry::{RigidTransform, Vec3};
use embodi_core::kinematics::{rotation_from_rpy, Joint, JointKind, KinematicChain};
use embodi_core::{Error, Result};
use roxmltree::{Document, Node};

fn unsupported(what: impl Into<String>) -> Error {
    Error::Unsupported(what.into())
}

fn parse_triple(node: Node<'_, '_>, attr: &str, default: [f64; 3]) -> Result<[f64; 3]> {
    let Some(text) = node.attribute(attr) else {
        return Ok(default);
    };
    let v: Vec<f64> = text
        .split_whitespace()
        .map(str::parse::<f64>)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Validation(format!("<{}> {attr}=\"{text}\" is not numeric", node.tag_name().name())))?;
    if v.len() != 3 || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation(format!(
            "<{}> {attr}=\"{text}\" needs three finite numbers",
            node.tag_name().name()
        )));
    }
    Ok([v[0], v[1], v[2]])
}

fn parse_scalar(node: Node<'_, '_>, attr: &str) -> Result<Option<f64>> {
    node.attribute(attr)
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Validation(format!("<{}> {attr}=\"{t}\" is not a number", node.tag_name().name())))
        })
        .transpose()
}

fn elements<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(Node::is_element)
}

fn check_link(link: Node<'_, '_>) -> Result<()> {
    for child in link.descendants().filter(Node::is_element) {
        match child.tag_name().name() {
            "mesh" => return Err(unsupported("mesh geometry (use the occupancy sidecar)")),
            "link" | "visual" | "collision" | "inertial" | "origin" | "geometry" | "box" | "cylinder"
            | "sphere" | "capsule" | "material" | "color" | "mass" | "inertia" => {}
            other => return Err(unsupported(format!("<{other}> inside link"))),
        }
    }
    Ok(())
}

fn parse_joint(node: Node<'_, '_>) -> Result<Joint> {
    let name = node
        .attribute("name")
        .ok_or_else(|| Error::Validation("joint without name".into()))?
        .to_string();
    let kind = JointKind::parse(
        node.attribute("type")
            .ok_or_else(|| Error::Validation(format!("joint '{name}' has no type")))?,
    )?;
    let mut parent = None;
    let mut child = None;
    let mut origin = RigidTransform::identity();
    let mut axis = None;
    let mut limits = None;
    for el in elements(node) {
        match el.tag_name().name() {
            "parent" => parent = el.attribute("link").map(str::to_string),
            "child" => child = el.attribute("link").map(str::to_string),
            "origin" => {
                let xyz = parse_triple(el, "xyz", [0.0; 3])?;
                let rpy = parse_triple(el, "rpy", [0.0; 3])?;
                origin = RigidTransform::new(rotation_from_rpy(rpy[0], rpy[1], rpy[2]), Vec3::from(xyz));
            }
            "axis" => axis = Some(Vec3::from(parse_triple(el, "xyz", [1.0, 0.0, 0.0])?)),
            "limit" => {
                if let (Some(lo), Some(hi)) = (parse_scalar(el, "lower")?, parse_scalar(el, "upper")?) {
                    limits = Some((lo, hi));
                }
            }
            "dynamics" | "safety_controller" => {}
            "mimic" => return Err(unsupported(format!("mimic joint '{name}'"))),
            other => return Err(unsupported(format!("<{other}> in joint '{name}'"))),
        }
    }
    let parent = parent.ok_or_else(|| Error::Validation(format!("joint '{name}' has no parent link")))?;
    let child = child.ok_or_else(|| Error::Validation(format!("joint '{name}' has no child link")))?;
    let axis = match (kind.is_moving(), axis) {
        (true, None) => return Err(Error::Validation(format!("moving joint '{name}' has no axis"))),
        (_, a) => a.unwrap_or_else(Vec3::z),
    };
    Ok(Joint {
        name,
        parent,
        child,
        kind,
        origin,
        axis,
        limits,
    })
}

pub fn parse_chain(text: &str) -> Result<KinematicChain> {
    let doc = Document::parse(text).map_err(|e| Error::Validation(format!("malformed XML: {e}")))?;
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(Error::Validation(format!(
            "root element is <{}>, expected <robot>",
            robot.tag_name().name()
        )));
    }
    let mut links = Vec::new();
    let mut joints = Vec::new();
    for el in elements(robot) {
        match el.tag_name().name() {
            "link" => {
                check_link(el)?;
                let name = el
                    .attribute("name")
                    .ok_or_else(|| Error::Validation("link without name".into()))?;
                links.push(name.to_string());
            }
            "joint" => joints.push(parse_joint(el)?),
            "material" => {}
            "transmission" => return Err(unsupported("transmission elements")),
            other => return Err(unsupported(format!("<{other}> elements"))),
        }
    }
    KinematicChain::new(robot.attribute("name").unwrap_or("robot"), links, joints)
}

fn origin_attrs(t: &RigidTransform) -> String {
    let p = t.translation();
    let (r, pi, y) = t.rotation().euler_angles();
    format!("xyz=\"{} {} {}\" rpy=\"{r} {pi} {y}\"", p.x, p.y, p.z)
}

pub fn write_chain(chain: &KinematicChain) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "<?xml version=\"1.0\"?>\n<robot name=\"{}\">", chain.name());
    for link in chain.links() {
        let _ = writeln!(out, "  <link name=\"{link}\"/>");
    }
    for j in chain.joints() {
        let kind = match j.kind {
            JointKind::Fixed => "fixed",
            JointKind::Revolute => "revolute",
            JointKind::Prismatic => "prismatic",
        };
        let _ = writeln!(out, "  <joint name=\"{}\" type=\"{kind}\">", j.name);
        let _ = writeln!(out, "    <parent link=\"{}\"/>\n    <child link=\"{}\"/>", j.parent, j.child);
        let _ = writeln!(out, "    <origin {}/>", origin_attrs(&j.origin));
        if j.kind.is_moving() {
            let _ = writeln!(out, "    <axis xyz=\"{} {} {}\"/>", j.axis.x, j.axis.y, j.axis.z);
        }
        if let Some((lo, hi)) = j.limits {
            let _ = writeln!(out, "    <limit lower=\"{lo}\" upper=\"{hi}\"/>");
        }
        out.push_str("  </joint>\n");
    }
    out.push_str("</robot>\n");
    out
}
