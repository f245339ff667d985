//! TOML sidecar listing collision primitives per link.
//!
//! ```toml
//! [[primitive]]
//! link = "link2"
//! kind = "capsule"   # sphere: radius; capsule: radius, length; box: size
//! radius = 0.03
//! length = 0.25
//! xyz = [0.125, 0.0, 0.0]
//! rpy = [0.0, 1.5707963267948966, 0.0]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use embodi_core::geometry::{RigidTransform, Vec3};
use embodi_core::kinematics::{rotation_from_rpy, CollisionPrimitive, OccupancyModel, Shape};
use serde::{Deserialize, Serialize};

use crate::error::{read_string, write_file, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrimitiveEntry {
    link: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    size: Option<[f64; 3]>,
    #[serde(default)]
    xyz: [f64; 3],
    #[serde(default)]
    rpy: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OccupancyDoc {
    #[serde(default)]
    primitive: Vec<PrimitiveEntry>,
}

fn shape_of(e: &PrimitiveEntry, i: usize) -> std::result::Result<Shape, String> {
    let need = |v: Option<f64>, what: &str| v.ok_or_else(|| format!("primitive {i} ({}): missing {what}", e.kind));
    let shape = match e.kind.as_str() {
        "sphere" => Shape::Sphere {
            radius: need(e.radius, "radius")?,
        },
        "capsule" => Shape::Capsule {
            radius: need(e.radius, "radius")?,
            length: need(e.length, "length")?,
        },
        "box" => Shape::Box {
            size: e.size.ok_or_else(|| format!("primitive {i} (box): missing size"))?,
        },
        other => return Err(format!("primitive {i}: unknown kind '{other}'")),
    };
    Ok(shape)
}

pub fn parse_occupancy(text: &str) -> std::result::Result<OccupancyModel, String> {
    let doc: OccupancyDoc = toml::from_str(text).map_err(|e| e.to_string())?;
    let mut links: BTreeMap<String, Vec<CollisionPrimitive>> = BTreeMap::new();
    for (i, e) in doc.primitive.iter().enumerate() {
        let local_pose = RigidTransform::new(rotation_from_rpy(e.rpy[0], e.rpy[1], e.rpy[2]), Vec3::from(e.xyz));
        links.entry(e.link.clone()).or_default().push(CollisionPrimitive {
            shape: shape_of(e, i)?,
            local_pose,
        });
    }
    OccupancyModel::new(links).map_err(|e| e.to_string())
}

pub fn write_occupancy(model: &OccupancyModel) -> String {
    let mut doc = OccupancyDoc { primitive: Vec::new() };
    for (link, prims) in model.links() {
        for p in prims {
            let t = p.local_pose.translation();
            let (r, pi, y) = p.local_pose.rotation().euler_angles();
            let mut e = PrimitiveEntry {
                link: link.clone(),
                kind: String::new(),
                radius: None,
                length: None,
                size: None,
                xyz: [t.x, t.y, t.z],
                rpy: [r, pi, y],
            };
            match p.shape {
                Shape::Sphere { radius } => {
                    e.kind = "sphere".into();
                    e.radius = Some(radius);
                }
                Shape::Capsule { radius, length } => {
                    e.kind = "capsule".into();
                    e.radius = Some(radius);
                    e.length = Some(length);
                }
                Shape::Box { size } => {
                    e.kind = "box".into();
                    e.size = Some(size);
                }
            }
            doc.primitive.push(e);
        }
    }
    toml::to_string(&doc).expect("occupancy document serializes")
}

pub fn load_occupancy(path: &Path) -> Result<OccupancyModel> {
    parse_occupancy(&read_string(path)?).map_err(|m| Error::format(path, m))
}

pub fn save_occupancy(path: &Path, model: &OccupancyModel) -> Result<()> {
    write_file(path, write_occupancy(model))
}
