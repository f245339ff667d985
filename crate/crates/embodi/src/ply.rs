//! ASCII PLY point clouds: `x y z` plus optional 8-bit `red green blue`.
//!
//! Coordinates are written in shortest round-trip decimal form, so a
//! write/read cycle reproduces every coordinate bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use embodi_core::geometry::{PointCloud, Rgb, Vec3};

use crate::error::{read_string, write_file, Error, Result};

fn color_byte(c: f64) -> u8 {
    (c * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn to_ply_string(cloud: &PointCloud) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.colors().is_some() {
        out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    out.push_str("end_header\n");
    for (i, p) in cloud.points().iter().enumerate() {
        let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
        if let Some(colors) = cloud.colors() {
            let c = colors[i];
            let _ = write!(out, " {} {} {}", color_byte(c[0]), color_byte(c[1]), color_byte(c[2]));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    Float,
    Int,
}

fn scalar_type(name: &str) -> Option<Scalar> {
    match name {
        "float" | "float32" | "double" | "float64" => Some(Scalar::Float),
        "char" | "uchar" | "short" | "ushort" | "int" | "uint" | "int8" | "uint8" | "int16"
        | "uint16" | "int32" | "uint32" => Some(Scalar::Int),
        _ => None,
    }
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<(String, Scalar)>,
}

/// Parses an ASCII PLY document. Elements other than `vertex` are skipped;
/// vertex properties other than position and color are ignored.
pub fn parse_ply(text: &str) -> std::result::Result<PointCloud, String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err("missing 'ply' magic".into());
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut ascii = false;
    loop {
        let line = lines.next().ok_or("header not terminated by end_header")?.trim();
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => {
                let fmt = words.next().unwrap_or("");
                if fmt != "ascii" {
                    return Err(format!("unsupported PLY format '{fmt}' (only ascii)"));
                }
                ascii = true;
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = words.next().ok_or("element without name")?.to_string();
                let count = words
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| format!("element '{name}' has no valid count"))?;
                elements.push(Element {
                    name,
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or("property before any element")?;
                let ty = words.next().ok_or("property without type")?;
                if ty == "list" {
                    if el.name == "vertex" {
                        return Err("list properties on vertices are not supported".into());
                    }
                    el.properties.push(("list".into(), Scalar::Int));
                    continue;
                }
                let scalar = scalar_type(ty).ok_or_else(|| format!("unknown property type '{ty}'"))?;
                let name = words.next().ok_or("property without name")?;
                el.properties.push((name.to_string(), scalar));
            }
            Some("end_header") => break,
            Some(other) => return Err(format!("unexpected header keyword '{other}'")),
        }
    }
    if !ascii {
        return Err("missing format line".into());
    }

    let mut points = Vec::new();
    let mut colors: Vec<Rgb> = Vec::new();
    let mut has_color = false;
    for el in &elements {
        if el.name != "vertex" {
            for _ in 0..el.count {
                lines.next().ok_or_else(|| format!("truncated '{}' element", el.name))?;
            }
            continue;
        }
        let find = |n: &str| el.properties.iter().position(|(p, _)| p == n);
        let (x, y, z) = match (find("x"), find("y"), find("z")) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => return Err("vertex element lacks x/y/z".into()),
        };
        let rgb = match (find("red"), find("green"), find("blue")) {
            (Some(r), Some(g), Some(b)) => Some([r, g, b]),
            (None, None, None) => None,
            _ => return Err("partial color properties".into()),
        };
        has_color = rgb.is_some();
        for i in 0..el.count {
            let line = lines.next().ok_or_else(|| format!("expected {} vertices, got {i}", el.count))?;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|w| w.parse::<f64>().map_err(|_| format!("vertex {i}: bad number '{w}'")))
                .collect::<std::result::Result<_, _>>()?;
            if values.len() < el.properties.len() {
                return Err(format!("vertex {i}: {} values for {} properties", values.len(), el.properties.len()));
            }
            points.push(Vec3::new(values[x], values[y], values[z]));
            if let Some(idx) = rgb {
                let mut c = [0.0; 3];
                for (k, &j) in idx.iter().enumerate() {
                    let v = values[j];
                    if !(0.0..=255.0).contains(&v) {
                        return Err(format!("vertex {i}: color {v} outside 0..255"));
                    }
                    c[k] = v / 255.0;
                }
                colors.push(c);
            }
        }
    }
    let cloud = if has_color {
        PointCloud::with_colors(points, colors)
    } else {
        PointCloud::new(points)
    };
    cloud.map_err(|e| e.to_string())
}

pub fn save_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    write_file(path, to_ply_string(cloud))
}

pub fn load_ply(path: &Path) -> Result<PointCloud> {
    parse_ply(&read_string(path)?).map_err(|m| Error::format(path, m))
}
