//! Flat text encoder files: a `key value` header, then one parameter per line.
//!
//! ```text
//! embodi-encoder 1
//! image 32
//! patch 8
//! hidden 32
//! feature 32
//! seed 42
//! provenance stage1-student
//! params 12640
//! 0.0123...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use embodi_core::toy::{EncoderDims, ToyEncoder};

use crate::error::{read_string, write_file, Error, Result};

const MAGIC: &str = "embodi-encoder 1";

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderFile {
    pub encoder: ToyEncoder,
    pub seed: u64,
    /// Where the parameters came from, e.g. `init` or `stage2-student`.
    pub provenance: String,
}

pub fn to_text(f: &EncoderFile) -> String {
    let d = f.encoder.dims();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "image {}\npatch {}\nhidden {}\nfeature {}", d.image, d.patch, d.hidden, d.feature);
    let _ = writeln!(out, "seed {}\nprovenance {}", f.seed, f.provenance);
    let _ = writeln!(out, "params {}", f.encoder.params().len());
    for p in f.encoder.params() {
        let _ = writeln!(out, "{p}");
    }
    out
}

pub fn parse(text: &str) -> std::result::Result<EncoderFile, String> {
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(format!("missing '{MAGIC}' header"));
    }
    let mut field = |key: &str| -> std::result::Result<String, String> {
        let line = lines.next().ok_or_else(|| format!("missing '{key}' line"))?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| format!("expected '{key} <value>', found '{line}'"))
    };
    let num = |v: String, key: &str| v.parse::<usize>().map_err(|_| format!("{key}: '{v}' is not a count"));
    let dims = EncoderDims {
        image: num(field("image")?, "image")?,
        patch: num(field("patch")?, "patch")?,
        hidden: num(field("hidden")?, "hidden")?,
        feature: num(field("feature")?, "feature")?,
    };
    let seed_text = field("seed")?;
    let seed = seed_text.parse().map_err(|_| format!("seed: '{seed_text}' is not an integer"))?;
    let provenance = field("provenance")?;
    let n = num(field("params")?, "params")?;
    let params = lines
        .by_ref()
        .take(n)
        .enumerate()
        .map(|(i, l)| l.trim().parse::<f64>().map_err(|_| format!("parameter {i}: '{l}' is not a number")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if params.len() != n {
        return Err(format!("expected {n} parameters, found {}", params.len()));
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err("trailing data after parameters".into());
    }
    let encoder = ToyEncoder::from_params(dims, params).map_err(|e| e.to_string())?;
    Ok(EncoderFile {
        encoder,
        seed,
        provenance,
    })
}

pub fn save(path: &Path, f: &EncoderFile) -> Result<()> {
    write_file(path, to_text(f))
}

pub fn load(path: &Path) -> Result<EncoderFile> {
    parse(&read_string(path)?).map_err(|m| Error::format(path, m))
}
