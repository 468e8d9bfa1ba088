// SPDX-License-Identifier: Apache-2.0

//! On-disk feature-volume cache: one directory per key holding `manifest.txt`
//! and one CSV per channel (`ch000.csv` …), each `ny` rows of `nx` values.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{read_to_string, write_design_string, write_slices_string, write_string};
use crate::design::{DesignBundle, SliceTrace};
use crate::error::{Error, Result};
use crate::features::{FeatureVolume, NormConstants, SPATIAL_CHANNELS};

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// SHA-256 of the design file text.
pub fn design_hash(design: &DesignBundle) -> String {
    hex(&Sha256::digest(write_design_string(design).as_bytes()))
}

/// Key over `(design hash, slice contents, n, t, constants hash)`.
pub fn cache_key(design: &DesignBundle, slice: &SliceTrace, constants: &NormConstants) -> String {
    let mut h = Sha256::new();
    h.update(design_hash(design).as_bytes());
    h.update(write_slices_string(design, std::slice::from_ref(slice)).as_bytes());
    h.update(format!("n {} t {}", design.window.cycles, design.window.steps_per_cycle).as_bytes());
    h.update(hex(&Sha256::digest(constants.to_fields().as_bytes())).as_bytes());
    hex(&h.finalize())
}

fn entry(dir: &Path, key: &str) -> PathBuf {
    dir.join(key)
}

pub fn write_cached_volume(dir: &Path, key: &str, volume: &FeatureVolume) -> Result<()> {
    let root = entry(dir, key);
    std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    for c in 0..volume.channels() {
        let mut s = String::new();
        for row in volume.channel(c).chunks(volume.nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        write_string(&root.join(format!("ch{c:03}.csv")), &s)?;
    }
    // Manifest last: its presence marks a complete entry.
    let manifest = format!(
        "key={key}\nnx={}\nny={}\nsteps={}\nspatial={SPATIAL_CHANNELS}\n",
        volume.nx, volume.ny, volume.steps
    );
    write_string(&root.join("manifest.txt"), &manifest)
}

/// `Ok(None)` when the entry does not exist.
pub fn read_cached_volume(dir: &Path, key: &str) -> Result<Option<FeatureVolume>> {
    let root = entry(dir, key);
    let manifest_path = root.join("manifest.txt");
    if !manifest_path.exists() {
        return Ok(None);
    }
    let manifest = read_to_string(&manifest_path)?;
    let field = |name: &str| -> Result<usize> {
        manifest
            .lines()
            .find_map(|l| l.strip_prefix(name).and_then(|r| r.strip_prefix('=')))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Features(format!("{}: missing {name}", manifest_path.display())))
    };
    let (nx, ny, steps) = (field("nx")?, field("ny")?, field("steps")?);
    let mut volume = FeatureVolume::zeros(nx, ny, steps);
    let plane = nx * ny;
    for c in 0..steps + SPATIAL_CHANNELS {
        let path = root.join(format!("ch{c:03}.csv"));
        let text = read_to_string(&path)?;
        let values: Vec<f64> = text
            .lines()
            .flat_map(|l| l.split(','))
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Features(format!("{}: {e}", path.display())))?;
        if values.len() != plane {
            return Err(Error::Features(format!(
                "{}: expected {plane} values, got {}",
                path.display(),
                values.len()
            )));
        }
        let dst = if c < steps {
            &mut volume.temporal[c * plane..(c + 1) * plane]
        } else {
            let c = c - steps;
            &mut volume.spatial[c * plane..(c + 1) * plane]
        };
        dst.copy_from_slice(&values);
    }
    Ok(Some(volume))
}
