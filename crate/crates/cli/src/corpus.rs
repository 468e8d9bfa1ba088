// SPDX-License-Identifier: Apache-2.0

//! Corpus directory layout:
//!
//! ```text
//! <corpus>/<name>.design
//! <corpus>/<name>.slice
//! <corpus>/labels/<name>/slice_<id>.csv
//! ```

use std::path::{Path, PathBuf};

use irdrop::io::{read_bundle, read_ir_csv};
use irdrop::DesignBundle;

use crate::CliError;

pub fn load(dir: &Path) -> Result<Vec<DesignBundle>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::new(format!("{}: {e}", dir.display())))?;
    let mut stems: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "design"))
        .collect();
    stems.sort();
    if stems.is_empty() {
        return Err(CliError::new(format!("{}: no .design files", dir.display())));
    }
    stems
        .iter()
        .map(|p| Ok(read_bundle(p, p.with_extension("slice"))?))
        .collect()
}

pub fn select(designs: Vec<DesignBundle>, name: Option<&String>) -> Result<Vec<DesignBundle>, CliError> {
    let Some(name) = name else { return Ok(designs) };
    let picked: Vec<DesignBundle> = designs.into_iter().filter(|d| &d.name == name).collect();
    if picked.is_empty() {
        return Err(CliError::new(format!("no design named {name:?} in the corpus")));
    }
    Ok(picked)
}

pub fn one(dir: &Path, name: &str) -> Result<DesignBundle, CliError> {
    Ok(select(load(dir)?, Some(&name.to_owned()))?.remove(0))
}

pub fn label_dir(corpus: &Path) -> PathBuf {
    corpus.join("labels")
}

/// `<root>/<design>/slice_<id>.csv`.
pub fn slice_file(root: &Path, design: &str, slice: usize) -> PathBuf {
    root.join(design).join(format!("slice_{slice}.csv"))
}

/// Per-slice values under `root` for every slice of `design`.
pub fn read_per_slice(root: &Path, design: &DesignBundle) -> Result<Vec<Vec<f64>>, CliError> {
    design
        .slices()
        .iter()
        .map(|s| Ok(read_ir_csv(design, slice_file(root, &design.name, s.slice_id))?))
        .collect()
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::new(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    std::fs::write(path, text).map_err(|e| CliError::new(format!("{}: {e}", path.display())))
}
