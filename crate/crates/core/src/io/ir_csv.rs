// SPDX-License-Identifier: Apache-2.0

//! Per-instance IR values: `instance_id,ir_volts`.

use std::fmt::Write as _;
use std::path::Path;

use super::{file_label, read_to_string, write_string};
use crate::design::DesignBundle;
use crate::error::{Error, Result};

pub fn write_ir_csv(design: &DesignBundle, ir: &[f64], path: impl AsRef<Path>) -> Result<()> {
    if ir.len() != design.instances().len() {
        return Err(Error::Design(format!(
            "{} IR values for {} instances",
            ir.len(),
            design.instances().len()
        )));
    }
    let mut s = String::from("instance_id,ir_volts\n");
    for (inst, v) in design.instances().iter().zip(ir) {
        let _ = writeln!(s, "{},{}", inst.id, v);
    }
    write_string(path.as_ref(), &s)
}

/// Reads a CSV and returns values in the design's canonical instance order.
/// Every instance must appear exactly once.
pub fn read_ir_csv(design: &DesignBundle, path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let label = file_label(path);
    let text = read_to_string(path)?;
    let n = design.instances().len();
    let mut out = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (idx == 0 && line.starts_with("instance_id")) {
            continue;
        }
        let (id, v) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(&label, idx + 1, "expected `instance_id,ir_volts`"))?;
        let i = design
            .instance_index(id.trim())
            .ok_or_else(|| Error::parse(&label, idx + 1, format!("unknown instance {id:?}")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::parse(&label, idx + 1, format!("bad IR value {v:?}")))?;
        if seen[i] {
            return Err(Error::parse(&label, idx + 1, format!("duplicate instance {id:?}")));
        }
        seen[i] = true;
        out[i] = v;
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::parse(
            &label,
            0,
            format!("missing instance {:?}", design.instances()[i].id),
        ));
    }
    Ok(out)
}
