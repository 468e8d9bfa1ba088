// SPDX-License-Identifier: Apache-2.0

//! `.design` and `.slice` files.
//!
//! ```text
//! format_version 1
//! design <name>
//! chip <width_um> <length_um>
//! vdd <volts>
//! window <cycles> <steps_per_cycle>
//! instances <count>
//! <id> <x_um> <y_um> <p_internal_W> <p_switching_W> <p_leakage_W>   (count lines)
//! vias <count>
//! <x_um> <y_um>                                                      (count lines)
//! ```
//!
//! A `.slice` file holds one or more blocks:
//!
//! ```text
//! format_version 1
//! slice <id> <count>
//! <instance_id> <step>                                               (count lines)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{file_label, read_to_string, write_string, Records, FORMAT_VERSION};
use crate::design::{DesignBundle, InstanceRecord, SliceTrace, ViaStack, Window};
use crate::error::{Error, Result};

pub fn parse_design(path: impl AsRef<Path>) -> Result<DesignBundle> {
    let path = path.as_ref();
    parse_design_str(&file_label(path), &read_to_string(path)?)
}

pub fn parse_design_str(file: &str, text: &str) -> Result<DesignBundle> {
    let mut rec = Records::new(file, text);
    rec.expect_version()?;
    let mut name = None;
    let mut chip = None;
    let mut vdd = None;
    let mut window = None;
    let mut instances: Option<Vec<InstanceRecord>> = None;
    let mut vias: Option<Vec<ViaStack>> = None;

    while let Some(r) = rec.next() {
        let line = r.line;
        match r.fields.as_slice() {
            ["design", n] => name = Some(n.to_string()),
            ["chip", w, l] => {
                chip = Some((
                    rec.parse_f64(line, "chip width", w)?,
                    rec.parse_f64(line, "chip length", l)?,
                ))
            }
            ["vdd", v] => vdd = Some(rec.parse_f64(line, "vdd", v)?),
            ["window", c, s] => {
                window = Some(Window::new(
                    rec.parse(line, "cycles", c)?,
                    rec.parse(line, "steps per cycle", s)?,
                ))
            }
            ["instances", n] => {
                let n: usize = rec.parse(line, "instance count", n)?;
                let mut list = Vec::with_capacity(n);
                for _ in 0..n {
                    let r = rec
                        .next()
                        .ok_or_else(|| rec.error(line, "unexpected end of instance section"))?;
                    let f = &r.fields;
                    if f.len() != 6 {
                        return Err(rec.error(r.line, format!("instance record needs 6 fields, found {}", f.len())));
                    }
                    list.push(InstanceRecord {
                        id: f[0].to_string(),
                        x: rec.parse_f64(r.line, "x", f[1])?,
                        y: rec.parse_f64(r.line, "y", f[2])?,
                        p_internal: rec.parse_f64(r.line, "internal power", f[3])?,
                        p_switching: rec.parse_f64(r.line, "switching power", f[4])?,
                        p_leakage: rec.parse_f64(r.line, "leakage power", f[5])?,
                    });
                }
                instances = Some(list);
            }
            ["vias", n] => {
                let n: usize = rec.parse(line, "via count", n)?;
                let mut list = Vec::with_capacity(n);
                for _ in 0..n {
                    let r = rec
                        .next()
                        .ok_or_else(|| rec.error(line, "unexpected end of via section"))?;
                    match r.fields.as_slice() {
                        [x, y] => list.push(ViaStack {
                            x: rec.parse_f64(r.line, "via x", x)?,
                            y: rec.parse_f64(r.line, "via y", y)?,
                        }),
                        _ => return Err(rec.error(r.line, "via record needs 2 fields")),
                    }
                }
                vias = Some(list);
            }
            other => return Err(rec.error(line, format!("unexpected record {:?}", other.join(" ")))),
        }
    }

    let missing = |what: &str| rec.error(0, format!("missing `{what}` header"));
    let (width, length) = chip.ok_or_else(|| missing("chip"))?;
    let vdd = vdd.ok_or_else(|| missing("vdd"))?;
    let window = window.unwrap_or_default();
    let instances = instances.ok_or_else(|| missing("instances"))?;
    let vias = vias.unwrap_or_default();
    DesignBundle::new(
        name.unwrap_or_else(|| "design".into()),
        width,
        length,
        vdd,
        window,
        instances,
        vias,
    )
}

/// Parses a `.slice` file that must contain exactly one slice.
pub fn parse_slice_trace(path: impl AsRef<Path>, design: &DesignBundle) -> Result<SliceTrace> {
    let path = path.as_ref();
    let label = file_label(path);
    let mut slices = parse_slices_str(&label, &read_to_string(path)?, design)?;
    if slices.len() != 1 {
        return Err(Error::parse(
            &label,
            0,
            format!("expected one slice, found {}", slices.len()),
        ));
    }
    Ok(slices.pop().unwrap())
}

/// Parses a multi-slice `.slice` file (a whole vector).
pub fn parse_vector(path: impl AsRef<Path>, design: &DesignBundle) -> Result<Vec<SliceTrace>> {
    let path = path.as_ref();
    parse_slices_str(&file_label(path), &read_to_string(path)?, design)
}

pub fn parse_slices_str(file: &str, text: &str, design: &DesignBundle) -> Result<Vec<SliceTrace>> {
    let ids = design.index_map();
    let steps = design.window.steps();
    let mut rec = Records::new(file, text);
    rec.expect_version()?;
    let mut out = Vec::new();
    while let Some(r) = rec.next() {
        let line = r.line;
        let (id, count) = match r.fields.as_slice() {
            ["slice", id, n] => (
                rec.parse::<usize>(line, "slice id", id)?,
                rec.parse::<usize>(line, "toggle count", n)?,
            ),
            _ => return Err(rec.error(line, "expected `slice <id> <count>`")),
        };
        let mut pairs = Vec::with_capacity(count);
        for _ in 0..count {
            let r = rec
                .next()
                .ok_or_else(|| rec.error(line, "unexpected end of slice block"))?;
            let (inst, step) = match r.fields.as_slice() {
                [inst, step] => (*inst, rec.parse::<u32>(r.line, "step", step)?),
                _ => return Err(rec.error(r.line, "toggle record needs 2 fields")),
            };
            let idx = *ids
                .get(inst)
                .ok_or_else(|| rec.error(r.line, format!("unknown instance {inst:?}")))?;
            if step as usize >= steps {
                return Err(rec.error(r.line, format!("step {step} not below n·t = {steps}")));
            }
            pairs.push((idx, step));
        }
        out.push(SliceTrace::new(id, pairs));
    }
    Ok(out)
}

/// Reads a design and its vector into one bundle.
pub fn read_bundle(design: impl AsRef<Path>, slices: impl AsRef<Path>) -> Result<DesignBundle> {
    let bundle = parse_design(design)?;
    let traces = parse_vector(slices, &bundle)?;
    bundle.with_slices(traces)
}

pub fn write_design_string(design: &DesignBundle) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "format_version {FORMAT_VERSION}");
    let _ = writeln!(s, "design {}", design.name);
    let _ = writeln!(s, "chip {} {}", design.width, design.length);
    let _ = writeln!(s, "vdd {}", design.vdd);
    let _ = writeln!(s, "window {} {}", design.window.cycles, design.window.steps_per_cycle);
    let _ = writeln!(s, "instances {}", design.instances().len());
    for i in design.instances() {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {}",
            i.id, i.x, i.y, i.p_internal, i.p_switching, i.p_leakage
        );
    }
    let _ = writeln!(s, "vias {}", design.vias().len());
    for v in design.vias() {
        let _ = writeln!(s, "{} {}", v.x, v.y);
    }
    s
}

pub fn write_design(design: &DesignBundle, path: impl AsRef<Path>) -> Result<()> {
    write_string(path.as_ref(), &write_design_string(design))
}

pub fn write_slices_string(design: &DesignBundle, slices: &[SliceTrace]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "format_version {FORMAT_VERSION}");
    for t in slices {
        let _ = writeln!(s, "slice {} {}", t.slice_id, t.toggle_count());
        for &(i, step) in t.entries() {
            let _ = writeln!(s, "{} {}", design.instances()[i as usize].id, step);
        }
    }
    s
}

pub fn write_slices(design: &DesignBundle, slices: &[SliceTrace], path: impl AsRef<Path>) -> Result<()> {
    write_string(path.as_ref(), &write_slices_string(design, slices))
}
