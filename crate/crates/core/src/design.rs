// SPDX-License-Identifier: Apache-2.0

//! In-memory design model.
//!
//! Units are fixed: coordinates in µm, powers in watts, voltages in volts.
//! A [`DesignBundle`] is always canonical: instances sorted by id, via stacks
//! sorted by position, slices sorted by id. Two bundles built from the same
//! records in any order compare equal.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// One placed logic gate and its power report.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecord {
    pub id: String,
    pub x: f64,
    pub y: f64,
    /// Internal power, W.
    pub p_internal: f64,
    /// Switching power, W.
    pub p_switching: f64,
    /// Leakage power, W.
    pub p_leakage: f64,
}

impl InstanceRecord {
    pub fn new(id: impl Into<String>, x: f64, y: f64, p_internal: f64, p_switching: f64, p_leakage: f64) -> Self {
        Self {
            id: id.into(),
            x,
            y,
            p_internal,
            p_switching,
            p_leakage,
        }
    }

    /// `p_i + p_s + p_l`.
    pub fn total_power(&self) -> f64 {
        self.p_leakage + self.p_switching + self.p_internal
    }

    /// `p_i + p_s`, the power drawn on top of leakage while toggling.
    pub fn dynamic_power(&self) -> f64 {
        self.p_internal + self.p_switching
    }
}

/// A via stack dropping the supply from the upper metal stripes to the cell rail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViaStack {
    pub x: f64,
    pub y: f64,
}

/// Time basis of a slice: `cycles` clock cycles split into `steps_per_cycle` steps each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Window {
    pub cycles: usize,
    pub steps_per_cycle: usize,
}

impl Window {
    pub const fn new(cycles: usize, steps_per_cycle: usize) -> Self {
        Self {
            cycles,
            steps_per_cycle,
        }
    }

    /// Number of time steps `n·t`.
    pub const fn steps(&self) -> usize {
        self.cycles * self.steps_per_cycle
    }
}

impl Default for Window {
    fn default() -> Self {
        Self::new(20, 5)
    }
}

/// Toggle events of one slice.
///
/// Stored as `(instance index, step)` pairs sorted lexicographically, so a quiet
/// instance costs nothing. Instance indices refer to the owning bundle's
/// canonical instance order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SliceTrace {
    pub slice_id: usize,
    entries: Vec<(u32, u32)>,
}

impl SliceTrace {
    /// Builds a trace from unordered pairs; duplicates collapse.
    pub fn new(slice_id: usize, mut entries: Vec<(u32, u32)>) -> Self {
        entries.sort_unstable();
        entries.dedup();
        Self { slice_id, entries }
    }

    pub fn quiet(slice_id: usize) -> Self {
        Self {
            slice_id,
            entries: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn is_quiet(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn toggle_count(&self) -> usize {
        self.entries.len()
    }

    /// Steps at which instance `index` toggles, ascending.
    pub fn toggles_of(&self, index: usize) -> impl Iterator<Item = u32> + '_ {
        let index = index as u32;
        let start = self.entries.partition_point(|&(i, _)| i < index);
        self.entries[start..]
            .iter()
            .take_while(move |&&(i, _)| i == index)
            .map(|&(_, s)| s)
    }

    /// `(instance index, toggle count)` for every instance that toggles at least once.
    pub fn counts(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut pos = 0;
        std::iter::from_fn(move || {
            let &(inst, _) = self.entries.get(pos)?;
            let len = self.entries[pos..].iter().take_while(|&&(i, _)| i == inst).count();
            pos += len;
            Some((inst as usize, len))
        })
    }

    fn validate(&self, n_instances: usize, steps: usize) -> Result<()> {
        if let Some(&(i, s)) = self
            .entries
            .iter()
            .find(|&&(i, s)| i as usize >= n_instances || s as usize >= steps)
        {
            if i as usize >= n_instances {
                return Err(Error::Trace(format!(
                    "slice {}: instance index {i} out of range ({n_instances} instances)",
                    self.slice_id
                )));
            }
            return Err(Error::Trace(format!(
                "slice {}: step {s} not below n·t = {steps}",
                self.slice_id
            )));
        }
        Ok(())
    }
}

/// Everything the flow needs about one design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignBundle {
    pub name: String,
    /// Chip width `W_c`, µm.
    pub width: f64,
    /// Chip length `L_c`, µm.
    pub length: f64,
    /// Supply voltage, V.
    pub vdd: f64,
    pub window: Window,
    instances: Vec<InstanceRecord>,
    vias: Vec<ViaStack>,
    slices: Vec<SliceTrace>,
}

impl DesignBundle {
    /// Validates and canonicalises a design without slices.
    pub fn new(
        name: impl Into<String>,
        width: f64,
        length: f64,
        vdd: f64,
        window: Window,
        mut instances: Vec<InstanceRecord>,
        mut vias: Vec<ViaStack>,
    ) -> Result<Self> {
        if !(width > 0.0 && width.is_finite() && length > 0.0 && length.is_finite()) {
            return Err(Error::Design(format!(
                "chip dimensions must be positive, got {width} x {length}"
            )));
        }
        if !(vdd > 0.0 && vdd.is_finite()) {
            return Err(Error::Design(format!("supply voltage must be positive, got {vdd}")));
        }
        if window.steps() == 0 {
            return Err(Error::Design("window has zero time steps".into()));
        }
        if instances.is_empty() {
            return Err(Error::Design("no instances".into()));
        }
        for inst in &instances {
            check_instance(inst, width, length)?;
        }
        instances.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = instances.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::Design(format!("duplicate instance id {:?}", w[0].id)));
        }
        for v in &vias {
            let inside =
                v.x.is_finite() && v.y.is_finite() && (0.0..=width).contains(&v.x) && (0.0..=length).contains(&v.y);
            if !inside {
                return Err(Error::Design(format!(
                    "via stack at ({}, {}) outside the chip",
                    v.x, v.y
                )));
            }
        }
        vias.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        Ok(Self {
            name: name.into(),
            width,
            length,
            vdd,
            window,
            instances,
            vias,
            slices: Vec::new(),
        })
    }

    /// Attaches slices; ids must be exactly `0..N` in any order.
    pub fn with_slices(mut self, mut slices: Vec<SliceTrace>) -> Result<Self> {
        slices.sort_by_key(|s| s.slice_id);
        for (expected, s) in slices.iter().enumerate() {
            if s.slice_id != expected {
                return Err(Error::Trace(format!(
                    "slice ids must be contiguous from 0; expected {expected}, found {}",
                    s.slice_id
                )));
            }
            s.validate(self.instances.len(), self.window.steps())?;
        }
        self.slices = slices;
        Ok(self)
    }

    pub fn instances(&self) -> &[InstanceRecord] {
        &self.instances
    }

    pub fn vias(&self) -> &[ViaStack] {
        &self.vias
    }

    pub fn slices(&self) -> &[SliceTrace] {
        &self.slices
    }

    pub fn slice(&self, id: usize) -> Option<&SliceTrace> {
        self.slices.get(id)
    }

    pub fn instance_index(&self, id: &str) -> Option<usize> {
        self.instances.binary_search_by(|r| r.id.as_str().cmp(id)).ok()
    }

    /// Map from instance id to canonical index.
    pub fn index_map(&self) -> HashMap<&str, u32> {
        self.instances
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.as_str(), i as u32))
            .collect()
    }

    /// Checks a trace against this design without attaching it.
    pub fn check_trace(&self, trace: &SliceTrace) -> Result<()> {
        trace.validate(self.instances.len(), self.window.steps())
    }

    /// Same design with every power scaled by `factor`.
    pub fn scaled_powers(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for inst in &mut out.instances {
            inst.p_internal *= factor;
            inst.p_switching *= factor;
            inst.p_leakage *= factor;
        }
        out
    }

    /// Same design reflected about the vertical centre line `x = W_c / 2`.
    pub fn mirrored_x(&self) -> Self {
        let mut out = self.clone();
        for inst in &mut out.instances {
            inst.x = self.width - inst.x;
        }
        for v in &mut out.vias {
            v.x = self.width - v.x;
        }
        out.vias.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        out
    }
}

fn check_instance(inst: &InstanceRecord, width: f64, length: f64) -> Result<()> {
    let id = &inst.id;
    if id.is_empty() || id.chars().any(char::is_whitespace) {
        return Err(Error::Design(format!("invalid instance id {id:?}")));
    }
    if !(inst.x.is_finite()
        && inst.y.is_finite()
        && inst.x >= 0.0
        && inst.y >= 0.0
        && inst.x < width
        && inst.y < length)
    {
        return Err(Error::Design(format!(
            "instance {id} at ({}, {}) out of bounds for a {width} x {length} chip",
            inst.x, inst.y
        )));
    }
    for (name, p) in [
        ("internal", inst.p_internal),
        ("switching", inst.p_switching),
        ("leakage", inst.p_leakage),
    ] {
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::Design(format!(
                "instance {id}: {name} power must be finite and >= 0, got {p}"
            )));
        }
    }
    Ok(())
}
