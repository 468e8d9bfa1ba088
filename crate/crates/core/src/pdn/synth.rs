// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic designs and switching vectors.
//!
//! Placement mixes a uniform background with a few dense clusters. Via stacks
//! sit on a jittered lattice. Switching activity is a uniform background plus
//! spatio-temporal bursts: a disc of instances toggling together over a short
//! window, which is the sparse, clustered pattern real workloads show.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::design::{DesignBundle, InstanceRecord, SliceTrace, ViaStack, Window};
use crate::error::{Error, Result};

/// Knobs of the synthetic generator. Powers are `(min, max)` in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub name: String,
    pub width: f64,
    pub length: f64,
    pub instances: usize,
    pub vias: usize,
    pub vdd: f64,
    pub window: Window,
    pub internal_power: (f64, f64),
    pub switching_power: (f64, f64),
    pub leakage_power: (f64, f64),
    /// Expected fraction of `(instance, step)` pairs that toggle.
    pub toggle_rate: f64,
    /// Share of toggles that come from bursts, `[0, 1]`. Zero gives i.i.d. toggles.
    pub clustering: f64,
    /// Per-slice activity multiplier is drawn from `[1 − spread, 1 + spread]`.
    pub activity_spread: f64,
    /// Dense placement clusters.
    pub placement_clusters: usize,
    pub slices: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            name: "synth".into(),
            width: 60.0,
            length: 60.0,
            instances: 2000,
            vias: 25,
            vdd: 0.7,
            window: Window::default(),
            internal_power: (1.0e-6, 4.0e-6),
            switching_power: (0.5e-6, 3.0e-6),
            leakage_power: (0.01e-6, 0.08e-6),
            toggle_rate: 0.05,
            clustering: 0.7,
            activity_spread: 0.5,
            placement_clusters: 3,
            slices: 3,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let tile = crate::TILE_SIZE;
        let multiple = |v: f64| v > 0.0 && ((v / tile).round() * tile - v).abs() < 1e-9;
        if !multiple(self.width) || !multiple(self.length) {
            return Err(Error::Design(format!(
                "chip {} x {} is not a multiple of the {tile} µm tile",
                self.width, self.length
            )));
        }
        if self.instances == 0 {
            return Err(Error::Design("no instances".into()));
        }
        let nodes = ((self.width / tile).round() * (self.length / tile).round()) as usize;
        if self.vias > nodes {
            return Err(Error::Design(format!(
                "{} via stacks exceed {nodes} grid nodes",
                self.vias
            )));
        }
        if !(0.0..=1.0).contains(&self.toggle_rate) || !(0.0..=1.0).contains(&self.clustering) {
            return Err(Error::Design("toggle rate and clustering must lie in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.activity_spread) {
            return Err(Error::Design("activity spread must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Deterministic for a fixed `(seed, spec)`.
pub fn generate_design(seed: u64, spec: &SynthSpec) -> Result<DesignBundle> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, l) = (spec.width, spec.length);

    let centres: Vec<(f64, f64, f64)> = (0..spec.placement_clusters)
        .map(|_| {
            (
                rng.gen_range(0.15 * w..0.85 * w),
                rng.gen_range(0.15 * l..0.85 * l),
                rng.gen_range(3.0..7.0),
            )
        })
        .collect();
    let digits = spec.instances.to_string().len().max(5);
    let instances: Vec<InstanceRecord> = (0..spec.instances)
        .map(|k| {
            let (x, y) = loop {
                let (x, y) = if !centres.is_empty() && rng.gen_bool(0.4) {
                    let (cx, cy, s) = centres[rng.gen_range(0..centres.len())];
                    (cx + s * gaussian(&mut rng), cy + s * gaussian(&mut rng))
                } else {
                    (rng.gen_range(0.0..w), rng.gen_range(0.0..l))
                };
                if (0.0..w).contains(&x) && (0.0..l).contains(&y) {
                    break (x, y);
                }
            };
            let drive = rng.gen_range(0.5..2.0);
            InstanceRecord {
                id: format!("g{k:0digits$}"),
                x,
                y,
                p_internal: drive * uniform(&mut rng, spec.internal_power),
                p_switching: drive * uniform(&mut rng, spec.switching_power),
                p_leakage: drive * uniform(&mut rng, spec.leakage_power),
            }
        })
        .collect();

    let vias = place_vias(&mut rng, spec);
    let design = DesignBundle::new(spec.name.clone(), w, l, spec.vdd, spec.window, instances, vias)?;
    let slices = (0..spec.slices)
        .map(|id| generate_slice(&mut rng, &design, spec, id))
        .collect();
    design.with_slices(slices)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn place_vias(rng: &mut ChaCha8Rng, spec: &SynthSpec) -> Vec<ViaStack> {
    if spec.vias == 0 {
        return Vec::new();
    }
    let per_side = (spec.vias as f64).sqrt().ceil() as usize;
    let (sx, sy) = (spec.width / per_side as f64, spec.length / per_side as f64);
    let mut sites: Vec<ViaStack> = (0..per_side * per_side)
        .map(|k| {
            let (a, b) = ((k % per_side) as f64, (k / per_side) as f64);
            ViaStack {
                x: ((a + 0.5) * sx + rng.gen_range(-0.3..0.3) * sx).clamp(0.0, spec.width),
                y: ((b + 0.5) * sy + rng.gen_range(-0.3..0.3) * sy).clamp(0.0, spec.length),
            }
        })
        .collect();
    sites.shuffle(rng);
    sites.truncate(spec.vias);
    sites
}

fn generate_slice(rng: &mut ChaCha8Rng, design: &DesignBundle, spec: &SynthSpec, id: usize) -> SliceTrace {
    let n = design.instances().len();
    let steps = design.window.steps();
    let activity = if spec.activity_spread > 0.0 {
        rng.gen_range(1.0 - spec.activity_spread..1.0 + spec.activity_spread)
    } else {
        1.0
    };
    let rate = (spec.toggle_rate * activity).min(1.0);
    let mut pairs = Vec::new();

    // Background: i.i.d. Bernoulli over the flattened (instance, step) space,
    // sampled by geometric gaps.
    let p_bg = (1.0 - spec.clustering) * rate;
    let total = n * steps;
    if p_bg >= 1.0 {
        pairs.extend((0..total).map(|k| ((k / steps) as u32, (k % steps) as u32)));
    } else if p_bg > 0.0 {
        let log_q = (1.0 - p_bg).ln();
        let mut k = 0usize;
        loop {
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            k += (u.ln() / log_q).floor() as usize;
            if k >= total {
                break;
            }
            pairs.push(((k / steps) as u32, (k % steps) as u32));
            k += 1;
        }
    }

    // Bursts until their expected toggle count covers the clustered share.
    let target = spec.clustering * rate * total as f64;
    let mut expected = 0.0;
    let burst_p = 0.6;
    let mut guard = 0;
    while expected < target && guard < 10_000 {
        guard += 1;
        let cx = rng.gen_range(0.0..spec.width);
        let cy = rng.gen_range(0.0..spec.length);
        let radius: f64 = rng.gen_range(3.0..7.0);
        let len = rng.gen_range((steps / 20).max(1)..=(steps / 5).max(1));
        let start = rng.gen_range(0..steps.saturating_sub(len).max(1));
        let members: Vec<usize> = design
            .instances()
            .iter()
            .enumerate()
            .filter(|(_, i)| (i.x - cx).hypot(i.y - cy) <= radius)
            .map(|(k, _)| k)
            .collect();
        expected += (members.len() * len) as f64 * burst_p;
        for &m in &members {
            for s in start..(start + len).min(steps) {
                if rng.gen_bool(burst_p) {
                    pairs.push((m as u32, s as u32));
                }
            }
        }
    }
    SliceTrace::new(id, pairs)
}
