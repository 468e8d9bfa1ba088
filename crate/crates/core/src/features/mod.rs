// SPDX-License-Identifier: Apache-2.0

//! Instance-level and tile-level features.
//!
//! For each slice the featurizer produces, per instance, the effective distance
//! `r` to nearby via stacks, the toggle rate `τ`, the derived powers
//! `p_r = p_l + τ(p_s + p_i)`, `p_tot` and `p_ol`, and the per-step power series
//! `p_t`. These are binned into 2.5 µm tiles: `n·t` temporal maps plus seven
//! spatial maps (`P_i, P_l, P_s, P_r, P_ol, P_tot, R`), then scaled into `[0, 1]`.

mod distance;
mod normalize;
mod power;
mod tiles;

pub use distance::effective_distance;
pub use normalize::{
    instance_feature_vector, normalize, NormConstants, INSTANCE_FEATURES, INSTANCE_POWERS, SPATIAL_POWERS,
};
pub use power::{overlap_power, temporal_power, toggle_rate_scaled_power};
pub use tiles::{build_tile_maps, FeatureVolume, LocationMatrix, TileGrid, SPATIAL_CHANNELS};

use crate::design::{DesignBundle, SliceTrace};
use crate::error::{Error, Result};

/// Geometry parameters of the featurizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    /// Tile edge, µm.
    pub tile_size: f64,
    /// Via stacks farther than this are ignored, µm. Also the value of `r` when none is near.
    pub neighborhood: f64,
    /// Lower clamp on instance-to-via distance, µm.
    pub d_min: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            tile_size: crate::TILE_SIZE,
            neighborhood: 5.0,
            d_min: 0.05,
        }
    }
}

impl FeatureConfig {
    /// `R_MAX`, the effective distance of an instance with no via stack in reach.
    pub fn r_max(&self) -> f64 {
        self.neighborhood
    }
}

/// Features of one instance in one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFeatures {
    /// Effective distance to via stacks, µm.
    pub r: f64,
    /// Toggle count over `n·t`.
    pub tau: f64,
    /// Toggle-rate-scaled power, W.
    pub p_r: f64,
    /// Total power, W.
    pub p_tot: f64,
    /// Overlap power, W.
    pub p_ol: f64,
    /// Power at each time step, W.
    pub p_t: Vec<f64>,
}

impl InstanceFeatures {
    pub fn peak_power(&self) -> f64 {
        self.p_t.iter().copied().fold(0.0, f64::max)
    }
}

/// Per-design state that does not depend on the slice.
#[derive(Debug, Clone)]
pub struct DesignContext {
    pub config: FeatureConfig,
    pub grid: TileGrid,
    pub location: LocationMatrix,
    /// Effective distance per instance.
    pub distance: Vec<f64>,
    /// Instances per tile, row-major.
    bins: Vec<Vec<u32>>,
}

impl DesignContext {
    pub fn new(design: &DesignBundle, config: FeatureConfig) -> Result<Self> {
        if !(config.tile_size > 0.0 && config.neighborhood > 0.0 && config.d_min > 0.0) {
            return Err(Error::Features(format!("invalid feature config {config:?}")));
        }
        let grid = TileGrid::for_chip(design.width, design.length, config.tile_size);
        let location = LocationMatrix::new(&grid, design.instances());
        let distance = design
            .instances()
            .iter()
            .map(|inst| effective_distance(inst.x, inst.y, design.vias(), &config))
            .collect();
        let mut bins = vec![Vec::new(); grid.len()];
        for i in 0..design.instances().len() {
            bins[location.flat(i)].push(i as u32);
        }
        Ok(Self {
            config,
            grid,
            location,
            distance,
            bins,
        })
    }

    /// Instances in tile `(ix, iy)` and its 8 neighbours.
    pub(crate) fn neighbourhood(&self, ix: usize, iy: usize) -> impl Iterator<Item = u32> + '_ {
        let xs = ix.saturating_sub(1)..=(ix + 1).min(self.grid.nx - 1);
        let ys = iy.saturating_sub(1)..=(iy + 1).min(self.grid.ny - 1);
        ys.flat_map(move |y| xs.clone().map(move |x| (x, y)))
            .flat_map(move |(x, y)| self.bins[y * self.grid.nx + x].iter().copied())
    }
}

/// Raw (unnormalised) features of one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceFeatures {
    pub slice_id: usize,
    pub instances: Vec<InstanceFeatures>,
    pub volume: FeatureVolume,
}

/// Runs the whole featurizer for one slice.
pub fn extract(design: &DesignBundle, ctx: &DesignContext, trace: &SliceTrace) -> Result<SliceFeatures> {
    design.check_trace(trace)?;
    let steps = design.window.steps();
    let toggles: Vec<Vec<u32>> = {
        let mut t = vec![Vec::new(); design.instances().len()];
        for &(i, s) in trace.entries() {
            t[i as usize].push(s);
        }
        t
    };
    let p_r: Vec<f64> = design
        .instances()
        .iter()
        .zip(&toggles)
        .map(|(inst, t)| toggle_rate_scaled_power(inst, t.len() as f64 / steps as f64))
        .collect();
    let p_ol = overlap_power(ctx, &toggles, &p_r, steps);
    let instances: Vec<InstanceFeatures> = design
        .instances()
        .iter()
        .enumerate()
        .map(|(i, inst)| InstanceFeatures {
            r: ctx.distance[i],
            tau: toggles[i].len() as f64 / steps as f64,
            p_r: p_r[i],
            p_tot: inst.total_power(),
            p_ol: p_ol[i],
            p_t: temporal_power(inst, toggles[i].iter().copied(), steps),
        })
        .collect();
    let volume = build_tile_maps(design, &ctx.location, &instances);
    Ok(SliceFeatures {
        slice_id: trace.slice_id,
        instances,
        volume,
    })
}
