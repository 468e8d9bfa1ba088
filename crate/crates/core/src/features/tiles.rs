// SPDX-License-Identifier: Apache-2.0

use super::InstanceFeatures;
use crate::design::{DesignBundle, InstanceRecord};

/// Number of spatial channels: `P_i, P_l, P_s, P_r, P_ol, P_tot, R`.
pub const SPATIAL_CHANNELS: usize = 7;

/// Tiling of a chip into square bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileGrid {
    pub nx: usize,
    pub ny: usize,
    pub tile_size: f64,
}

impl TileGrid {
    pub fn for_chip(width: f64, length: f64, tile_size: f64) -> Self {
        let count = |extent: f64| ((extent / tile_size).ceil() as usize).max(1);
        Self {
            nx: count(width),
            ny: count(length),
            tile_size,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Half-open bins `[k·s, (k+1)·s)`; points on the far edge land in the last bin.
    pub fn tile_of(&self, x: f64, y: f64) -> (usize, usize) {
        let bin = |v: f64, n: usize| ((v / self.tile_size).floor().max(0.0) as usize).min(n - 1);
        (bin(x, self.nx), bin(y, self.ny))
    }
}

/// Instance → tile mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocationMatrix {
    pub nx: usize,
    pub ny: usize,
    tiles: Vec<(u32, u32)>,
}

impl LocationMatrix {
    pub fn new(grid: &TileGrid, instances: &[InstanceRecord]) -> Self {
        let tiles = instances
            .iter()
            .map(|i| {
                let (x, y) = grid.tile_of(i.x, i.y);
                (x as u32, y as u32)
            })
            .collect();
        Self {
            nx: grid.nx,
            ny: grid.ny,
            tiles,
        }
    }

    pub fn from_tiles(nx: usize, ny: usize, tiles: Vec<(u32, u32)>) -> Self {
        Self { nx, ny, tiles }
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn tile(&self, instance: usize) -> (usize, usize) {
        let (x, y) = self.tiles[instance];
        (x as usize, y as usize)
    }

    /// Row-major tile index of an instance.
    pub fn flat(&self, instance: usize) -> usize {
        let (x, y) = self.tile(instance);
        y * self.nx + x
    }

    /// Row-major tile index in a grid padded to `padded_nx` columns.
    pub fn flat_padded(&self, instance: usize, padded_nx: usize) -> usize {
        let (x, y) = self.tile(instance);
        y * padded_nx + x
    }
}

/// Tile maps of one slice: `steps` temporal channels then 7 spatial channels.
/// Each channel is row-major `ny × nx`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    pub nx: usize,
    pub ny: usize,
    pub steps: usize,
    pub temporal: Vec<f64>,
    pub spatial: Vec<f64>,
}

impl FeatureVolume {
    pub fn zeros(nx: usize, ny: usize, steps: usize) -> Self {
        Self {
            nx,
            ny,
            steps,
            temporal: vec![0.0; steps * nx * ny],
            spatial: vec![0.0; SPATIAL_CHANNELS * nx * ny],
        }
    }

    pub fn plane(&self) -> usize {
        self.nx * self.ny
    }

    /// `n·t + 7`.
    pub fn channels(&self) -> usize {
        self.steps + SPATIAL_CHANNELS
    }

    /// Channel `c` in the order temporal steps, then `P_i, P_l, P_s, P_r, P_ol, P_tot, R`.
    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.plane();
        if c < self.steps {
            &self.temporal[c * p..(c + 1) * p]
        } else {
            let c = c - self.steps;
            &self.spatial[c * p..(c + 1) * p]
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.temporal.iter().chain(&self.spatial).copied()
    }
}

/// Bins instance features into tiles. Power channels sum, `R` takes the maximum
/// (0 in empty tiles), temporal channel `j` sums `p_t(j)`.
pub fn build_tile_maps(
    design: &DesignBundle,
    location: &LocationMatrix,
    features: &[InstanceFeatures],
) -> FeatureVolume {
    let steps = design.window.steps();
    let mut vol = FeatureVolume::zeros(location.nx, location.ny, steps);
    let plane = vol.plane();
    for (i, (inst, f)) in design.instances().iter().zip(features).enumerate() {
        let t = location.flat(i);
        let spatial = [
            inst.p_internal,
            inst.p_leakage,
            inst.p_switching,
            f.p_r,
            f.p_ol,
            f.p_tot,
        ];
        for (c, v) in spatial.into_iter().enumerate() {
            vol.spatial[c * plane + t] += v;
        }
        let r = &mut vol.spatial[6 * plane + t];
        *r = r.max(f.r);
        for (j, p) in f.p_t.iter().enumerate() {
            vol.temporal[j * plane + t] += p;
        }
    }
    vol
}
