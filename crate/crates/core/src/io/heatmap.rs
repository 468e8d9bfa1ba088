// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::write_string;
use crate::error::{Error, Result};

/// Row-major 2D map; row `iy`, column `ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn new(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::Metrics(format!(
                "heatmap {nx}x{ny} needs {} values, got {}",
                nx * ny,
                values.len()
            )));
        }
        Ok(Self { nx, ny, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ny = rows.len();
        let nx = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nx) {
            return Err(Error::Metrics("ragged heatmap rows".into()));
        }
        Self::new(nx, ny, rows.concat())
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    /// `(min, max)` over all cells.
    pub fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    fn check_finite(&self) -> Result<()> {
        if let Some(pos) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Metrics(format!(
                "heatmap cell ({}, {}) is not finite",
                pos % self.nx.max(1),
                pos / self.nx.max(1)
            )));
        }
        Ok(())
    }
}

/// Pixels per tile edge in the rendered image.
const PIXELS_PER_CELL: usize = 4;

/// Writes `<stem>.csv` (exact values) and `<stem>.ppm` (colour-mapped over `scale`).
/// Returns the two paths.
pub fn write_heatmap(map: &Heatmap, stem: impl AsRef<Path>, scale: (f64, f64)) -> Result<(PathBuf, PathBuf)> {
    map.check_finite()?;
    let stem = stem.as_ref();
    let csv = stem.with_extension("csv");
    let ppm = stem.with_extension("ppm");
    write_heatmap_csv(map, &csv)?;
    write_heatmap_ppm(map, &ppm, scale)?;
    Ok((csv, ppm))
}

/// One CSV row per map row, shortest round-trip decimal formatting.
pub fn write_heatmap_csv(map: &Heatmap, path: impl AsRef<Path>) -> Result<()> {
    map.check_finite()?;
    let mut s = String::new();
    for row in map.values.chunks(map.nx.max(1)) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    write_string(path.as_ref(), &s)
}

/// Binary PPM (P6). Image row 0 is the map's top row (largest `iy`).
pub fn write_heatmap_ppm(map: &Heatmap, path: impl AsRef<Path>, scale: (f64, f64)) -> Result<()> {
    map.check_finite()?;
    let (lo, hi) = scale;
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::Metrics(format!("invalid colour scale [{lo}, {hi}]")));
    }
    let width = map.nx * PIXELS_PER_CELL;
    let height = map.ny * PIXELS_PER_CELL;
    let mut bytes = format!("P6\n{width} {height}\n255\n").into_bytes();
    bytes.reserve(width * height * 3);
    for py in 0..height {
        let iy = map.ny - 1 - py / PIXELS_PER_CELL;
        for px in 0..width {
            let v = map.get(px / PIXELS_PER_CELL, iy);
            let t = if hi > lo {
                ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                0.0
            };
            bytes.extend_from_slice(&colormap(t));
        }
    }
    let path = path.as_ref();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Blue → cyan → green → yellow → red.
pub(crate) fn colormap(t: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 5] = [
        [0.0, 0.0, 255.0],
        [0.0, 255.0, 255.0],
        [0.0, 255.0, 0.0],
        [255.0, 255.0, 0.0],
        [255.0, 0.0, 0.0],
    ];
    let pos = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let k = (pos.floor() as usize).min(STOPS.len() - 2);
    let f = pos - k as f64;
    let mut rgb = [0u8; 3];
    for c in 0..3 {
        rgb[c] = (STOPS[k][c] + f * (STOPS[k + 1][c] - STOPS[k][c])).round() as u8;
    }
    rgb
}
