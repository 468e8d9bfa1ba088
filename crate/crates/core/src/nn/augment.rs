// SPDX-License-Identifier: Apache-2.0

//! Mirror and transpose augmentation. A mirrored design has the mirrored IR
//! map, so per-instance labels are unchanged.

use super::head::HeadInput;
use super::tensor::Tensor;
use super::train::Sample;

/// Number of symmetries available for a sample: 8 on a square grid, else 4.
pub fn symmetry_count(sample: &Sample) -> u8 {
    let (h, w) = sample.input.padded();
    if sample.input.nx == sample.input.ny && h == w {
        8
    } else {
        4
    }
}

/// Bit 0 mirrors x, bit 1 mirrors y, bit 2 transposes (square grids only).
/// Mirrors act on the real tiles; the zero padding stays at the far edges.
pub fn transform(sample: &Sample, k: u8) -> Sample {
    assert!(k < symmetry_count(sample), "symmetry {k} not available");
    let (nx, ny) = (sample.input.nx, sample.input.ny);
    let map = |x: usize, y: usize| -> (usize, usize) {
        let x = if k & 1 != 0 { nx - 1 - x } else { x };
        let y = if k & 2 != 0 { ny - 1 - y } else { y };
        if k & 4 != 0 {
            (y, x)
        } else {
            (x, y)
        }
    };
    let mut out = sample.clone();
    remap(&sample.input.temporal, &mut out.input.temporal, nx, ny, map);
    remap(&sample.input.spatial, &mut out.input.spatial, nx, ny, map);
    let stride = sample.input.padded().1;
    out.head = HeadInput {
        tiles: sample
            .head
            .tiles
            .iter()
            .map(|&t| {
                let (x, y) = map(t as usize % stride, t as usize / stride);
                (y * stride + x) as u32
            })
            .collect(),
        features: sample.head.features.clone(),
    };
    out
}

fn remap(src: &Tensor, dst: &mut Tensor, nx: usize, ny: usize, map: impl Fn(usize, usize) -> (usize, usize)) {
    let [c, d, _, _] = src.shape;
    for ci in 0..c {
        for dd in 0..d {
            for y in 0..ny {
                for x in 0..nx {
                    let (x2, y2) = map(x, y);
                    let i = dst.index(ci, dd, y2, x2);
                    dst.data[i] = src.at(ci, dd, y, x);
                }
            }
        }
    }
}
