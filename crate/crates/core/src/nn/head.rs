// SPDX-License-Identifier: Apache-2.0

//! Per-instance regression: `IR_i = Σ_k β[k, tile(i)] · f_ik`, in volts after
//! multiplying by the IR scale.

use super::model::CoefficientMap;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::features::{LocationMatrix, INSTANCE_FEATURES};

/// Instance-side inputs of the regression layer for one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadInput {
    /// Flat index into the padded canvas, `iy · stride + ix`.
    pub tiles: Vec<u32>,
    /// Row-major `N × 8` normalised feature vectors.
    pub features: Vec<f64>,
}

impl HeadInput {
    pub fn new(location: &LocationMatrix, stride: usize, features: &[[f64; INSTANCE_FEATURES]]) -> Result<Self> {
        if location.len() != features.len() {
            return Err(Error::Model(format!(
                "{} instances located but {} feature vectors",
                location.len(),
                features.len()
            )));
        }
        if location.nx > stride {
            return Err(Error::Model(format!(
                "location grid {} wider than canvas {stride}",
                location.nx
            )));
        }
        Ok(Self {
            tiles: (0..location.len())
                .map(|i| location.flat_padded(i, stride) as u32)
                .collect(),
            features: features.iter().flatten().copied().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }
}

/// Gathers each instance's coefficient row: `N × K`.
fn gather(beta: &Tensor, tiles: &[u32]) -> Vec<f64> {
    let k = beta.shape[0];
    let plane = beta.volume();
    let mut rows = vec![0.0; tiles.len() * k];
    for c in 0..k {
        let src = &beta.data[c * plane..(c + 1) * plane];
        rows.iter_mut()
            .skip(c)
            .step_by(k)
            .zip(tiles)
            .for_each(|(r, &t)| *r = src[t as usize]);
    }
    rows
}

/// Normalised prediction per instance (not yet multiplied by the IR scale).
pub fn predict_normalized(map: &CoefficientMap, head: &HeadInput) -> Result<Vec<f64>> {
    let k = map.coefficients();
    if k != INSTANCE_FEATURES && k != INSTANCE_FEATURES + 1 {
        return Err(Error::Model(format!("coefficient map has {k} channels")));
    }
    let plane = map.beta.volume();
    if let Some(&t) = head.tiles.iter().find(|&&t| t as usize >= plane) {
        return Err(Error::Model(format!(
            "instance tile {t} outside the {plane}-tile canvas"
        )));
    }
    let rows = gather(&map.beta, &head.tiles);
    let f = INSTANCE_FEATURES;
    Ok(rows
        .chunks_exact(k)
        .zip(head.features.chunks_exact(f))
        .map(|(b, x)| b[..f].iter().zip(x).map(|(b, x)| b * x).sum::<f64>() + b.get(f).copied().unwrap_or(0.0))
        .collect())
}

/// Per-instance IR drop, volts.
pub fn predict_ir(map: &CoefficientMap, head: &HeadInput, ir_scale: f64) -> Result<Vec<f64>> {
    Ok(predict_normalized(map, head)?
        .into_iter()
        .map(|v| v * ir_scale)
        .collect())
}

/// Scatters `d loss / d prediction` back onto the coefficient map.
pub fn head_backward(beta_shape: [usize; 4], head: &HeadInput, grad_pred: &[f64]) -> Tensor {
    let k = beta_shape[0];
    let f = INSTANCE_FEATURES;
    let mut g = Tensor::zeros(beta_shape);
    let plane = g.volume();
    for ((&t, x), &gp) in head.tiles.iter().zip(head.features.chunks_exact(f)).zip(grad_pred) {
        for (c, &xc) in x.iter().enumerate() {
            g.data[c * plane + t as usize] += gp * xc;
        }
        if k > f {
            g.data[f * plane + t as usize] += gp;
        }
    }
    g
}
