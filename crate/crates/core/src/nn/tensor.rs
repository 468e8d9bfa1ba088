// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};

/// Dense activation tensor, axes `(channels, depth, height, width)`.
/// 2D maps use `depth = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: [usize; 4],
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "tensor {shape:?}");
        Self { shape, data }
    }

    pub fn channels(&self) -> usize {
        self.shape[0]
    }

    /// Elements per channel.
    pub fn volume(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let v = self.volume();
        &self.data[c * v..(c + 1) * v]
    }

    pub fn index(&self, c: usize, d: usize, h: usize, w: usize) -> usize {
        ((c * self.shape[1] + d) * self.shape[2] + h) * self.shape[3] + w
    }

    pub fn at(&self, c: usize, d: usize, h: usize, w: usize) -> f64 {
        self.data[self.index(c, d, h, w)]
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Model(format!("non-finite value in {what}")))
        }
    }
}
