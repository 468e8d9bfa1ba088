// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ops::{self, Kernel};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::features::{FeatureVolume, NormConstants, INSTANCE_FEATURES, SPATIAL_CHANNELS};

/// Encoder flavour. Both share the decoder and the regression head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// 3D convolutions over a `(time × H × W)` volume with the spatial maps
    /// broadcast along time.
    Temporal3d,
    /// 2D convolutions over all `n·t + 7` channels stacked as planes.
    Flat2d,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Temporal3d => "temporal3d",
            Variant::Flat2d => "flat2d",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "temporal3d" => Ok(Variant::Temporal3d),
            "flat2d" => Ok(Variant::Flat2d),
            other => Err(Error::Model(format!(
                "unknown variant {other:?} (expected temporal3d or flat2d)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    pub variant: Variant,
    pub cycles: usize,
    pub steps_per_cycle: usize,
    pub encoder: [usize; 4],
    /// Last entry is the coefficient count, `8` or `9` with `head_bias`.
    pub decoder: [usize; 4],
    /// Adds a per-tile constant term to the regression.
    pub head_bias: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Temporal3d,
            cycles: 20,
            steps_per_cycle: 5,
            encoder: [16, 32, 64, 64],
            decoder: [64, 32, 16, INSTANCE_FEATURES],
            head_bias: false,
        }
    }
}

/// Spatial kernel of every convolution.
pub const KERNEL: usize = 3;

impl ModelConfig {
    pub fn steps(&self) -> usize {
        self.cycles * self.steps_per_cycle
    }

    pub fn coefficients(&self) -> usize {
        INSTANCE_FEATURES + usize::from(self.head_bias)
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder.iter().chain(&self.decoder).any(|&c| c == 0) {
            return Err(Error::Model("channel widths must be positive".into()));
        }
        if self.decoder[3] != self.coefficients() {
            return Err(Error::Model(format!(
                "last decoder width {} must equal the coefficient count {}",
                self.decoder[3],
                self.coefficients()
            )));
        }
        if self.variant == Variant::Temporal3d && self.steps() < 8 {
            return Err(Error::Model(format!(
                "the 3D encoder pools time three times and needs at least 8 steps, got {}",
                self.steps()
            )));
        }
        Ok(())
    }

    /// Depth of the encoder activations at each level.
    pub fn depths(&self) -> [usize; 4] {
        match self.variant {
            Variant::Temporal3d => {
                let d = self.steps();
                [d, d / 2, d / 4, d / 8]
            }
            Variant::Flat2d => [1; 4],
        }
    }

    fn pool(&self) -> Kernel {
        match self.variant {
            Variant::Temporal3d => [2, 2, 2],
            Variant::Flat2d => [1, 2, 2],
        }
    }

    fn encoder_kernel(&self) -> Kernel {
        match self.variant {
            Variant::Temporal3d => [KERNEL; 3],
            Variant::Flat2d => [1, KERNEL, KERNEL],
        }
    }

    /// `(cin, cout, kernel)` of each of the eight convolutions, encoder first.
    pub fn layer_shapes(&self) -> [(usize, usize, Kernel); 8] {
        let e = self.encoder;
        let d = self.decoder;
        let k2 = [1, KERNEL, KERNEL];
        let ke = self.encoder_kernel();
        let stem_in = match self.variant {
            Variant::Temporal3d => 1 + SPATIAL_CHANNELS,
            Variant::Flat2d => self.steps() + SPATIAL_CHANNELS,
        };
        [
            (stem_in, e[0], ke),
            (e[0], e[1], ke),
            (e[1], e[2], ke),
            (e[2], e[3], ke),
            (e[3], d[0], k2),
            (d[0] + e[2], d[1], k2),
            (d[1] + e[1], d[2], k2),
            (d[2] + e[0], d[3], k2),
        ]
    }

    /// Total trainable scalars.
    pub fn parameter_count(&self) -> usize {
        self.layer_shapes()
            .iter()
            .map(|&(ci, co, k)| co * ci * k.iter().product::<usize>() + co)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub cin: usize,
    pub cout: usize,
    pub kernel: Kernel,
    /// `[cout][cin][kd][kh][kw]`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(cin: usize, cout: usize, kernel: Kernel) -> Self {
        Self {
            cin,
            cout,
            kernel,
            weight: vec![0.0; cout * cin * kernel.iter().product::<usize>()],
            bias: vec![0.0; cout],
        }
    }

    fn taps(&self) -> usize {
        self.kernel.iter().product()
    }
}

/// Normalised network input padded to a multiple of 8 tiles per side.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    /// `[1, steps, H, W]`.
    pub temporal: Tensor,
    /// `[7, 1, H, W]`.
    pub spatial: Tensor,
    /// Unpadded tile counts.
    pub nx: usize,
    pub ny: usize,
}

/// Rounds up to the next multiple of 8 (three ×2 poolings).
pub fn padded_extent(n: usize) -> usize {
    n.div_ceil(8).max(1) * 8
}

impl ModelInput {
    /// Embeds a normalised volume in a zero-padded canvas. Tile `(ix, iy)` maps
    /// to height `iy`, width `ix`.
    pub fn from_volume(volume: &FeatureVolume) -> Self {
        let (nx, ny) = (volume.nx, volume.ny);
        let (hp, wp) = (padded_extent(ny), padded_extent(nx));
        let place = |src: &[f64], channels: usize| {
            let mut out = vec![0.0; channels * hp * wp];
            for c in 0..channels {
                for y in 0..ny {
                    let s = (c * ny + y) * nx;
                    let d = (c * hp + y) * wp;
                    out[d..d + nx].copy_from_slice(&src[s..s + nx]);
                }
            }
            out
        };
        Self {
            temporal: Tensor::from_vec([1, volume.steps, hp, wp], place(&volume.temporal, volume.steps)),
            spatial: Tensor::from_vec([SPATIAL_CHANNELS, 1, hp, wp], place(&volume.spatial, SPATIAL_CHANNELS)),
            nx,
            ny,
        }
    }

    pub fn padded(&self) -> (usize, usize) {
        (self.temporal.shape[2], self.temporal.shape[3])
    }

    pub fn steps(&self) -> usize {
        self.temporal.shape[1]
    }

    /// All channels stacked as planes: `[steps + 7, 1, H, W]`.
    pub fn stacked(&self) -> Tensor {
        let (h, w) = self.padded();
        let mut data = self.temporal.data.clone();
        data.extend_from_slice(&self.spatial.data);
        Tensor::from_vec([self.steps() + SPATIAL_CHANNELS, 1, h, w], data)
    }
}

/// Per-tile regression coefficients over the padded canvas, `[K, 1, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMap {
    pub beta: Tensor,
    pub nx: usize,
    pub ny: usize,
}

impl CoefficientMap {
    pub fn coefficients(&self) -> usize {
        self.beta.shape[0]
    }

    /// Padded row length; instance tile indices are `iy * stride + ix`.
    pub fn stride(&self) -> usize {
        self.beta.shape[3]
    }

    /// Coefficient `k` of unpadded tile `(ix, iy)`.
    pub fn get(&self, k: usize, ix: usize, iy: usize) -> f64 {
        self.beta.at(k, 0, iy, ix)
    }

    /// Cropped `ny × nx` plane of coefficient `k`, row-major.
    pub fn cropped(&self, k: usize) -> Vec<f64> {
        (0..self.ny)
            .flat_map(|y| (0..self.nx).map(move |x| (x, y)))
            .map(|(x, y)| self.get(k, x, y))
            .collect()
    }
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: ModelInput,
    /// Encoder outputs after ReLU, levels 0..4.
    enc: Vec<Tensor>,
    /// Pool inputs' shapes and argmaxes, levels 0..3.
    pools: Vec<([usize; 4], Vec<u32>)>,
    /// Decoder conv inputs (concatenations, or the bottleneck sum for the first).
    dec_in: Vec<Tensor>,
    /// Decoder outputs; the last is the coefficient map.
    dec_out: Vec<Tensor>,
}

impl ForwardCache {
    /// On/off state of every ReLU unit, then every pooling argmax. Two forward
    /// passes with equal patterns lie on the same linear piece of the network.
    pub fn activation_pattern(&self) -> (Vec<bool>, Vec<u32>) {
        let relu = self
            .enc
            .iter()
            .chain(&self.dec_out[..3])
            .flat_map(|t| t.data.iter().map(|&v| v > 0.0))
            .collect();
        let arg = self.pools.iter().flat_map(|(_, a)| a.iter().copied()).collect();
        (relu, arg)
    }
}

/// Gradient of every parameter, same layout as [`Model::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<ConvLayer>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| ConvLayer::zeros(l.cin, l.cout, l.kernel))
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Gradients, a: f64) {
        for (l, o) in self.layers.iter_mut().zip(&other.layers) {
            l.weight.iter_mut().zip(&o.weight).for_each(|(x, y)| *x += a * y);
            l.bias.iter_mut().zip(&o.bias).for_each(|(x, y)| *x += a * y);
        }
    }
}

/// The U-Net: four encoder convolutions with three poolings, skips summed over
/// time, four 2D decoder convolutions with three ×2 upsamplings.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub layers: Vec<ConvLayer>,
    pub norm: NormConstants,
}

impl Model {
    /// Seeded fan-in uniform initialisation.
    pub fn new(config: ModelConfig, norm: NormConstants, seed: u64) -> Result<Self> {
        config.validate()?;
        norm.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = config.layer_shapes();
        let depths = config.depths();
        let e = config.encoder;
        let mut layers = Vec::with_capacity(8);
        for (idx, &(cin, cout, k)) in shapes.iter().enumerate() {
            let mut layer = ConvLayer::zeros(cin, cout, k);
            let taps = layer.taps();
            let fan_in = (cin * taps) as f64;
            let gain = if idx == 7 { 3.0 } else { 6.0 };
            let bound = (gain / fan_in).sqrt();
            // Summed-over-time channels are larger by their depth; scale them back.
            let channel_scale = |ci: usize| -> f64 {
                match idx {
                    4 => 1.0 / depths[3] as f64,
                    5 if ci >= cin - e[2] => 1.0 / depths[2] as f64,
                    6 if ci >= cin - e[1] => 1.0 / depths[1] as f64,
                    7 if ci >= cin - e[0] => 1.0 / depths[0] as f64,
                    _ => 1.0,
                }
            };
            for co in 0..cout {
                for ci in 0..cin {
                    let s = channel_scale(ci);
                    for t in 0..taps {
                        layer.weight[(co * cin + ci) * taps + t] = s * rng.gen_range(-bound..bound);
                    }
                }
            }
            layers.push(layer);
        }
        Ok(Self { config, layers, norm })
    }

    /// A model whose every weight and bias is zero.
    pub fn zeros(config: ModelConfig, norm: NormConstants) -> Result<Self> {
        config.validate()?;
        norm.validate()?;
        let layers = config
            .layer_shapes()
            .iter()
            .map(|&(ci, co, k)| ConvLayer::zeros(ci, co, k))
            .collect();
        Ok(Self { config, layers, norm })
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Sum of squared weights (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.layers.iter().flat_map(|l| &l.weight).map(|w| w * w).sum()
    }

    fn check_input(&self, input: &ModelInput) -> Result<()> {
        let (h, w) = input.padded();
        if h % 8 != 0 || w % 8 != 0 {
            return Err(Error::Model(format!("input {h}x{w} is not padded to a multiple of 8")));
        }
        if input.steps() != self.config.steps() {
            return Err(Error::Model(format!(
                "input has {} temporal channels, model expects {}",
                input.steps(),
                self.config.steps()
            )));
        }
        if input.spatial.shape != [SPATIAL_CHANNELS, 1, h, w] {
            return Err(Error::Model(format!(
                "spatial maps have shape {:?}",
                input.spatial.shape
            )));
        }
        Ok(())
    }

    pub fn forward(&self, input: &ModelInput) -> Result<CoefficientMap> {
        Ok(self.forward_cached(input)?.0)
    }

    pub fn forward_cached(&self, input: &ModelInput) -> Result<(CoefficientMap, ForwardCache)> {
        self.check_input(input)?;
        let pool = self.config.pool();
        let l = &self.layers;
        let mut enc = Vec::with_capacity(4);
        let mut pools = Vec::with_capacity(3);
        let mut e0 = match self.config.variant {
            Variant::Temporal3d => ops::stem_forward(
                &input.temporal,
                &input.spatial,
                &l[0].weight,
                &l[0].bias,
                l[0].cout,
                l[0].kernel,
            ),
            Variant::Flat2d => {
                ops::conv_forward(&input.stacked(), &l[0].weight, Some(&l[0].bias), l[0].cout, l[0].kernel)
            }
        };
        ops::relu_inplace(&mut e0);
        enc.push(e0);
        for layer in &l[1..4] {
            let prev = enc.last().expect("encoder level");
            let (p, arg) = ops::maxpool_forward(prev, pool);
            pools.push((prev.shape, arg));
            let mut e = ops::conv_forward(&p, &layer.weight, Some(&layer.bias), layer.cout, layer.kernel);
            ops::relu_inplace(&mut e);
            enc.push(e);
        }
        let sums: Vec<Tensor> = enc.iter().map(ops::temporal_sum_forward).collect();

        let mut dec_in = Vec::with_capacity(4);
        let mut dec_out: Vec<Tensor> = Vec::with_capacity(4);
        for (j, layer) in l[4..].iter().enumerate() {
            let x = if j == 0 {
                sums[3].clone()
            } else {
                let up = ops::upsample_forward(&dec_out[j - 1]);
                ops::concat_forward(&up, &sums[3 - j])
            };
            let mut y = ops::conv_forward(&x, &layer.weight, Some(&layer.bias), layer.cout, layer.kernel);
            if j < 3 {
                ops::relu_inplace(&mut y);
            }
            dec_in.push(x);
            dec_out.push(y);
        }
        let beta = dec_out[3].clone();
        beta.ensure_finite("coefficient map")?;
        let map = CoefficientMap {
            beta,
            nx: input.nx,
            ny: input.ny,
        };
        let cache = ForwardCache {
            input: input.clone(),
            enc,
            pools,
            dec_in,
            dec_out,
        };
        Ok((map, cache))
    }

    /// Parameter gradients given `d loss / d β` over the padded canvas.
    pub fn backward(&self, cache: &ForwardCache, grad_beta: &Tensor) -> Gradients {
        let l = &self.layers;
        let mut grads = Gradients::zeros_like(self);
        let depths: Vec<usize> = cache.enc.iter().map(|e| e.shape[1]).collect();
        let mut g_sums: Vec<Option<Tensor>> = vec![None, None, None, None];

        // Decoder, last layer first.
        let mut g = grad_beta.clone();
        for j in (0..4).rev() {
            let layer = &l[4 + j];
            if j < 3 {
                ops::relu_backward_inplace(&cache.dec_out[j], &mut g);
            }
            let (gx, gw, gb) = ops::conv_backward(&cache.dec_in[j], &layer.weight, layer.cout, layer.kernel, &g, true);
            grads.layers[4 + j].weight = gw;
            grads.layers[4 + j].bias = gb;
            let gx = gx.expect("decoder input gradient");
            if j == 0 {
                g_sums[3] = Some(gx);
            } else {
                let up_channels = cache.dec_out[j - 1].shape[0];
                let (g_up, g_skip) = ops::concat_backward(up_channels, &gx);
                g_sums[3 - j] = Some(g_skip);
                g = ops::upsample_backward(&g_up);
            }
        }

        // Encoder, deepest level first.
        let pool_shape = |lvl: usize| cache.pools[lvl - 1].0;
        let mut g_enc: Option<Tensor> = None;
        for lvl in (0..4).rev() {
            let mut g = ops::temporal_sum_backward(depths[lvl], g_sums[lvl].as_ref().expect("skip gradient"));
            if let Some(from_below) = g_enc.take() {
                g.data.iter_mut().zip(&from_below.data).for_each(|(a, b)| *a += b);
            }
            ops::relu_backward_inplace(&cache.enc[lvl], &mut g);
            let layer = &l[lvl];
            if lvl == 0 {
                let (gw, gb) = match self.config.variant {
                    Variant::Temporal3d => ops::stem_backward(
                        &cache.input.temporal,
                        &cache.input.spatial,
                        &layer.weight,
                        layer.cout,
                        layer.kernel,
                        &g,
                    ),
                    Variant::Flat2d => {
                        let (_, gw, gb) = ops::conv_backward(
                            &cache.input.stacked(),
                            &layer.weight,
                            layer.cout,
                            layer.kernel,
                            &g,
                            false,
                        );
                        (gw, gb)
                    }
                };
                grads.layers[0].weight = gw;
                grads.layers[0].bias = gb;
            } else {
                let (shape, arg) = &cache.pools[lvl - 1];
                let pooled = pooled_input(cache, lvl, self.config.pool());
                let (gx, gw, gb) = ops::conv_backward(&pooled, &layer.weight, layer.cout, layer.kernel, &g, true);
                grads.layers[lvl].weight = gw;
                grads.layers[lvl].bias = gb;
                debug_assert_eq!(*shape, pool_shape(lvl));
                g_enc = Some(ops::maxpool_backward(*shape, arg, &gx.expect("encoder input gradient")));
            }
        }
        grads
    }
}

/// Recomputes the pooled input of encoder level `lvl` from the cached argmaxes.
fn pooled_input(cache: &ForwardCache, lvl: usize, pool: Kernel) -> Tensor {
    let src = &cache.enc[lvl - 1];
    let [c, d, h, w] = src.shape;
    let shape = [c, d / pool[0], h / pool[1], w / pool[2]];
    let arg = &cache.pools[lvl - 1].1;
    Tensor::from_vec(shape, arg.iter().map(|&i| src.data[i as usize]).collect())
}
