// SPDX-License-Identifier: Apache-2.0

//! Central finite-difference checks of every layer and of the full loss.

use rand::Rng;

use irdrop::features::{FeatureVolume, LocationMatrix, NormConstants, INSTANCE_FEATURES};
use irdrop::nn::ops::{self, Kernel};
use irdrop::nn::{
    flatten_grads, flatten_params, head_backward, loss_and_grad, predict_normalized, unflatten_params, CoefficientMap,
    HeadInput, Model, ModelConfig, ModelInput, Sample, Tensor, Variant,
};

use super::{random_tensor, rel_err, rng, uniform_vec};

pub const H: f64 = 1e-3;
pub const TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub name: String,
    pub checked: usize,
    /// Entries whose perturbation moved a ReLU or argmax decision.
    pub skipped: usize,
    pub max_rel: f64,
}

impl GradCheck {
    /// Below tolerance, with at most 5% of entries skipped at kinks.
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel < TOLERANCE && self.skipped * 20 <= self.checked + self.skipped
    }
}

/// Compares `analytic` with central differences of `f`. `f` also returns a
/// decision pattern; entries whose ±H evaluations change it are skipped.
pub fn fd_check(name: &str, x0: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> (f64, Vec<u64>)) -> GradCheck {
    assert_eq!(x0.len(), analytic.len(), "{name}: gradient length");
    let (_, base) = f(x0);
    let mut x = x0.to_vec();
    let mut out = GradCheck {
        name: name.to_string(),
        checked: 0,
        skipped: 0,
        max_rel: 0.0,
    };
    for i in 0..x.len() {
        x[i] = x0[i] + H;
        let (lp, pp) = f(&x);
        x[i] = x0[i] - H;
        let (lm, pm) = f(&x);
        x[i] = x0[i];
        if pp != base || pm != base {
            out.skipped += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * H);
        out.max_rel = out.max_rel.max(rel_err(analytic[i], numeric));
        out.checked += 1;
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn with_data(shape: [usize; 4], data: &[f64]) -> Tensor {
    Tensor::from_vec(shape, data.to_vec())
}

fn conv_checks(label: &str, x_shape: [usize; 4], cout: usize, k: Kernel, seed: u64) -> Vec<GradCheck> {
    let mut r = rng(seed);
    let cin = x_shape[0];
    let taps: usize = k.iter().product();
    let x = random_tensor(&mut r, x_shape);
    let w = uniform_vec(&mut r, cout * cin * taps, -1.0, 1.0);
    let b = uniform_vec(&mut r, cout, -1.0, 1.0);
    let up = random_tensor(&mut r, [cout, x_shape[1], x_shape[2], x_shape[3]]);
    let loss = |x: &Tensor, w: &[f64], b: &[f64]| dot(&ops::conv_forward(x, w, Some(b), cout, k).data, &up.data);
    let (gx, gw, gb) = ops::conv_backward(&x, &w, cout, k, &up, true);
    let gx = gx.expect("input gradient");
    vec![
        fd_check(&format!("{label} input"), &x.data, &gx.data, |v| {
            (loss(&with_data(x.shape, v), &w, &b), vec![])
        }),
        fd_check(&format!("{label} weight"), &w, &gw, |v| (loss(&x, v, &b), vec![])),
        fd_check(&format!("{label} bias"), &b, &gb, |v| (loss(&x, &w, v), vec![])),
    ]
}

fn stem_checks(seed: u64) -> Vec<GradCheck> {
    let mut r = rng(seed);
    let k = [3, 3, 3];
    let cout = 2;
    let temporal = random_tensor(&mut r, [1, 6, 5, 4]);
    let spatial = random_tensor(&mut r, [7, 1, 5, 4]);
    let w = uniform_vec(&mut r, cout * 8 * 27, -1.0, 1.0);
    let b = uniform_vec(&mut r, cout, -1.0, 1.0);
    let up = random_tensor(&mut r, [cout, 6, 5, 4]);
    let loss = |w: &[f64], b: &[f64]| dot(&ops::stem_forward(&temporal, &spatial, w, b, cout, k).data, &up.data);
    let (gw, gb) = ops::stem_backward(&temporal, &spatial, &w, cout, k, &up);
    vec![
        fd_check("3D stem conv weight", &w, &gw, |v| (loss(v, &b), vec![])),
        fd_check("3D stem conv bias", &b, &gb, |v| (loss(&w, v), vec![])),
    ]
}

fn pool_check(label: &str, shape: [usize; 4], k: Kernel, seed: u64) -> GradCheck {
    let mut r = rng(seed);
    let x = random_tensor(&mut r, shape);
    let (y, arg) = ops::maxpool_forward(&x, k);
    let up = random_tensor(&mut r, y.shape);
    let gx = ops::maxpool_backward(shape, &arg, &up);
    fd_check(label, &x.data, &gx.data, |v| {
        let (y, arg) = ops::maxpool_forward(&with_data(shape, v), k);
        (dot(&y.data, &up.data), arg.iter().map(|&a| u64::from(a)).collect())
    })
}

fn linear_op_checks(seed: u64) -> Vec<GradCheck> {
    let mut r = rng(seed);
    let mut out = Vec::new();

    let x = random_tensor(&mut r, [2, 5, 4, 3]);
    let up = random_tensor(&mut r, [2, 1, 4, 3]);
    let g = ops::temporal_sum_backward(5, &up);
    out.push(fd_check("temporal sum", &x.data, &g.data, |v| {
        (
            dot(&ops::temporal_sum_forward(&with_data(x.shape, v)).data, &up.data),
            vec![],
        )
    }));

    let x = random_tensor(&mut r, [2, 1, 3, 4]);
    let up = random_tensor(&mut r, [2, 1, 6, 8]);
    let g = ops::upsample_backward(&up);
    out.push(fd_check("nearest upsample", &x.data, &g.data, |v| {
        (
            dot(&ops::upsample_forward(&with_data(x.shape, v)).data, &up.data),
            vec![],
        )
    }));

    let a = random_tensor(&mut r, [2, 1, 3, 3]);
    let b = random_tensor(&mut r, [3, 1, 3, 3]);
    let up = random_tensor(&mut r, [5, 1, 3, 3]);
    let (ga, gb) = ops::concat_backward(2, &up);
    out.push(fd_check("concat first", &a.data, &ga.data, |v| {
        (
            dot(&ops::concat_forward(&with_data(a.shape, v), &b).data, &up.data),
            vec![],
        )
    }));
    out.push(fd_check("concat second", &b.data, &gb.data, |v| {
        (
            dot(&ops::concat_forward(&a, &with_data(b.shape, v)).data, &up.data),
            vec![],
        )
    }));

    let x = random_tensor(&mut r, [2, 3, 4, 4]);
    let up = random_tensor(&mut r, x.shape);
    let mut y = x.clone();
    ops::relu_inplace(&mut y);
    let mut g = up.clone();
    ops::relu_backward_inplace(&y, &mut g);
    out.push(fd_check("relu", &x.data, &g.data, |v| {
        let mut y = with_data(x.shape, v);
        ops::relu_inplace(&mut y);
        let pattern = y.data.iter().map(|&t| u64::from(t > 0.0)).collect();
        (dot(&y.data, &up.data), pattern)
    }));
    out
}

fn head_check(coefficients: usize, seed: u64) -> GradCheck {
    let mut r = rng(seed);
    let (nx, ny, stride) = (7, 6, 8);
    let beta = random_tensor(&mut r, [coefficients, 1, 8, 8]);
    let n = 30;
    let tiles: Vec<(u32, u32)> = (0..n)
        .map(|_| (r.gen_range(0..nx as u32), r.gen_range(0..ny as u32)))
        .collect();
    let loc = LocationMatrix::from_tiles(nx, ny, tiles);
    let feats: Vec<[f64; INSTANCE_FEATURES]> = (0..n).map(|_| std::array::from_fn(|_| r.gen_range(0.0..1.0))).collect();
    let head = HeadInput::new(&loc, stride, &feats).expect("head input");
    let c = uniform_vec(&mut r, n, -1.0, 1.0);
    let g = head_backward(beta.shape, &head, &c);
    let name = if coefficients > INSTANCE_FEATURES {
        "regression head with bias"
    } else {
        "regression head"
    };
    fd_check(name, &beta.data, &g.data, |v| {
        let map = CoefficientMap {
            beta: with_data(beta.shape, v),
            nx,
            ny,
        };
        (dot(&predict_normalized(&map, &head).expect("prediction"), &c), vec![])
    })
}

/// Layer-level checks of every kernel with a random upstream gradient.
pub fn layer_checks() -> Vec<GradCheck> {
    let mut out = Vec::new();
    out.extend(conv_checks("3D conv", [2, 5, 6, 4], 3, [3, 3, 3], 1));
    out.extend(conv_checks("2D conv", [3, 1, 6, 5], 2, [1, 3, 3], 2));
    out.extend(stem_checks(3));
    out.push(pool_check("3D max-pool", [2, 6, 6, 5], [2, 2, 2], 4));
    out.push(pool_check("2D max-pool", [2, 1, 6, 7], [1, 2, 2], 5));
    out.extend(linear_op_checks(6));
    out.push(head_check(INSTANCE_FEATURES, 7));
    out.push(head_check(INSTANCE_FEATURES + 1, 8));
    out
}

/// Small network used by the end-to-end check.
pub fn tiny_config(variant: Variant, head_bias: bool) -> ModelConfig {
    ModelConfig {
        variant,
        cycles: 4,
        steps_per_cycle: 2,
        encoder: [2, 3, 4, 4],
        decoder: [4, 3, 3, INSTANCE_FEATURES + usize::from(head_bias)],
        head_bias,
    }
}

/// Random 16×16-tile samples with random labels.
pub fn random_samples(count: usize, steps: usize, seed: u64) -> Vec<Sample> {
    let mut r = rng(seed);
    (0..count)
        .map(|s| {
            let mut v = FeatureVolume::zeros(16, 16, steps);
            v.temporal.iter_mut().for_each(|x| *x = r.gen_range(0.0..1.0));
            v.spatial.iter_mut().for_each(|x| *x = r.gen_range(0.0..1.0));
            let input = ModelInput::from_volume(&v);
            let n = 40;
            let tiles: Vec<(u32, u32)> = (0..n).map(|_| (r.gen_range(0..16), r.gen_range(0..16))).collect();
            let loc = LocationMatrix::from_tiles(16, 16, tiles);
            let feats: Vec<[f64; INSTANCE_FEATURES]> =
                (0..n).map(|_| std::array::from_fn(|_| r.gen_range(0.0..1.0))).collect();
            let head = HeadInput::new(&loc, input.padded().1, &feats).expect("head input");
            let labels = uniform_vec(&mut r, n, 0.0, 0.02);
            Sample::new("random", s, input, head, labels).expect("sample")
        })
        .collect()
}

type Pattern = (Vec<bool>, Vec<u32>);

fn gather(x: &Tensor, shape: [usize; 4], arg: &[u32]) -> Tensor {
    Tensor::from_vec(shape, arg.iter().map(|&i| x.data[i as usize]).collect())
}

fn apply_mask(t: &mut Tensor, mask: &[bool], at: &mut usize) {
    for v in &mut t.data {
        if !mask[*at] {
            *v = 0.0;
        }
        *at += 1;
    }
}

/// Forward pass with every ReLU state and pooling choice fixed to `pattern`:
/// the network restricted to one linear piece. Matches `Model::forward`
/// exactly at the parameters that produced `pattern`.
pub fn frozen_forward(model: &Model, input: &ModelInput, pattern: &Pattern) -> Tensor {
    let (mask, arg) = pattern;
    let (mut mi, mut ai) = (0, 0);
    let l = &model.layers;
    let pool = match model.config.variant {
        Variant::Temporal3d => [2, 2, 2],
        Variant::Flat2d => [1, 2, 2],
    };
    let mut e = match model.config.variant {
        Variant::Temporal3d => ops::stem_forward(
            &input.temporal,
            &input.spatial,
            &l[0].weight,
            &l[0].bias,
            l[0].cout,
            l[0].kernel,
        ),
        Variant::Flat2d => ops::conv_forward(&input.stacked(), &l[0].weight, Some(&l[0].bias), l[0].cout, l[0].kernel),
    };
    apply_mask(&mut e, mask, &mut mi);
    let mut enc = vec![e];
    for layer in &l[1..4] {
        let prev = enc.last().expect("level");
        let [c, d, h, w] = prev.shape;
        let shape = [c, d / pool[0], h / pool[1], w / pool[2]];
        let n: usize = shape.iter().product();
        let p = gather(prev, shape, &arg[ai..ai + n]);
        ai += n;
        let mut e = ops::conv_forward(&p, &layer.weight, Some(&layer.bias), layer.cout, layer.kernel);
        apply_mask(&mut e, mask, &mut mi);
        enc.push(e);
    }
    let sums: Vec<Tensor> = enc.iter().map(ops::temporal_sum_forward).collect();
    let mut y = sums[3].clone();
    for (j, layer) in l[4..].iter().enumerate() {
        let x = if j == 0 {
            y.clone()
        } else {
            ops::concat_forward(&ops::upsample_forward(&y), &sums[3 - j])
        };
        y = ops::conv_forward(&x, &layer.weight, Some(&layer.bias), layer.cout, layer.kernel);
        if j < 3 {
            apply_mask(&mut y, mask, &mut mi);
        }
    }
    assert_eq!((mi, ai), (mask.len(), arg.len()), "pattern fully consumed");
    y
}

fn frozen_loss(model: &Model, samples: &[Sample], patterns: &[Pattern], lambda: f64) -> f64 {
    let scale = model.norm.ir;
    let mut data = 0.0;
    for (s, p) in samples.iter().zip(patterns) {
        let map = CoefficientMap {
            beta: frozen_forward(model, &s.input, p),
            nx: s.input.nx,
            ny: s.input.ny,
        };
        let pred = predict_normalized(&map, &s.head).expect("prediction");
        let mse: f64 = pred
            .iter()
            .zip(&s.labels)
            .map(|(p, y)| (p - y / scale).powi(2))
            .sum::<f64>()
            / pred.len() as f64;
        data += mse / samples.len() as f64;
    }
    data + lambda * model.weight_norm_sq()
}

/// Loss gradient against central differences for every parameter.
pub fn end_to_end_check(variant: Variant, head_bias: bool, seed: u64) -> GradCheck {
    let config = tiny_config(variant, head_bias);
    let steps = config.steps();
    let norm = NormConstants::uniform(1.0, 5.0, 0.02);
    let mut model = Model::new(config, norm, seed).expect("model");
    let mut r = rng(seed + 100);
    for l in &mut model.layers {
        l.bias.iter_mut().for_each(|b| *b = r.gen_range(-0.1..0.1));
    }
    let samples = random_samples(2, steps, seed + 200);
    let lambda = 1e-3;
    let batch: Vec<&Sample> = samples.iter().collect();
    let lg = loss_and_grad(&model, &batch, lambda).expect("loss");
    let analytic = flatten_grads(&lg.grads);
    let patterns: Vec<Pattern> = samples
        .iter()
        .map(|s| model.forward_cached(&s.input).expect("forward").1.activation_pattern())
        .collect();

    let name = format!(
        "end-to-end loss ({}{})",
        variant.name(),
        if head_bias { ", head bias" } else { "" }
    );
    let frozen_at_start = frozen_loss(&model, &samples, &patterns, lambda);
    if rel_err(frozen_at_start, lg.loss) > 1e-12 {
        return GradCheck {
            name: format!("{name}: frozen pass disagrees with forward"),
            checked: 0,
            skipped: 0,
            max_rel: f64::INFINITY,
        };
    }
    let theta = flatten_params(&model);
    let mut probe = model.clone();
    fd_check(&name, &theta, &analytic, |v| {
        unflatten_params(&mut probe, v);
        (frozen_loss(&probe, &samples, &patterns, lambda), vec![])
    })
}

/// Every layer plus both variants end to end.
pub fn gradient_suite() -> Vec<GradCheck> {
    let mut out = layer_checks();
    out.push(end_to_end_check(Variant::Temporal3d, false, 11));
    out.push(end_to_end_check(Variant::Flat2d, false, 12));
    out.push(end_to_end_check(Variant::Temporal3d, true, 13));
    out
}
