// SPDX-License-Identifier: Apache-2.0

//! Layer kernels and their exact backward passes.
//!
//! Convolutions are stride 1 with zero "same" padding and odd kernels. The
//! input is copied into a zero-padded buffer; every kernel tap is then a flat
//! offset into that buffer, so each tap reduces to one contiguous axpy over
//! the span between the first and last interior positions. Border positions in
//! the span produce garbage that is never read back, and the backward pass
//! zeroes them in the padded output gradient.

use super::tensor::Tensor;

/// Kernel extent `(depth, height, width)`.
pub type Kernel = [usize; 3];

struct PadGeom {
    pad: [usize; 3],
    dims: [usize; 3],
    padded: [usize; 3],
    vol: usize,
    lo: usize,
    span: usize,
}

impl PadGeom {
    fn new(shape: [usize; 4], k: Kernel) -> Self {
        let pad = [k[0] / 2, k[1] / 2, k[2] / 2];
        let dims = [shape[1], shape[2], shape[3]];
        let padded = [dims[0] + 2 * pad[0], dims[1] + 2 * pad[1], dims[2] + 2 * pad[2]];
        let flat = |d: usize, h: usize, w: usize| (d * padded[1] + h) * padded[2] + w;
        let lo = flat(pad[0], pad[1], pad[2]);
        let hi = flat(pad[0] + dims[0] - 1, pad[1] + dims[1] - 1, pad[2] + dims[2] - 1) + 1;
        Self {
            pad,
            dims,
            padded,
            vol: padded.iter().product(),
            lo,
            span: hi - lo,
        }
    }

    fn offsets(&self, k: Kernel) -> Vec<isize> {
        let (hp, wp) = (self.padded[1] as isize, self.padded[2] as isize);
        let mut out = Vec::with_capacity(k.iter().product());
        for kd in 0..k[0] {
            for kh in 0..k[1] {
                for kw in 0..k[2] {
                    let dd = kd as isize - self.pad[0] as isize;
                    let dh = kh as isize - self.pad[1] as isize;
                    let dw = kw as isize - self.pad[2] as isize;
                    out.push((dd * hp + dh) * wp + dw);
                }
            }
        }
        out
    }

    /// Padded flat index of interior position `(d, h, w)` relative to `lo`.
    fn interior(&self, d: usize, h: usize, w: usize) -> usize {
        ((d + self.pad[0]) * self.padded[1] + h + self.pad[1]) * self.padded[2] + w + self.pad[2] - self.lo
    }

    fn pad_input(&self, x: &Tensor) -> Vec<f64> {
        let c = x.shape[0];
        let mut out = vec![0.0; c * self.vol];
        let [d, h, w] = self.dims;
        for ci in 0..c {
            for dd in 0..d {
                for hh in 0..h {
                    let src = x.index(ci, dd, hh, 0);
                    let dst = ci * self.vol + self.lo + self.interior(dd, hh, 0);
                    out[dst..dst + w].copy_from_slice(&x.data[src..src + w]);
                }
            }
        }
        out
    }

    /// Copies the interior of a `channels × span` buffer into a tensor.
    fn gather_span(&self, buf: &[f64], channels: usize) -> Tensor {
        let [d, h, w] = self.dims;
        let mut out = Tensor::zeros([channels, d, h, w]);
        for c in 0..channels {
            for dd in 0..d {
                for hh in 0..h {
                    let src = c * self.span + self.interior(dd, hh, 0);
                    let dst = out.index(c, dd, hh, 0);
                    out.data[dst..dst + w].copy_from_slice(&buf[src..src + w]);
                }
            }
        }
        out
    }

    /// Scatters a tensor into a zeroed `channels × span` buffer.
    fn scatter_span(&self, t: &Tensor) -> Vec<f64> {
        let [d, h, w] = self.dims;
        let c = t.shape[0];
        let mut buf = vec![0.0; c * self.span];
        for ci in 0..c {
            for dd in 0..d {
                for hh in 0..h {
                    let dst = ci * self.span + self.interior(dd, hh, 0);
                    let src = t.index(ci, dd, hh, 0);
                    buf[dst..dst + w].copy_from_slice(&t.data[src..src + w]);
                }
            }
        }
        buf
    }
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += a * x;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four partial sums; fixed order keeps results bitwise reproducible.
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in ca.by_ref().zip(cb.by_ref()) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Weight layout `[cout][cin][kd][kh][kw]`.
pub fn conv_forward(x: &Tensor, weight: &[f64], bias: Option<&[f64]>, cout: usize, k: Kernel) -> Tensor {
    let cin = x.shape[0];
    let taps = k.iter().product::<usize>();
    assert_eq!(weight.len(), cout * cin * taps, "conv weight size");
    let g = PadGeom::new(x.shape, k);
    let xp = g.pad_input(x);
    let offs = g.offsets(k);
    let mut yp = vec![0.0; cout * g.span];
    for co in 0..cout {
        let yrow = &mut yp[co * g.span..(co + 1) * g.span];
        for ci in 0..cin {
            let wbase = (co * cin + ci) * taps;
            let xbase = ci * g.vol + g.lo;
            for (t, &off) in offs.iter().enumerate() {
                let wv = weight[wbase + t];
                if wv == 0.0 {
                    continue;
                }
                let start = (xbase as isize + off) as usize;
                axpy(yrow, wv, &xp[start..start + g.span]);
            }
        }
    }
    let mut y = g.gather_span(&yp, cout);
    if let Some(b) = bias {
        let v = y.volume();
        for (co, chunk) in y.data.chunks_mut(v).enumerate() {
            chunk.iter_mut().for_each(|e| *e += b[co]);
        }
    }
    y
}

/// Gradients of a convolution: `(dx, dweight, dbias)`. `dx` only when asked.
pub fn conv_backward(
    x: &Tensor,
    weight: &[f64],
    cout: usize,
    k: Kernel,
    gy: &Tensor,
    need_dx: bool,
) -> (Option<Tensor>, Vec<f64>, Vec<f64>) {
    let cin = x.shape[0];
    let taps = k.iter().product::<usize>();
    let g = PadGeom::new(x.shape, k);
    let xp = g.pad_input(x);
    let offs = g.offsets(k);
    let gyp = g.scatter_span(gy);
    let gb: Vec<f64> = (0..cout).map(|co| gy.channel(co).iter().sum()).collect();
    let mut gw = vec![0.0; weight.len()];
    let mut gxp = if need_dx { vec![0.0; cin * g.vol] } else { Vec::new() };
    for co in 0..cout {
        let grow = &gyp[co * g.span..(co + 1) * g.span];
        for ci in 0..cin {
            let wbase = (co * cin + ci) * taps;
            let xbase = ci * g.vol + g.lo;
            for (t, &off) in offs.iter().enumerate() {
                let start = (xbase as isize + off) as usize;
                gw[wbase + t] = dot(grow, &xp[start..start + g.span]);
                if need_dx {
                    axpy(&mut gxp[start..start + g.span], weight[wbase + t], grow);
                }
            }
        }
    }
    let dx = need_dx.then(|| {
        let [d, h, w] = g.dims;
        let mut out = Tensor::zeros([cin, d, h, w]);
        for ci in 0..cin {
            for dd in 0..d {
                for hh in 0..h {
                    let src = ci * g.vol + g.lo + g.interior(dd, hh, 0);
                    let dst = out.index(ci, dd, hh, 0);
                    out.data[dst..dst + w].copy_from_slice(&gxp[src..src + w]);
                }
            }
        }
        out
    });
    (dx, gw, gb)
}

/// First 3D layer over a temporal volume plus spatial maps broadcast along depth.
///
/// Equivalent to `conv_forward` on the `(1 + S)`-channel input whose channels
/// `1..` repeat `spatial` at every depth, but the spatial part is computed as
/// one 2D convolution per depth tap: a constant-in-depth input contributes the
/// same plane at every depth except where a tap falls into the zero padding.
pub fn stem_forward(
    temporal: &Tensor,
    spatial: &Tensor,
    weight: &[f64],
    bias: &[f64],
    cout: usize,
    k: Kernel,
) -> Tensor {
    let s = spatial.shape[0];
    let (w_t, w_s) = split_stem_weights(weight, cout, s, k);
    let mut y = conv_forward(temporal, &w_t, Some(bias), cout, k);
    let k2 = [1, k[1], k[2]];
    let depth = temporal.shape[1];
    let plane = y.shape[2] * y.shape[3];
    for (kd, ws) in w_s.iter().enumerate() {
        let a = conv_forward(spatial, ws, None, cout, k2);
        for co in 0..cout {
            let src = a.channel(co);
            for d in depth_targets(kd, k[0], depth) {
                let base = y.index(co, d, 0, 0);
                axpy(&mut y.data[base..base + plane], 1.0, src);
            }
        }
    }
    y
}

/// Weight and bias gradients of [`stem_forward`].
pub fn stem_backward(
    temporal: &Tensor,
    spatial: &Tensor,
    weight: &[f64],
    cout: usize,
    k: Kernel,
    gy: &Tensor,
) -> (Vec<f64>, Vec<f64>) {
    let s = spatial.shape[0];
    let (w_t, w_s) = split_stem_weights(weight, cout, s, k);
    let (_, gw_t, gb) = conv_backward(temporal, &w_t, cout, k, gy, false);
    let k2 = [1, k[1], k[2]];
    let plane_taps = k[1] * k[2];
    let taps = k[0] * plane_taps;
    let depth = temporal.shape[1];
    let (h, w) = (gy.shape[2], gy.shape[3]);
    let plane = h * w;
    let mut gw = vec![0.0; weight.len()];
    for co in 0..cout {
        let dst = co * (1 + s) * taps;
        gw[dst..dst + taps].copy_from_slice(&gw_t[co * taps..(co + 1) * taps]);
    }
    for (kd, ws) in w_s.iter().enumerate() {
        let mut g2 = Tensor::zeros([cout, 1, h, w]);
        for co in 0..cout {
            let dst = &mut g2.data[co * plane..(co + 1) * plane];
            for d in depth_targets(kd, k[0], depth) {
                let base = gy.index(co, d, 0, 0);
                axpy(dst, 1.0, &gy.data[base..base + plane]);
            }
        }
        let (_, gws, _) = conv_backward(spatial, ws, cout, k2, &g2, false);
        for co in 0..cout {
            for ci in 0..s {
                let src = (co * s + ci) * plane_taps;
                let dst = (co * (1 + s) + 1 + ci) * taps + kd * plane_taps;
                gw[dst..dst + plane_taps].copy_from_slice(&gws[src..src + plane_taps]);
            }
        }
    }
    (gw, gb)
}

/// Output depths that read a valid (non-padding) input plane through depth tap `kd`.
fn depth_targets(kd: usize, kdepth: usize, depth: usize) -> impl Iterator<Item = usize> {
    let pad = kdepth / 2;
    (0..depth).filter(move |&d| {
        let src = d as isize + kd as isize - pad as isize;
        src >= 0 && (src as usize) < depth
    })
}

/// Splits `[cout][1 + S][kd][kh][kw]` into the temporal `[cout][1][kd][kh][kw]`
/// part and, per depth tap, the spatial `[cout][S][1][kh][kw]` part.
fn split_stem_weights(weight: &[f64], cout: usize, s: usize, k: Kernel) -> (Vec<f64>, Vec<Vec<f64>>) {
    let plane_taps = k[1] * k[2];
    let taps = k[0] * plane_taps;
    assert_eq!(weight.len(), cout * (1 + s) * taps, "stem weight size");
    let mut w_t = Vec::with_capacity(cout * taps);
    let mut w_s = vec![Vec::with_capacity(cout * s * plane_taps); k[0]];
    for co in 0..cout {
        let base = co * (1 + s) * taps;
        w_t.extend_from_slice(&weight[base..base + taps]);
        for ci in 0..s {
            for (kd, ws) in w_s.iter_mut().enumerate() {
                let src = base + (1 + ci) * taps + kd * plane_taps;
                ws.extend_from_slice(&weight[src..src + plane_taps]);
            }
        }
    }
    (w_t, w_s)
}

/// Non-overlapping max pooling, window = stride = `k`, trailing remainder dropped.
/// Returns the output and, per output element, the flat input index of its maximum
/// (first occurrence on ties).
pub fn maxpool_forward(x: &Tensor, k: Kernel) -> (Tensor, Vec<u32>) {
    let [c, d, h, w] = x.shape;
    let (od, oh, ow) = (d / k[0], h / k[1], w / k[2]);
    let mut y = Tensor::zeros([c, od, oh, ow]);
    let mut arg = vec![0u32; y.data.len()];
    let mut o = 0;
    for ci in 0..c {
        for zd in 0..od {
            for zh in 0..oh {
                for zw in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_i = 0;
                    for a in 0..k[0] {
                        for b in 0..k[1] {
                            for e in 0..k[2] {
                                let i = x.index(ci, zd * k[0] + a, zh * k[1] + b, zw * k[2] + e);
                                if x.data[i] > best {
                                    best = x.data[i];
                                    best_i = i;
                                }
                            }
                        }
                    }
                    y.data[o] = best;
                    arg[o] = best_i as u32;
                    o += 1;
                }
            }
        }
    }
    (y, arg)
}

/// Routes each output gradient to its argmax input; everything else gets zero.
pub fn maxpool_backward(input_shape: [usize; 4], argmax: &[u32], gy: &Tensor) -> Tensor {
    let mut gx = Tensor::zeros(input_shape);
    for (&i, &g) in argmax.iter().zip(&gy.data) {
        gx.data[i as usize] += g;
    }
    gx
}

/// Sums over the depth axis: `(C, D, H, W) → (C, 1, H, W)`.
pub fn temporal_sum_forward(x: &Tensor) -> Tensor {
    let [c, d, h, w] = x.shape;
    let plane = h * w;
    let mut y = Tensor::zeros([c, 1, h, w]);
    for ci in 0..c {
        let dst = &mut y.data[ci * plane..(ci + 1) * plane];
        for dd in 0..d {
            let base = x.index(ci, dd, 0, 0);
            axpy(dst, 1.0, &x.data[base..base + plane]);
        }
    }
    y
}

pub fn temporal_sum_backward(depth: usize, gy: &Tensor) -> Tensor {
    let [c, _, h, w] = gy.shape;
    let plane = h * w;
    let mut gx = Tensor::zeros([c, depth, h, w]);
    for ci in 0..c {
        let src = gy.channel(ci);
        for dd in 0..depth {
            let base = gx.index(ci, dd, 0, 0);
            gx.data[base..base + plane].copy_from_slice(src);
        }
    }
    gx
}

/// Nearest-neighbour ×2 upsampling of height and width.
pub fn upsample_forward(x: &Tensor) -> Tensor {
    let [c, d, h, w] = x.shape;
    let mut y = Tensor::zeros([c, d, 2 * h, 2 * w]);
    for ci in 0..c {
        for dd in 0..d {
            for hh in 0..2 * h {
                for ww in 0..2 * w {
                    let i = y.index(ci, dd, hh, ww);
                    y.data[i] = x.at(ci, dd, hh / 2, ww / 2);
                }
            }
        }
    }
    y
}

pub fn upsample_backward(gy: &Tensor) -> Tensor {
    let [c, d, h2, w2] = gy.shape;
    let mut gx = Tensor::zeros([c, d, h2 / 2, w2 / 2]);
    for ci in 0..c {
        for dd in 0..d {
            for hh in 0..h2 {
                for ww in 0..w2 {
                    let i = gx.index(ci, dd, hh / 2, ww / 2);
                    gx.data[i] += gy.at(ci, dd, hh, ww);
                }
            }
        }
    }
    gx
}

/// Channel concatenation `[a; b]`.
pub fn concat_forward(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.shape[1..], b.shape[1..], "concat spatial shapes");
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Tensor::from_vec([a.shape[0] + b.shape[0], a.shape[1], a.shape[2], a.shape[3]], data)
}

pub fn concat_backward(first_channels: usize, gy: &Tensor) -> (Tensor, Tensor) {
    let v = gy.volume();
    let [c, d, h, w] = gy.shape;
    let (ga, gb) = gy.data.split_at(first_channels * v);
    (
        Tensor::from_vec([first_channels, d, h, w], ga.to_vec()),
        Tensor::from_vec([c - first_channels, d, h, w], gb.to_vec()),
    )
}

pub fn relu_inplace(x: &mut Tensor) {
    x.data.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Masks `g` where the (post-activation) output is not positive.
pub fn relu_backward_inplace(output: &Tensor, g: &mut Tensor) {
    for (g, &y) in g.data.iter_mut().zip(&output.data) {
        if y <= 0.0 {
            *g = 0.0;
        }
    }
}
