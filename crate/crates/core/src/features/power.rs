// SPDX-License-Identifier: Apache-2.0

use super::DesignContext;
use crate::design::InstanceRecord;

/// `p_r = p_l + τ(p_s + p_i)`.
pub fn toggle_rate_scaled_power(inst: &InstanceRecord, tau: f64) -> f64 {
    inst.p_leakage + tau * inst.dynamic_power()
}

/// `p_t(j) = p_l + b_j(p_i + p_s)` for `j` in `0..steps`.
pub fn temporal_power(inst: &InstanceRecord, toggles: impl IntoIterator<Item = u32>, steps: usize) -> Vec<f64> {
    let mut p = vec![inst.p_leakage; steps];
    let on = inst.p_leakage + inst.dynamic_power();
    for s in toggles {
        p[s as usize] = on;
    }
    p
}

/// `p_ol` for every instance: the sum of `p_r` over other instances in the same
/// or an adjacent tile that toggle at a common time step.
pub fn overlap_power(ctx: &DesignContext, toggles: &[Vec<u32>], p_r: &[f64], steps: usize) -> Vec<f64> {
    let words = steps.div_ceil(64);
    let mut bits = vec![0u64; toggles.len() * words];
    for (i, t) in toggles.iter().enumerate() {
        for &s in t {
            bits[i * words + s as usize / 64] |= 1 << (s % 64);
        }
    }
    let row = |i: usize| &bits[i * words..(i + 1) * words];
    let mut out = vec![0.0; toggles.len()];
    for (i, out_i) in out.iter_mut().enumerate() {
        if toggles[i].is_empty() {
            continue;
        }
        let (ix, iy) = ctx.location.tile(i);
        let mine = row(i);
        *out_i = ctx
            .neighbourhood(ix, iy)
            .map(|j| j as usize)
            .filter(|&j| j != i && row(j).iter().zip(mine).any(|(a, b)| a & b != 0))
            .map(|j| p_r[j])
            .sum();
    }
    out
}
