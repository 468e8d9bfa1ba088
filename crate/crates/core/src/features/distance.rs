// SPDX-License-Identifier: Apache-2.0

use super::FeatureConfig;
use crate::design::ViaStack;

/// Effective distance from `(x, y)` to the via stacks within the neighbourhood:
/// `r⁻¹ = Σ dᵢ⁻¹` over stacks with `dᵢ ≤ neighborhood`, each `dᵢ` clamped
/// below at `d_min`. With no stack in reach `r = R_MAX`.
pub fn effective_distance(x: f64, y: f64, vias: &[ViaStack], config: &FeatureConfig) -> f64 {
    let reach = config.neighborhood;
    let inv: f64 = vias
        .iter()
        .map(|v| (v.x - x).hypot(v.y - y))
        .filter(|&d| d <= reach)
        .map(|d| 1.0 / d.max(config.d_min))
        .sum();
    if inv > 0.0 {
        (1.0 / inv).min(config.r_max())
    } else {
        config.r_max()
    }
}
