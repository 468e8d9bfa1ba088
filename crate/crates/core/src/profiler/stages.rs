// SPDX-License-Identifier: Apache-2.0

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{ProfilerParams, RegionGrid};
use crate::design::{DesignBundle, SliceTrace};

/// `(value, id)` ordered so that the heap top is the entry to evict first:
/// smallest value, and among equal values the largest id.
#[derive(Debug, Clone, Copy)]
struct Ranked {
    value: f64,
    id: usize,
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed on value so BinaryHeap (a max-heap) surfaces the weakest entry.
        other.value.total_cmp(&self.value).then(self.id.cmp(&other.id))
    }
}

/// Ids of the `n` largest values, ties to the lower id, ordered value desc then id asc.
pub fn top_n(values: impl IntoIterator<Item = (usize, f64)>, n: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let mut heap = BinaryHeap::with_capacity(n + 1);
    for (id, value) in values {
        heap.push(Ranked { value, id });
        if heap.len() > n {
            heap.pop();
        }
    }
    let mut kept = heap.into_vec();
    kept.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.id.cmp(&b.id)));
    kept.into_iter().map(|r| r.id).collect()
}

/// Per-instance weight `p_s + p_i` and the constant leakage total.
pub(crate) struct PowerModel {
    dynamic: Vec<f64>,
    leakage_total: f64,
    leakage: Vec<f64>,
    region: Vec<u32>,
    regions: usize,
    divisor: f64,
}

impl PowerModel {
    pub fn new(design: &DesignBundle, grid: &RegionGrid, divisor: f64) -> Self {
        let insts = design.instances();
        Self {
            dynamic: insts.iter().map(|i| i.p_switching + i.p_internal).collect(),
            leakage_total: insts.iter().map(|i| i.p_leakage).sum(),
            leakage: insts.iter().map(|i| i.p_leakage).collect(),
            region: insts.iter().map(|i| grid.region_of(i.x, i.y) as u32).collect(),
            regions: grid.len(),
            divisor,
        }
    }

    /// `Σ_i [p_l + T_c/divisor · (p_s + p_i)]`; touches only toggling instances.
    pub fn slice_power(&self, trace: &SliceTrace) -> f64 {
        let dynamic: f64 = trace
            .counts()
            .map(|(i, c)| c as f64 / self.divisor * self.dynamic[i])
            .sum();
        self.leakage_total + dynamic
    }

    /// The same sum restricted to each region.
    pub fn regional_power(&self, trace: &SliceTrace) -> Vec<f64> {
        let mut out = vec![0.0; self.regions];
        for (l, &r) in self.leakage.iter().zip(&self.region) {
            out[r as usize] += l;
        }
        for (i, c) in trace.counts() {
            out[self.region[i] as usize] += c as f64 / self.divisor * self.dynamic[i];
        }
        out
    }
}

/// A slice surviving the first stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub slice_id: usize,
    /// Average slice power, W.
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Stage1Stats {
    /// Number of slice-power evaluations performed.
    pub evaluations: usize,
}

/// Keeps the `N_a` slices of highest average power.
pub fn stage1_filter(
    design: &DesignBundle,
    slices: &[SliceTrace],
    params: &ProfilerParams,
) -> (Vec<Candidate>, Stage1Stats) {
    let grid = RegionGrid::new(design, params.region_size);
    let model = PowerModel::new(design, &grid, params.cycle_divisor);
    stage1_with(&model, slices, params.n_a)
}

pub(crate) fn stage1_with(model: &PowerModel, slices: &[SliceTrace], n_a: usize) -> (Vec<Candidate>, Stage1Stats) {
    let mut stats = Stage1Stats::default();
    let powers: Vec<(usize, f64)> = slices
        .iter()
        .map(|s| {
            stats.evaluations += 1;
            (s.slice_id, model.slice_power(s))
        })
        .collect();
    let lookup: std::collections::HashMap<usize, f64> = powers.iter().copied().collect();
    let kept = top_n(powers, n_a)
        .into_iter()
        .map(|id| Candidate {
            slice_id: id,
            power: lookup[&id],
        })
        .collect();
    (kept, stats)
}

/// Result of the regional filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage2 {
    /// Union of the regional winners, ascending slice id.
    pub slice_ids: Vec<usize>,
    /// Per region, the kept slice ids in rank order.
    pub per_region: Vec<Vec<usize>>,
}

/// Keeps, per region, the `N_r` stage-1 candidates of highest regional power.
pub fn stage2_filter(
    design: &DesignBundle,
    slices: &[SliceTrace],
    candidates: &[Candidate],
    params: &ProfilerParams,
) -> Stage2 {
    let grid = RegionGrid::new(design, params.region_size);
    let model = PowerModel::new(design, &grid, params.cycle_divisor);
    let rows: Vec<(usize, Vec<f64>)> = candidates
        .iter()
        .map(|c| {
            let trace = slices
                .iter()
                .find(|s| s.slice_id == c.slice_id)
                .expect("candidate slice present");
            (c.slice_id, model.regional_power(trace))
        })
        .collect();
    stage2_from_table(&rows, grid.len(), params.n_r)
}

/// Regional filter over a precomputed `(slice_id, per-region power)` table.
pub fn stage2_from_table(rows: &[(usize, Vec<f64>)], regions: usize, n_r: usize) -> Stage2 {
    let per_region: Vec<Vec<usize>> = (0..regions)
        .map(|r| top_n(rows.iter().map(|(id, p)| (*id, p[r])), n_r))
        .collect();
    let mut slice_ids: Vec<usize> = per_region.iter().flatten().copied().collect();
    slice_ids.sort_unstable();
    slice_ids.dedup();
    Stage2 { slice_ids, per_region }
}
