// SPDX-License-Identifier: Apache-2.0

//! Brute-force references for the solver and the profiler.

#![allow(clippy::needless_range_loop, clippy::type_complexity)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use irdrop::profiler::{Coverage, Pick, RegionGrid, ScoreTable};
use irdrop::{DesignBundle, SliceTrace};

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty");
        a.swap(col, p);
        b.swap(col, p);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Connected random graph: a random spanning tree plus extra edges, and one
/// to three pads. Returns `(nodes, edges, pads)`.
pub fn random_grid(rng: &mut ChaCha8Rng, max_nodes: usize) -> (usize, Vec<(usize, usize, f64)>, Vec<(usize, f64)>) {
    let n = rng.gen_range(2..=max_nodes);
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.gen_range(0..i), i, rng.gen_range(0.2..5.0)));
    }
    for _ in 0..n / 2 {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            edges.push((a, b, rng.gen_range(0.2..5.0)));
        }
    }
    let pads = (0..rng.gen_range(1..=3))
        .map(|_| (rng.gen_range(0..n), rng.gen_range(0.5..5.0)))
        .collect();
    (n, edges, pads)
}

/// Slice power from its definition, summed over the instances `keep` accepts.
pub fn slice_power_where(design: &DesignBundle, trace: &SliceTrace, divisor: f64, keep: impl Fn(usize) -> bool) -> f64 {
    let mut toggles = vec![0usize; design.instances().len()];
    for &(i, _) in trace.entries() {
        toggles[i as usize] += 1;
    }
    design
        .instances()
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .map(|(i, r)| r.p_leakage + toggles[i] as f64 / divisor * (r.p_switching + r.p_internal))
        .sum()
}

/// Sort everything, keep the first `n`: value desc, id asc.
pub fn exhaustive_top(mut rows: Vec<(usize, f64)>, n: usize) -> Vec<usize> {
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    rows.into_iter().take(n).map(|r| r.0).collect()
}

/// Stage 1 and stage 2 by full sorts.
pub fn exhaustive_stages(
    design: &DesignBundle,
    slices: &[SliceTrace],
    grid: &RegionGrid,
    divisor: f64,
    n_a: usize,
    n_r: usize,
) -> (Vec<usize>, Vec<usize>) {
    let all: Vec<(usize, f64)> = slices
        .iter()
        .map(|s| (s.slice_id, slice_power_where(design, s, divisor, |_| true)))
        .collect();
    let stage1 = exhaustive_top(all, n_a);
    let region_of: Vec<usize> = design.instances().iter().map(|r| grid.region_of(r.x, r.y)).collect();
    let mut union = Vec::new();
    for region in 0..grid.len() {
        let rows: Vec<(usize, f64)> = stage1
            .iter()
            .map(|&id| {
                let s = slices.iter().find(|s| s.slice_id == id).expect("slice");
                (id, slice_power_where(design, s, divisor, |i| region_of[i] == region))
            })
            .collect();
        union.extend(exhaustive_top(rows, n_r));
    }
    union.sort_unstable();
    union.dedup();
    (stage1, union)
}

/// Greedy selection by exhaustive search each round: among all eligible
/// `(slice, region)` pairs take the best by score desc, slice id asc, region asc.
pub fn greedy_oracle(table: &ScoreTable, n_o: usize, coverage: Coverage) -> Vec<Pick> {
    let col_max = table.column_max();
    let mut covered = vec![false; table.regions];
    let mut chosen = vec![false; table.rows.len()];
    let mut picks = Vec::new();
    while picks.len() < n_o {
        let mut best: Option<(usize, usize)> = None;
        for c in 0..table.rows.len() {
            for r in 0..table.regions {
                if chosen[c] || covered[r] {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bc, br)) => {
                        let (s, bs) = (table.rows[c][r], table.rows[bc][br]);
                        s > bs
                            || (s == bs && table.slice_ids[c] < table.slice_ids[bc])
                            || (s == bs && table.slice_ids[c] == table.slice_ids[bc] && r < br)
                    }
                };
                if better {
                    best = Some((c, r));
                }
            }
        }
        let Some((c, r)) = best else { break };
        chosen[c] = true;
        covered[r] = true;
        if coverage == Coverage::AttainedMax {
            for k in 0..table.regions {
                if table.rows[c][k] == col_max[k] {
                    covered[k] = true;
                }
            }
        }
        picks.push(Pick {
            slice_id: table.slice_ids[c],
            region: r,
            score: table.rows[c][r],
        });
    }
    picks
}

/// The four-region, five-slice worked example, in volts. Region `k` is R(k+1).
pub fn worked_example() -> ScoreTable {
    let mv = |v: [f64; 4]| v.iter().map(|x| x * 1e-3).collect::<Vec<_>>();
    ScoreTable::new(
        4,
        vec![1, 2, 3, 4, 5],
        vec![
            mv([12.0, 6.0, 5.0, 4.0]),
            mv([7.0, 5.0, 6.0, 3.0]),
            mv([10.0, 8.0, 11.0, 9.0]),
            mv([18.0, 11.0, 7.0, 8.0]),
            mv([9.0, 4.0, 8.0, 5.0]),
        ],
    )
    .expect("table")
}

/// Random score table with deliberate ties.
pub fn random_table(rng: &mut ChaCha8Rng, max_slices: usize, max_regions: usize) -> ScoreTable {
    let slices = rng.gen_range(1..=max_slices);
    let regions = rng.gen_range(1..=max_regions);
    let mut ids: Vec<usize> = (0..slices * 2).collect();
    rand::seq::SliceRandom::shuffle(ids.as_mut_slice(), rng);
    ids.truncate(slices);
    let rows = (0..slices)
        .map(|_| {
            (0..regions)
                .map(|_| f64::from(rng.gen_range(0..12u32)) * 1e-3)
                .collect()
        })
        .collect();
    ScoreTable::new(regions, ids, rows).expect("table")
}
