// SPDX-License-Identifier: Apache-2.0

//! Randomised property sweeps. Each returns the violations it found.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use irdrop::features::{
    effective_distance, extract, instance_feature_vector, normalize, DesignContext, FeatureConfig, NormConstants,
};
use irdrop::pdn::{generate_design, golden_dynamic_ir, GridModel, PdnConfig, SynthSpec};
use irdrop::profiler::{rank_with_coverage, stage1_filter, stage2_filter, Coverage, ProfilerParams, RegionGrid};
use irdrop::{DesignBundle, SliceTrace, ViaStack, Window};

use super::oracles::{dense_solve, exhaustive_stages, greedy_oracle, random_grid, random_table};
use super::{rel_err, rng};

/// Largest relative discrepancy between two vectors, normwise.
pub fn vec_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Small random synthetic design on a chip of at most `max_side` µm.
pub fn random_design(rng: &mut ChaCha8Rng, max_side: usize, slices: usize) -> DesignBundle {
    let tiles = max_side / 5;
    let side = |rng: &mut ChaCha8Rng| 5.0 * rng.gen_range(2..=tiles) as f64;
    let (width, length) = (side(rng), side(rng));
    let spec = SynthSpec {
        name: "rand".into(),
        width,
        length,
        instances: rng.gen_range(20..300),
        vias: rng.gen_range(1..12),
        window: Window::new(rng.gen_range(2..6), rng.gen_range(1..6)),
        toggle_rate: rng.gen_range(0.0..0.2),
        clustering: rng.gen_range(0.0..1.0),
        placement_clusters: rng.gen_range(0..4),
        slices,
        ..SynthSpec::default()
    };
    generate_design(rng.gen(), &spec).expect("design")
}

/// CG against dense elimination on random graphs.
pub fn solver_vs_dense(grids: usize, seed: u64) -> (Vec<String>, f64) {
    let mut rng = rng(seed);
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for g in 0..grids {
        let (n, edges, pads) = random_grid(&mut rng, 200);
        let grid = GridModel::from_graph(n, &edges, &pads).expect("grid");
        let currents: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    rng.gen_range(0.0..1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let cg = grid.solve_dc(&currents).expect("cg").x;
        let dense = dense_solve(grid.matrix().to_dense(), currents);
        let e = vec_rel(&cg, &dense);
        worst = worst.max(e);
        if e > 1e-9 {
            bad.push(format!("grid {g} ({n} nodes): relative error {e:e}"));
        }
    }
    (bad, worst)
}

/// Scaling every power scales every golden drop.
pub fn golden_linearity(designs: usize, seed: u64) -> (Vec<String>, f64) {
    let mut rng = rng(seed);
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for d in 0..designs {
        let design = random_design(&mut rng, 30, 1);
        let alpha = rng.gen_range(0.1..3.0);
        let scaled = design.scaled_powers(alpha);
        let pdn = PdnConfig::default();
        let base = golden_dynamic_ir(
            &GridModel::build(&design, &pdn).expect("grid"),
            &design,
            &design.slices()[0],
            false,
        )
        .expect("golden")
        .worst;
        let s = golden_dynamic_ir(
            &GridModel::build(&scaled, &pdn).expect("grid"),
            &scaled,
            &scaled.slices()[0],
            false,
        )
        .expect("golden")
        .worst;
        let expect: Vec<f64> = base.iter().map(|v| alpha * v).collect();
        let e = vec_rel(&s, &expect);
        worst = worst.max(e);
        if e > 1e-9 {
            bad.push(format!("design {d}, alpha {alpha}: relative error {e:e}"));
        }
    }
    (bad, worst)
}

/// Adding current never lowers a drop: on random graphs node by node, and in
/// golden labels when one toggle is added to a slice.
pub fn golden_monotonicity(cases: usize, seed: u64) -> Vec<String> {
    let mut rng = rng(seed);
    let mut bad = Vec::new();
    for c in 0..cases {
        let (n, edges, pads) = random_grid(&mut rng, 200);
        let grid = GridModel::from_graph(n, &edges, &pads).expect("grid");
        let base: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut more = base.clone();
        more[rng.gen_range(0..n)] += rng.gen_range(0.01..1.0);
        let a = grid.solve_dc(&base).expect("cg").x;
        let b = grid.solve_dc(&more).expect("cg").x;
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(k) = (0..n).find(|&k| b[k] < a[k] - 1e-9 * scale) {
            bad.push(format!("graph {c}: node {k} fell from {} to {}", a[k], b[k]));
        }
    }
    for c in 0..cases {
        let design = random_design(&mut rng, 30, 1);
        let trace = &design.slices()[0];
        let steps = design.window.steps() as u32;
        let inst = rng.gen_range(0..design.instances().len()) as u32;
        let step = rng.gen_range(0..steps);
        if trace.entries().contains(&(inst, step)) {
            continue;
        }
        let mut entries = trace.entries().to_vec();
        entries.push((inst, step));
        let added = SliceTrace::new(trace.slice_id, entries);
        let grid = GridModel::build(&design, &PdnConfig::default()).expect("grid");
        let a = golden_dynamic_ir(&grid, &design, trace, false).expect("golden").worst;
        let b = golden_dynamic_ir(&grid, &design, &added, false).expect("golden").worst;
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(k) = (0..a.len()).find(|&k| b[k] < a[k] - 1e-9 * scale) {
            bad.push(format!("design {c}: instance {k} fell from {} to {}", a[k], b[k]));
        }
        if b[inst as usize] < a[inst as usize] {
            bad.push(format!("design {c}: the toggling instance itself fell"));
        }
    }
    bad
}

/// Conservation, range, temporal identity, determinism and distance
/// monotonicity over random designs.
pub fn feature_invariants(designs: usize, seed: u64) -> Vec<String> {
    let mut rng = rng(seed);
    let mut bad = Vec::new();
    let config = FeatureConfig::default();
    for d in 0..designs {
        let design = random_design(&mut rng, 40, 2);
        let ctx = DesignContext::new(&design, config).expect("context");
        let steps = design.window.steps();
        let all: Vec<_> = design
            .slices()
            .iter()
            .map(|s| extract(&design, &ctx, s).expect("extract"))
            .collect();
        let norm = NormConstants::fit(
            all.iter().map(|f| (design.instances(), f)),
            std::iter::empty::<&[f64]>(),
            config.r_max(),
        )
        .expect("fit");
        for (trace, f) in design.slices().iter().zip(&all) {
            let tag = format!("design {d} slice {}", trace.slice_id);
            let plane = f.volume.plane();
            // Conservation for the six summed power channels and every step.
            let inst_sums: [f64; 6] = {
                let mut s = [0.0; 6];
                for (rec, fi) in design.instances().iter().zip(&f.instances) {
                    for (k, v) in [
                        rec.p_internal,
                        rec.p_leakage,
                        rec.p_switching,
                        fi.p_r,
                        fi.p_ol,
                        fi.p_tot,
                    ]
                    .into_iter()
                    .enumerate()
                    {
                        s[k] += v;
                    }
                }
                s
            };
            for (k, want) in inst_sums.iter().enumerate() {
                let got: f64 = f.volume.spatial[k * plane..(k + 1) * plane].iter().sum();
                if rel_err(got, *want) > 1e-9 {
                    bad.push(format!("{tag}: spatial channel {k} sums to {got}, instances to {want}"));
                }
            }
            for j in 0..steps {
                let want: f64 = f.instances.iter().map(|fi| fi.p_t[j]).sum();
                let got: f64 = f.volume.temporal[j * plane..(j + 1) * plane].iter().sum();
                if rel_err(got, want) > 1e-9 {
                    bad.push(format!("{tag}: step {j} map sums to {got}, instances to {want}"));
                }
            }
            // Temporal-sum identity per instance.
            let mut toggles = vec![0usize; design.instances().len()];
            for &(i, _) in trace.entries() {
                toggles[i as usize] += 1;
            }
            for (i, (rec, fi)) in design.instances().iter().zip(&f.instances).enumerate() {
                let got: f64 = fi.p_t.iter().sum();
                let want = steps as f64 * rec.p_leakage + toggles[i] as f64 * (rec.p_internal + rec.p_switching);
                if rel_err(got, want) > 1e-12 {
                    bad.push(format!("{tag}: instance {i} temporal sum {got}, expected {want}"));
                    break;
                }
            }
            // Normalised range.
            let n = normalize(&f.volume, &norm).expect("normalize");
            if n.values().any(|v| !(0.0..=1.0).contains(&v)) {
                bad.push(format!("{tag}: normalised volume leaves [0, 1]"));
            }
            for (rec, fi) in design.instances().iter().zip(&f.instances) {
                if instance_feature_vector(rec, fi, &norm)
                    .iter()
                    .any(|v| !(0.0..=1.0).contains(v))
                {
                    bad.push(format!("{tag}: instance vector leaves [0, 1]"));
                    break;
                }
            }
            // Determinism.
            if extract(&design, &ctx, trace).expect("extract") != *f {
                bad.push(format!("{tag}: second extraction differs"));
            }
        }
        // Adding a via within reach never increases the effective distance.
        for _ in 0..20 {
            let x = rng.gen_range(0.0..design.width);
            let y = rng.gen_range(0.0..design.length);
            let before = effective_distance(x, y, design.vias(), &config);
            let (dist, angle) = (
                rng.gen_range(0.0..config.neighborhood),
                rng.gen_range(0.0..std::f64::consts::TAU),
            );
            let mut vias = design.vias().to_vec();
            vias.push(ViaStack {
                x: x + dist * angle.cos(),
                y: y + dist * angle.sin(),
            });
            vias.shuffle(&mut rng);
            let after = effective_distance(x, y, &vias, &config);
            if after > before {
                bad.push(format!(
                    "design {d}: via at distance {dist} raised r from {before} to {after}"
                ));
            }
        }
    }
    bad
}

/// Stage filters against full sorts and the ranking against the greedy
/// oracle, on random instances.
pub fn profiler_exactness(cases: usize, seed: u64) -> Vec<String> {
    let mut rng = rng(seed);
    let mut bad = Vec::new();
    for c in 0..cases {
        // At most 4 × 4 regions of 15 µm.
        let slices = rng.gen_range(1..=50);
        let mut design = random_design(&mut rng, 60, slices);
        if rng.gen_bool(0.2) {
            // Quiet slices force ties on the leakage sum.
            let mut traces = design.slices().to_vec();
            for t in traces.iter_mut().filter(|_| rng.gen_bool(0.5)) {
                *t = SliceTrace::quiet(t.slice_id);
            }
            design = design.with_slices(traces).expect("slices");
        }
        let params = ProfilerParams {
            n_a: rng.gen_range(1..=slices + 2),
            n_r: 1,
            ..ProfilerParams::default()
        };
        let params = ProfilerParams {
            n_r: rng.gen_range(1..=params.n_a),
            ..params
        };
        let grid = RegionGrid::new(&design, params.region_size);
        if grid.len() > 16 {
            bad.push(format!("case {c}: {} regions", grid.len()));
        }
        let (s1, stats) = stage1_filter(&design, design.slices(), &params);
        let s2 = stage2_filter(&design, design.slices(), &s1, &params);
        let (want1, want2) = exhaustive_stages(
            &design,
            design.slices(),
            &grid,
            params.cycle_divisor,
            params.n_a,
            params.n_r,
        );
        let got1: Vec<usize> = s1.iter().map(|c| c.slice_id).collect();
        if got1 != want1 {
            bad.push(format!("case {c}: stage 1 kept {got1:?}, full sort {want1:?}"));
        }
        if s2.slice_ids != want2 {
            bad.push(format!(
                "case {c}: stage 2 kept {:?}, full sort {want2:?}",
                s2.slice_ids
            ));
        }
        if stats.evaluations != slices {
            bad.push(format!(
                "case {c}: {} evaluations for {slices} slices",
                stats.evaluations
            ));
        }
    }
    for c in 0..cases {
        let table = random_table(&mut rng, 50, 16);
        let n_o = *[1, 2, 3, 5, usize::MAX].choose(&mut rng).expect("choice");
        for coverage in [Coverage::AttainedMax, Coverage::WonOnly] {
            let got = rank_with_coverage(&table, n_o, coverage).expect("rank").picks;
            let want = greedy_oracle(&table, n_o, coverage);
            if got != want {
                bad.push(format!(
                    "table {c} ({coverage:?}, N_o {n_o}): ranking {got:?}, oracle {want:?}"
                ));
            }
        }
    }
    bad
}
