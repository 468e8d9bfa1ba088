// SPDX-License-Identifier: Apache-2.0

//! Worst-case slice profiling of a long vector.
//!
//! Stage 1 keeps the `N_a` slices of highest average power, stage 2 keeps the
//! `N_r` strongest per region, the survivors are scored by the network, and
//! a greedy pass picks up to `N_o` slices that together cover the most regions.

mod rank;
mod score;
mod stages;

pub use rank::{rank_with_coverage, Coverage, Pick, Ranking, ScoreTable};
pub use score::{region_max, score_candidates, IrPredictor, ModelPredictor, Scored, VolumeCache};
pub use stages::{stage1_filter, stage2_filter, stage2_from_table, top_n, Candidate, Stage1Stats, Stage2};

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::design::{DesignBundle, SliceTrace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilerParams {
    pub n_a: usize,
    pub n_r: usize,
    pub n_o: usize,
    /// Region edge, µm.
    pub region_size: f64,
    /// Divisor of the toggle count in the slice-power estimate.
    pub cycle_divisor: f64,
    pub coverage: Coverage,
    /// Prepared inputs kept between scoring calls.
    pub cache_capacity: usize,
}

impl Default for ProfilerParams {
    fn default() -> Self {
        Self {
            n_a: 200,
            n_r: 5,
            n_o: 3,
            region_size: 15.0,
            cycle_divisor: 20.0,
            coverage: Coverage::AttainedMax,
            cache_capacity: 16,
        }
    }
}

impl ProfilerParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_a == 0 || self.n_r == 0 || self.n_o == 0 {
            return Err(Error::Profiler("N_a, N_r and N_o must be positive".into()));
        }
        if self.n_r > self.n_a {
            return Err(Error::Profiler(format!(
                "N_r = {} exceeds N_a = {}",
                self.n_r, self.n_a
            )));
        }
        let tile = crate::TILE_SIZE;
        let k = self.region_size / tile;
        if !(self.region_size > 0.0) || (k - k.round()).abs() > 1e-9 {
            return Err(Error::Profiler(format!(
                "region size {} is not a multiple of the {tile} µm tile",
                self.region_size
            )));
        }
        if !(self.cycle_divisor > 0.0) {
            return Err(Error::Profiler("cycle divisor must be positive".into()));
        }
        Ok(())
    }
}

/// Square regions over the chip, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionGrid {
    pub nx: usize,
    pub ny: usize,
    pub size: f64,
}

impl RegionGrid {
    pub fn new(design: &DesignBundle, size: f64) -> Self {
        let count = |e: f64| ((e / size - 1e-9).ceil() as usize).max(1);
        Self {
            nx: count(design.width),
            ny: count(design.length),
            size,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn region_of(&self, x: f64, y: f64) -> usize {
        let bin = |v: f64, n: usize| ((v / self.size).floor().max(0.0) as usize).min(n - 1);
        bin(y, self.ny) * self.nx + bin(x, self.nx)
    }

    /// `(region_x, region_y)` of a row-major index.
    pub fn coords(&self, region: usize) -> (usize, usize) {
        (region % self.nx, region / self.nx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileReport {
    pub slices: usize,
    pub stage1_kept: usize,
    pub stage1_evaluations: usize,
    /// `N_c`, candidates after stage 2.
    pub candidates: usize,
    pub timings: StageTimings,
    pub covered_regions: usize,
    pub uncovered_regions: usize,
    pub failures: Vec<(usize, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimings {
    pub stage1: Duration,
    pub stage2: Duration,
    pub scoring: Duration,
    pub ranking: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub grid: RegionGrid,
    pub ranking: Ranking,
    /// Per-instance predicted IR of each picked slice, V.
    pub instance_ir: Vec<Vec<f64>>,
    pub report: ProfileReport,
}

impl Recommendation {
    /// `rank,slice_id,region_x,region_y,score_mV`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rank,slice_id,region_x,region_y,score_mV\n");
        for (k, p) in self.ranking.picks.iter().enumerate() {
            let (rx, ry) = self.grid.coords(p.region);
            let _ = writeln!(s, "{},{},{rx},{ry},{}", k + 1, p.slice_id, p.score * 1e3);
        }
        s
    }

    /// Worst predicted drop over the picked slices, V.
    pub fn worst_case(&self) -> Option<f64> {
        self.ranking.picks.first().map(|p| p.score)
    }
}

impl ProfileReport {
    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "slices={}", self.slices);
        let _ = writeln!(s, "stage1_kept={}", self.stage1_kept);
        let _ = writeln!(s, "stage1_evaluations={}", self.stage1_evaluations);
        let _ = writeln!(s, "candidates={}", self.candidates);
        let _ = writeln!(s, "covered_regions={}", self.covered_regions);
        let _ = writeln!(s, "uncovered_regions={}", self.uncovered_regions);
        for (name, d) in [
            ("stage1", self.timings.stage1),
            ("stage2", self.timings.stage2),
            ("scoring", self.timings.scoring),
            ("ranking", self.timings.ranking),
        ] {
            let _ = writeln!(s, "time_{name}_s={:.6}", d.as_secs_f64());
        }
        for (id, msg) in &self.failures {
            let _ = writeln!(s, "failed_slice_{id}={msg}");
        }
        s
    }
}

/// Stage 1, stage 2, scoring and ranking in sequence.
pub fn profile_vector(
    design: &DesignBundle,
    slices: &[SliceTrace],
    predictor: &dyn IrPredictor,
    params: &ProfilerParams,
) -> Result<Recommendation> {
    params.validate()?;
    let grid = RegionGrid::new(design, params.region_size);

    let t = Instant::now();
    let (stage1, stats) = stage1_filter(design, slices, params);
    let stage1_time = t.elapsed();

    let t = Instant::now();
    let stage2 = stage2_filter(design, slices, &stage1, params);
    let stage2_time = t.elapsed();

    let t = Instant::now();
    let scored = score_candidates(design, &grid, slices, &stage2.slice_ids, predictor)?;
    let scoring_time = t.elapsed();

    let t = Instant::now();
    let ranking = rank_with_coverage(&scored.table, params.n_o, params.coverage)?;
    let ranking_time = t.elapsed();

    let instance_ir = ranking
        .picks
        .iter()
        .map(|p| {
            let row = scored
                .table
                .slice_ids
                .iter()
                .position(|&id| id == p.slice_id)
                .expect("picked row");
            scored.instance_ir[row].clone()
        })
        .collect();
    let covered = ranking.covered.iter().filter(|&&c| c).count();
    let report = ProfileReport {
        slices: slices.len(),
        stage1_kept: stage1.len(),
        stage1_evaluations: stats.evaluations,
        candidates: stage2.slice_ids.len(),
        timings: StageTimings {
            stage1: stage1_time,
            stage2: stage2_time,
            scoring: scoring_time,
            ranking: ranking_time,
        },
        covered_regions: covered,
        uncovered_regions: grid.len() - covered,
        failures: scored.failures,
    };
    Ok(Recommendation {
        grid,
        ranking,
        instance_ir,
        report,
    })
}
