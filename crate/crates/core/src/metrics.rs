// SPDX-License-Identifier: Apache-2.0

//! Error statistics and hotspot classification scores.
//!
//! A tile is hot when the mean IR drop of its instances exceeds the threshold
//! (8 mV by default). Tiles without instances are excluded from every count.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::features::LocationMatrix;

/// Default hotspot threshold, V.
pub const HOTSPOT_THRESHOLD: f64 = 8e-3;

/// Tiles per side of a coarse classification block (15 µm at 2.5 µm tiles).
pub const REGION_TILES: usize = 6;

/// Per-tile mean IR; `occupied[k]` is false for tiles without instances.
#[derive(Debug, Clone, PartialEq)]
pub struct TileMap {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
    pub occupied: Vec<bool>,
}

/// Mean IR per `block × block` group of tiles.
pub fn tileize_ir(location: &LocationMatrix, ir: &[f64], block: usize) -> Result<TileMap> {
    if ir.len() != location.len() {
        return Err(Error::Metrics(format!(
            "{} IR values for {} instances",
            ir.len(),
            location.len()
        )));
    }
    if block == 0 {
        return Err(Error::Metrics("block size must be positive".into()));
    }
    let nx = location.nx.div_ceil(block);
    let ny = location.ny.div_ceil(block);
    let mut sum = vec![0.0; nx * ny];
    let mut count = vec![0usize; nx * ny];
    for (i, &v) in ir.iter().enumerate() {
        let (x, y) = location.tile(i);
        let k = (y / block) * nx + x / block;
        sum[k] += v;
        count[k] += 1;
    }
    Ok(TileMap {
        nx,
        ny,
        values: sum
            .iter()
            .zip(&count)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect(),
        occupied: count.iter().map(|&c| c > 0).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            1.0
        } else {
            (self.tp + self.tn) as f64 / self.total() as f64
        }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// 1 when there is nothing to find and nothing was flagged.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Confusion counts over occupied tiles of the golden map.
pub fn classify_and_score(pred: &TileMap, golden: &TileMap, threshold: f64) -> Result<Confusion> {
    if (pred.nx, pred.ny) != (golden.nx, golden.ny) {
        return Err(Error::Metrics(format!(
            "map shapes differ: {}x{} vs {}x{}",
            pred.nx, pred.ny, golden.nx, golden.ny
        )));
    }
    let mut c = Confusion::default();
    for k in (0..golden.values.len()).filter(|&k| golden.occupied[k]) {
        match (pred.values[k] > threshold, golden.values[k] > threshold) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Predicted values and golden hot flags of the occupied tiles, for [`pr_auc`].
pub fn hotspot_scores(pred: &TileMap, golden: &TileMap, threshold: f64) -> (Vec<f64>, Vec<bool>) {
    (0..golden.values.len())
        .filter(|&k| golden.occupied[k])
        .map(|k| (pred.values[k], golden.values[k] > threshold))
        .unzip()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    /// `(recall, precision)` per distinct threshold, highest threshold first.
    pub points: Vec<(f64, f64)>,
    /// Area under the step-wise curve: `Σ (R_k − R_{k−1}) · P_k`, `R_0 = 0`.
    pub auc: f64,
    /// Positive fraction, the expected AUC of an uninformed classifier.
    pub baseline: f64,
}

/// Sweeps every distinct score as a threshold (`score ≥ s` is positive).
/// Tied scores enter together.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Result<PrCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Metrics(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Metrics("non-finite score".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::Metrics("PR curve needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut last_recall = 0.0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        auc += (recall - last_recall) * precision;
        last_recall = recall;
        points.push((recall, precision));
    }
    Ok(PrCurve {
        points,
        auc,
        baseline: positives as f64 / labels.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub rmse: f64,
    /// Mean absolute error.
    pub mae: f64,
    /// Largest absolute error.
    pub max_abs: f64,
}

pub fn rmse_mae(pred: &[f64], golden: &[f64]) -> Result<ErrorStats> {
    if pred.len() != golden.len() || pred.is_empty() {
        return Err(Error::Metrics(format!(
            "cannot compare {} predictions with {} labels",
            pred.len(),
            golden.len()
        )));
    }
    let n = pred.len() as f64;
    let (mut sq, mut abs, mut max_abs) = (0.0, 0.0, 0.0f64);
    for (p, g) in pred.iter().zip(golden) {
        let e = (p - g).abs();
        sq += e * e;
        abs += e;
        max_abs = max_abs.max(e);
    }
    Ok(ErrorStats {
        rmse: (sq / n).sqrt(),
        mae: abs / n,
        max_abs,
    })
}

/// Everything `eval` reports for one set of predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub errors: ErrorStats,
    pub threshold: f64,
    pub confusion_1x1: Confusion,
    pub confusion_6x6: Confusion,
    /// `None` when the golden map has no hot tile.
    pub pr_1x1: Option<PrCurve>,
    pub pr_6x6: Option<PrCurve>,
}

impl MetricReport {
    pub fn accuracy_1x1(&self) -> f64 {
        self.confusion_1x1.accuracy()
    }

    pub fn accuracy_6x6(&self) -> f64 {
        self.confusion_6x6.accuracy()
    }

    pub fn f1_6x6(&self) -> f64 {
        self.confusion_6x6.f1()
    }

    /// `key=value` lines, 4 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: f64| {
            let _ = writeln!(s, "{k}={}", sig4(v));
        };
        kv("rmse_volts", self.errors.rmse);
        kv("mean_abs_error_volts", self.errors.mae);
        kv("max_abs_error_volts", self.errors.max_abs);
        kv("threshold_volts", self.threshold);
        kv("accuracy_1x1", self.accuracy_1x1());
        kv("accuracy_6x6", self.accuracy_6x6());
        kv("f1_1x1", self.confusion_1x1.f1());
        kv("f1_6x6", self.f1_6x6());
        for (name, pr) in [("1x1", &self.pr_1x1), ("6x6", &self.pr_6x6)] {
            if let Some(pr) = pr {
                kv(&format!("pr_auc_{name}"), pr.auc);
                kv(&format!("pr_baseline_{name}"), pr.baseline);
            }
        }
        s
    }
}

/// Formats with 4 significant digits.
pub fn sig4(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if (-3..6).contains(&mag) {
        let decimals = (3 - mag).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.3e}")
    }
}

/// Full comparison of per-instance predictions against golden labels.
pub fn evaluate(location: &LocationMatrix, pred: &[f64], golden: &[f64], threshold: f64) -> Result<MetricReport> {
    let errors = rmse_mae(pred, golden)?;
    let mut confusions = [Confusion::default(); 2];
    let mut curves = [None, None];
    for (slot, block) in [1, REGION_TILES].into_iter().enumerate() {
        let p = tileize_ir(location, pred, block)?;
        let g = tileize_ir(location, golden, block)?;
        confusions[slot] = classify_and_score(&p, &g, threshold)?;
        let (scores, labels) = hotspot_scores(&p, &g, threshold);
        if labels.iter().any(|&l| l) {
            curves[slot] = Some(pr_auc(&scores, &labels)?);
        }
    }
    let [pr_1x1, pr_6x6] = curves;
    Ok(MetricReport {
        errors,
        threshold,
        confusion_1x1: confusions[0],
        confusion_6x6: confusions[1],
        pr_1x1,
        pr_6x6,
    })
}
