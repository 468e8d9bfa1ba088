// SPDX-License-Identifier: Apache-2.0

//! Synthetic corpora and leave-one-out runs for the learning checks.

use irdrop::dataset::{design_samples, fit_constants, golden_labels, leave_one_out, planted_labels, DesignData};
use irdrop::features::{FeatureConfig, NormConstants, INSTANCE_FEATURES};
use irdrop::metrics::{hotspot_scores, pr_auc, rmse_mae, tileize_ir, HOTSPOT_THRESHOLD, REGION_TILES};
use irdrop::nn::{predict_sample, train, AdamConfig, Model, ModelConfig, Sample, TrainHyper, Variant};
use irdrop::pdn::{generate_design, PdnConfig, SynthSpec};
use irdrop::Window;

pub const DESIGNS: u64 = 4;
/// Three vectors of four slices each.
pub const SLICES: usize = 12;
pub const CYCLES: usize = 8;
pub const STEPS_PER_CYCLE: usize = 5;

/// Planted rule over the normalised feature vector.
pub const PLANTED_WEIGHTS: [f64; INSTANCE_FEATURES] = [0.3, 0.1, 0.2, 0.5, 0.4, 0.2, -0.3, 0.6];
pub const PLANTED_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy)]
pub enum Labels {
    Golden,
    Planted,
}

pub struct Corpus {
    pub data: Vec<DesignData>,
    pub norm: NormConstants,
    pub samples: Vec<Vec<Sample>>,
}

pub fn synth_spec(seed: u64, toggle_rate: f64, clustering: f64) -> SynthSpec {
    SynthSpec {
        name: format!("synth{seed}"),
        window: Window::new(CYCLES, STEPS_PER_CYCLE),
        toggle_rate,
        clustering,
        slices: SLICES,
        ..SynthSpec::default()
    }
}

pub fn build(seed: u64, toggle_rate: f64, clustering: f64, labels: Labels) -> Corpus {
    let fc = FeatureConfig::default();
    let data: Vec<DesignData> = (0..DESIGNS)
        .map(|d| {
            let design = generate_design(seed + d, &synth_spec(seed + d, toggle_rate, clustering)).expect("design");
            DesignData::new(design, fc).expect("features")
        })
        .collect();
    let refs: Vec<&DesignData> = data.iter().collect();
    let golden: Vec<Vec<Vec<f64>>> = data
        .iter()
        .map(|d| golden_labels(&d.design, &PdnConfig::default()).expect("golden"))
        .collect();
    let mut norm = fit_constants(&refs, &golden.iter().collect::<Vec<_>>(), &fc).expect("norm");
    let labels = match labels {
        Labels::Golden => golden,
        Labels::Planted => {
            let planted: Vec<_> = data
                .iter()
                .map(|d| planted_labels(d, &norm, &PLANTED_WEIGHTS, PLANTED_SCALE))
                .collect();
            norm = fit_constants(&refs, &planted.iter().collect::<Vec<_>>(), &fc).expect("norm");
            planted
        }
    };
    let samples = data
        .iter()
        .zip(&labels)
        .map(|(d, l)| design_samples(d, l, &norm).expect("samples"))
        .collect();
    Corpus { data, norm, samples }
}

pub fn model_config(variant: Variant, encoder: [usize; 4]) -> ModelConfig {
    ModelConfig {
        variant,
        cycles: CYCLES,
        steps_per_cycle: STEPS_PER_CYCLE,
        encoder,
        decoder: [16, 8, 8, INSTANCE_FEATURES + 1],
        head_bias: true,
    }
}

pub fn hyper(seed: u64) -> TrainHyper {
    TrainHyper {
        epochs: 200,
        lambda: 1e-6,
        adam: AdamConfig {
            lr: 1e-3,
            ..AdamConfig::default()
        },
        patience: 60,
        seed,
        augment: true,
        ..TrainHyper::default()
    }
}

/// Pooled held-out statistics over the folds that were run.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub rmse: f64,
    pub constant_rmse: f64,
    pub range: f64,
    pub auc_6x6: f64,
    pub baseline_6x6: f64,
    pub auc_1x1: f64,
    pub baseline_1x1: f64,
    pub max_epochs: usize,
}

impl Outcome {
    pub fn improvement(&self) -> f64 {
        1.0 - self.rmse / self.constant_rmse
    }
}

pub fn run_loo(corpus: &Corpus, config: &ModelConfig, folds: &[usize], seed: u64) -> Outcome {
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    let (mut s6, mut h6, mut s1, mut h1) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut max_epochs = 0;
    for &fold in folds {
        let split = leave_one_out(&corpus.samples, fold).expect("split");
        let mut model = Model::new(config.clone(), corpus.norm, seed).expect("model");
        let log = train(&mut model, &split.train, &split.val, &hyper(seed)).expect("train");
        max_epochs = max_epochs.max(log.epochs.len());
        let location = &corpus.data[fold].ctx.location;
        for s in &split.test {
            let p = predict_sample(&model, s).expect("predict");
            for (block, scores, hot) in [(REGION_TILES, &mut s6, &mut h6), (1, &mut s1, &mut h1)] {
                let pm = tileize_ir(location, &p, block).expect("tiles");
                let gm = tileize_ir(location, &s.labels, block).expect("tiles");
                let (a, b) = hotspot_scores(&pm, &gm, HOTSPOT_THRESHOLD);
                scores.extend(a);
                hot.extend(b);
            }
            pred.extend(p);
            gold.extend_from_slice(&s.labels);
        }
    }
    let mean = gold.iter().sum::<f64>() / gold.len() as f64;
    let lo = gold.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gold.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let auc = |s: &[f64], h: &[bool]| {
        if h.iter().any(|&x| x) {
            let c = pr_auc(s, h).expect("pr");
            (c.auc, c.baseline)
        } else {
            (f64::NAN, 0.0)
        }
    };
    let (auc_6x6, baseline_6x6) = auc(&s6, &h6);
    let (auc_1x1, baseline_1x1) = auc(&s1, &h1);
    Outcome {
        rmse: rmse_mae(&pred, &gold).expect("rmse").rmse,
        constant_rmse: rmse_mae(&vec![mean; gold.len()], &gold).expect("rmse").rmse,
        range: hi - lo,
        auc_6x6,
        baseline_6x6,
        auc_1x1,
        baseline_1x1,
        max_epochs,
    }
}
