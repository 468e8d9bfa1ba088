// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, flatten_grads, flatten_params, unflatten_params, AdamConfig, AdamState};
use super::augment::{symmetry_count, transform};
use super::head::{head_backward, predict_normalized, HeadInput};
use super::model::{Gradients, Model, ModelInput};
use crate::error::{Error, Result};

/// One training example: a slice's model input, its instances and golden labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub design: String,
    pub slice_id: usize,
    pub input: ModelInput,
    pub head: HeadInput,
    /// Golden IR per instance, V.
    pub labels: Vec<f64>,
}

impl Sample {
    pub fn new(
        design: impl Into<String>,
        slice_id: usize,
        input: ModelInput,
        head: HeadInput,
        labels: Vec<f64>,
    ) -> Result<Self> {
        if labels.len() != head.len() {
            return Err(Error::Model(format!(
                "{} labels for {} instances",
                labels.len(),
                head.len()
            )));
        }
        Ok(Self {
            design: design.into(),
            slice_id,
            input,
            head,
            labels,
        })
    }
}

/// Loss of a batch and its parameter gradient.
#[derive(Debug, Clone)]
pub struct LossGrad {
    /// Data term plus regulariser, normalised units.
    pub loss: f64,
    /// Mean over samples of the per-instance MSE, normalised units.
    pub data_loss: f64,
    pub grads: Gradients,
    /// Sum of squared errors in V², and the instance count, for RMSE bookkeeping.
    pub sse_volts: f64,
    pub count: usize,
}

/// Mean over samples of the per-instance squared error of the normalised
/// prediction, plus `lambda · Σ w²` over convolution weights.
pub fn loss_and_grad(model: &Model, batch: &[&Sample], lambda: f64) -> Result<LossGrad> {
    if batch.is_empty() {
        return Err(Error::Model("empty batch".into()));
    }
    let scale = model.norm.ir;
    let inv_b = 1.0 / batch.len() as f64;
    let mut grads = Gradients::zeros_like(model);
    let mut data_loss = 0.0;
    let mut sse_volts = 0.0;
    let mut count = 0;
    for sample in batch {
        let (map, cache) = model.forward_cached(&sample.input)?;
        let pred = predict_normalized(&map, &sample.head)?;
        let n = pred.len().max(1) as f64;
        let mut g_pred = Vec::with_capacity(pred.len());
        let mut mse = 0.0;
        for (&p, &y) in pred.iter().zip(&sample.labels) {
            let e = p - y / scale;
            mse += e * e;
            g_pred.push(2.0 * e / n * inv_b);
        }
        data_loss += mse / n * inv_b;
        sse_volts += mse * scale * scale;
        count += pred.len();
        let g_beta = head_backward(map.beta.shape, &sample.head, &g_pred);
        let g = model.backward(&cache, &g_beta);
        grads.add_scaled(&g, 1.0);
    }
    if lambda != 0.0 {
        for (g, l) in grads.layers.iter_mut().zip(&model.layers) {
            g.weight
                .iter_mut()
                .zip(&l.weight)
                .for_each(|(g, w)| *g += 2.0 * lambda * w);
        }
    }
    let loss = data_loss + lambda * model.weight_norm_sq();
    Ok(LossGrad {
        loss,
        data_loss,
        grads,
        sse_volts,
        count,
    })
}

/// Per-instance predictions in volts.
pub fn predict_sample(model: &Model, sample: &Sample) -> Result<Vec<f64>> {
    let map = model.forward(&sample.input)?;
    super::head::predict_ir(&map, &sample.head, model.norm.ir)
}

/// Pooled per-instance RMSE over samples, V.
pub fn rmse(model: &Model, samples: &[Sample]) -> Result<f64> {
    let mut sse = 0.0;
    let mut n = 0;
    for s in samples {
        let pred = predict_sample(model, s)?;
        sse += pred.iter().zip(&s.labels).map(|(p, y)| (p - y) * (p - y)).sum::<f64>();
        n += pred.len();
    }
    Ok(if n == 0 { 0.0 } else { (sse / n as f64).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda: f64,
    pub adam: AdamConfig,
    /// Epochs without validation improvement before stopping. `0` disables.
    pub patience: usize,
    pub seed: u64,
    /// Draw a random mirror or transpose of each training sample per step.
    pub augment: bool,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 1,
            lambda: 1e-4,
            adam: AdamConfig::default(),
            patience: 20,
            seed: 0,
            augment: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// RMSE over the epoch's training forward passes, V.
    pub train_rmse: f64,
    /// RMSE on the validation set after the epoch, V.
    pub val_rmse: f64,
    /// Mean batch loss over the epoch.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept (1-based, 0 if no epoch ran).
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_rmse,val_rmse,loss\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{:e},{:e},{:e}", e.epoch, e.train_rmse, e.val_rmse, e.loss);
        }
        s
    }
}

/// Trains in place with shuffled minibatches and ADAM. Keeps the weights of
/// the best validation epoch (training RMSE when `val` is empty).
pub fn train(model: &mut Model, train: &[Sample], val: &[Sample], hyper: &TrainHyper) -> Result<TrainLog> {
    train_with(model, train, val, hyper, |_| {})
}

/// As [`train`], calling `on_epoch` after every epoch.
pub fn train_with(
    model: &mut Model,
    train: &[Sample],
    val: &[Sample],
    hyper: &TrainHyper,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainLog> {
    if train.is_empty() {
        return Err(Error::Model("no training samples".into()));
    }
    if hyper.batch_size == 0 {
        return Err(Error::Model("batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut params = flatten_params(model);
    let mut state = AdamState::new(params.len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainLog::default();
    let mut best = (f64::INFINITY, params.clone());
    let mut since_best = 0;

    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        let mut sse = 0.0;
        let mut count = 0;
        for chunk in order.chunks(hyper.batch_size) {
            let augmented: Vec<Sample>;
            let batch: Vec<&Sample> = if hyper.augment {
                augmented = chunk
                    .iter()
                    .map(|&i| {
                        let k = rng.gen_range(0..symmetry_count(&train[i]));
                        transform(&train[i], k)
                    })
                    .collect();
                augmented.iter().collect()
            } else {
                chunk.iter().map(|&i| &train[i]).collect()
            };
            let lg = loss_and_grad(model, &batch, hyper.lambda).map_err(|e| Error::Diverged {
                epoch,
                message: e.to_string(),
            })?;
            if !lg.loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    message: format!("loss is {}", lg.loss),
                });
            }
            loss_sum += lg.loss;
            batches += 1;
            sse += lg.sse_volts;
            count += lg.count;
            adam_step(&mut params, &flatten_grads(&lg.grads), &mut state, &hyper.adam);
            unflatten_params(model, &params);
        }
        let train_rmse = (sse / count.max(1) as f64).sqrt();
        let val_rmse = if val.is_empty() { train_rmse } else { rmse(model, val)? };
        if !val_rmse.is_finite() {
            return Err(Error::Diverged {
                epoch,
                message: format!("validation RMSE is {val_rmse}"),
            });
        }
        let rec = EpochRecord {
            epoch,
            train_rmse,
            val_rmse,
            loss: loss_sum / batches as f64,
        };
        on_epoch(&rec);
        log.epochs.push(rec);
        if val_rmse < best.0 {
            best = (val_rmse, params.clone());
            log.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if hyper.patience > 0 && since_best >= hyper.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    if log.best_epoch > 0 {
        unflatten_params(model, &best.1);
    }
    Ok(log)
}
