// SPDX-License-Identifier: Apache-2.0

//! Glue between designs, labels and training samples.

use crate::design::{DesignBundle, SliceTrace};
use crate::error::{Error, Result};
use crate::features::{
    extract, instance_feature_vector, normalize, DesignContext, FeatureConfig, NormConstants, SliceFeatures,
    INSTANCE_FEATURES,
};
use crate::nn::{HeadInput, ModelInput, Sample};
use crate::pdn::{golden_dynamic_ir, GridModel, PdnConfig};

/// Normalised per-instance feature vectors of one slice.
pub fn feature_vectors(
    design: &DesignBundle,
    features: &SliceFeatures,
    norm: &NormConstants,
) -> Vec<[f64; INSTANCE_FEATURES]> {
    design
        .instances()
        .iter()
        .zip(&features.instances)
        .map(|(rec, f)| instance_feature_vector(rec, f, norm))
        .collect()
}

/// Network and head inputs from already extracted features.
pub fn inputs_from_features(
    design: &DesignBundle,
    ctx: &DesignContext,
    features: &SliceFeatures,
    norm: &NormConstants,
) -> Result<(ModelInput, HeadInput)> {
    let input = ModelInput::from_volume(&normalize(&features.volume, norm)?);
    let stride = input.padded().1;
    let head = HeadInput::new(&ctx.location, stride, &feature_vectors(design, features, norm))?;
    Ok((input, head))
}

/// Featurises one slice into network and head inputs.
pub fn prepare_slice(
    design: &DesignBundle,
    ctx: &DesignContext,
    trace: &SliceTrace,
    norm: &NormConstants,
) -> Result<(ModelInput, HeadInput)> {
    inputs_from_features(design, ctx, &extract(design, ctx, trace)?, norm)
}

/// One design with its extracted slice features.
#[derive(Debug, Clone)]
pub struct DesignData {
    pub design: DesignBundle,
    pub ctx: DesignContext,
    pub features: Vec<SliceFeatures>,
}

impl DesignData {
    pub fn new(design: DesignBundle, config: FeatureConfig) -> Result<Self> {
        let ctx = DesignContext::new(&design, config)?;
        let features = design
            .slices()
            .iter()
            .map(|s| extract(&design, &ctx, s))
            .collect::<Result<_>>()?;
        Ok(Self { design, ctx, features })
    }
}

/// Golden worst-case IR per slice from the resistive grid.
pub fn golden_labels(design: &DesignBundle, pdn: &PdnConfig) -> Result<Vec<Vec<f64>>> {
    let grid = GridModel::build(design, pdn)?;
    design
        .slices()
        .iter()
        .map(|s| Ok(golden_dynamic_ir(&grid, design, s, false)?.worst))
        .collect()
}

/// Labels from a fixed linear rule over the normalised feature vector:
/// `IR_i = scale · w*·f_i`.
pub fn planted_labels(
    data: &DesignData,
    norm: &NormConstants,
    weights: &[f64; INSTANCE_FEATURES],
    scale: f64,
) -> Vec<Vec<f64>> {
    data.features
        .iter()
        .map(|f| {
            feature_vectors(&data.design, f, norm)
                .iter()
                .map(|v| scale * v.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>())
                .collect()
        })
        .collect()
}

/// Normalisation constants from a set of designs and their labels.
pub fn fit_constants(data: &[&DesignData], labels: &[&Vec<Vec<f64>>], config: &FeatureConfig) -> Result<NormConstants> {
    let slices = data
        .iter()
        .flat_map(|d| d.features.iter().map(move |f| (d.design.instances(), f)));
    let labels = labels.iter().flat_map(|l| l.iter().map(Vec::as_slice));
    NormConstants::fit(slices, labels, config.r_max())
}

/// Training samples of one design, one per slice.
pub fn design_samples(data: &DesignData, labels: &[Vec<f64>], norm: &NormConstants) -> Result<Vec<Sample>> {
    if labels.len() != data.features.len() {
        return Err(Error::Model(format!(
            "{} label sets for {} slices of {}",
            labels.len(),
            data.features.len(),
            data.design.name
        )));
    }
    data.features
        .iter()
        .zip(labels)
        .map(|(f, y)| {
            let (input, head) = inputs_from_features(&data.design, &data.ctx, f, norm)?;
            Sample::new(data.design.name.clone(), f.slice_id, input, head, y.clone())
        })
        .collect()
}

/// Leave-one-design-out split over per-design sample lists.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<Sample>,
    /// One slice (the last) of every training design.
    pub val: Vec<Sample>,
    /// Every slice of the held-out design.
    pub test: Vec<Sample>,
}

pub fn leave_one_out(per_design: &[Vec<Sample>], held_out: usize) -> Result<Split> {
    if per_design.len() < 2 {
        return Err(Error::Model("leave-one-out needs at least two designs".into()));
    }
    if held_out >= per_design.len() {
        return Err(Error::Model(format!("no design {held_out} to hold out")));
    }
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: per_design[held_out].clone(),
    };
    for (_, samples) in per_design.iter().enumerate().filter(|(d, _)| *d != held_out) {
        match samples.split_last() {
            Some((last, rest)) if !rest.is_empty() => {
                split.train.extend_from_slice(rest);
                split.val.push(last.clone());
            }
            _ => split.train.extend_from_slice(samples),
        }
    }
    Ok(split)
}
