// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use irdrop::dataset::{design_samples, fit_constants, golden_labels, planted_labels, prepare_slice, DesignData};
use irdrop::features::{extract as extract_slice, DesignContext, FeatureConfig, INSTANCE_FEATURES};
use irdrop::io::{
    read_ir_csv, read_weights, write_cached_volume, write_design, write_heatmap, write_ir_csv, write_slices,
    write_weights, Heatmap,
};
use irdrop::metrics::{
    classify_and_score, hotspot_scores, pr_auc, rmse_mae, tileize_ir, Confusion, MetricReport, PrCurve,
    HOTSPOT_THRESHOLD, REGION_TILES,
};
use irdrop::nn::{predict_ir, train as fit, AdamConfig, Model, ModelConfig, Sample, TrainHyper, Variant};
use irdrop::pdn::{generate_design, PdnConfig, SynthSpec};
use irdrop::profiler::{profile_vector, Coverage, ModelPredictor, ProfilerParams};
use irdrop::{DesignBundle, Window};

use crate::config::{manifest, need, Resolved};
use crate::corpus::{self, create_dir, label_dir, read_per_slice, slice_file, write};
use crate::{CliError, EvalArgs, ExtractArgs, GenArgs, GoldenArgs, InferArgs, PlotArgs, ProfileArgs, TrainArgs};

type Out = Result<(), CliError>;

/// Rule used by `golden --planted`, over the normalised feature vector.
pub const PLANTED_WEIGHTS: [f64; INSTANCE_FEATURES] = [0.3, 0.1, 0.2, 0.5, 0.4, 0.2, -0.3, 0.6];
/// Volts per unit of the planted rule.
pub const PLANTED_SCALE: f64 = 0.01;

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn gen(r: Resolved<GenArgs>) -> Out {
    let a = &r.args;
    let out = need(&a.out, "out")?;
    let d = SynthSpec::default();
    let window = Window::new(
        a.cycles.unwrap_or(d.window.cycles),
        a.steps_per_cycle.unwrap_or(d.window.steps_per_cycle),
    );
    let seed = a.seed.unwrap_or(0);
    let designs: Vec<DesignBundle> = (0..a.designs.unwrap_or(4) as u64)
        .map(|k| {
            let spec = SynthSpec {
                name: format!("synth{k}"),
                width: a.width.unwrap_or(d.width),
                length: a.length.unwrap_or(d.length),
                instances: a.instances.unwrap_or(d.instances),
                vias: a.vias.unwrap_or(d.vias),
                window,
                toggle_rate: a.toggle_rate.unwrap_or(d.toggle_rate),
                clustering: a.clustering.unwrap_or(d.clustering),
                slices: a.slices.unwrap_or(d.slices),
                ..SynthSpec::default()
            };
            generate_design(seed + k, &spec)
        })
        .collect::<Result<_, _>>()?;
    create_dir(out)?;
    for design in &designs {
        let stem = out.join(&design.name);
        write_design(design, stem.with_extension("design"))?;
        write_slices(design, design.slices(), stem.with_extension("slice"))?;
    }
    write(&out.join("manifest.txt"), &manifest("gen", &r.table, Some(seed)))?;
    println!("wrote {} designs to {}", designs.len(), out.display());
    Ok(())
}

pub fn golden(r: Resolved<GoldenArgs>) -> Out {
    let a = &r.args;
    let dir = need(&a.corpus, "corpus")?;
    let designs = corpus::load(dir)?;
    let labels: Vec<Vec<Vec<f64>>> = if a.planted.unwrap_or(false) {
        let fc = FeatureConfig::default();
        let data: Vec<DesignData> = designs
            .iter()
            .map(|d| DesignData::new(d.clone(), fc))
            .collect::<Result<_, _>>()?;
        let none: Vec<Vec<Vec<f64>>> = vec![Vec::new(); data.len()];
        let norm = fit_constants(&data.iter().collect::<Vec<_>>(), &none.iter().collect::<Vec<_>>(), &fc)?;
        data.iter()
            .map(|d| planted_labels(d, &norm, &PLANTED_WEIGHTS, PLANTED_SCALE))
            .collect()
    } else {
        let pdn = PdnConfig::default();
        designs
            .iter()
            .map(|d| golden_labels(d, &pdn))
            .collect::<Result<_, _>>()?
    };
    let root = label_dir(dir);
    for (design, per_slice) in designs.iter().zip(&labels) {
        create_dir(&root.join(&design.name))?;
        for (trace, ir) in design.slices().iter().zip(per_slice) {
            write_ir_csv(design, ir, slice_file(&root, &design.name, trace.slice_id))?;
        }
    }
    write(&root.join("manifest.txt"), &manifest("golden", &r.table, None))?;
    println!("labelled {} slices", labels.iter().map(Vec::len).sum::<usize>());
    Ok(())
}

pub fn extract(r: Resolved<ExtractArgs>) -> Out {
    let a = &r.args;
    let dir = need(&a.corpus, "corpus")?;
    let out = need(&a.out, "out")?;
    let designs = corpus::load(dir)?;
    let fc = FeatureConfig::default();
    let mut extracted = Vec::new();
    for design in &designs {
        let ctx = DesignContext::new(design, fc)?;
        let per_slice = design
            .slices()
            .iter()
            .map(|s| extract_slice(design, &ctx, s))
            .collect::<Result<Vec<_>, _>>()?;
        extracted.push(per_slice);
    }
    for (design, per_slice) in designs.iter().zip(&extracted) {
        let root = out.join(&design.name);
        for f in per_slice {
            let key = format!("slice_{}", f.slice_id);
            write_cached_volume(&root, &key, &f.volume)?;
            let mut csv = String::from("instance_id,r_um,tau,p_r_W,p_tot_W,p_ol_W,peak_p_t_W\n");
            for (rec, i) in design.instances().iter().zip(&f.instances) {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{}",
                    rec.id,
                    i.r,
                    i.tau,
                    i.p_r,
                    i.p_tot,
                    i.p_ol,
                    i.peak_power()
                );
            }
            write(&root.join(&key).join("instances.csv"), &csv)?;
        }
    }
    write(&out.join("manifest.txt"), &manifest("extract", &r.table, None))?;
    println!("extracted {} slices", extracted.iter().map(Vec::len).sum::<usize>());
    Ok(())
}

fn common_window(designs: &[DesignBundle]) -> Result<Window, CliError> {
    let w = designs[0].window;
    if designs.iter().any(|d| d.window != w) {
        return Err(CliError::new("designs in the corpus use different windows"));
    }
    Ok(w)
}

pub fn train(r: Resolved<TrainArgs>) -> Out {
    let a = &r.args;
    let dir = need(&a.corpus, "corpus")?;
    let out = need(&a.out, "out")?;
    let designs: Vec<DesignBundle> = corpus::load(dir)?
        .into_iter()
        .filter(|d| Some(&d.name) != a.held_out.as_ref())
        .collect();
    if designs.is_empty() {
        return Err(CliError::new("no training designs left"));
    }
    let window = common_window(&designs)?;
    let labels: Vec<Vec<Vec<f64>>> = designs
        .iter()
        .map(|d| read_per_slice(&label_dir(dir), d))
        .collect::<Result<_, _>>()?;
    let fc = FeatureConfig::default();
    let data: Vec<DesignData> = designs
        .into_iter()
        .map(|d| DesignData::new(d, fc))
        .collect::<Result<_, _>>()?;
    let norm = fit_constants(
        &data.iter().collect::<Vec<_>>(),
        &labels.iter().collect::<Vec<_>>(),
        &fc,
    )?;

    let (mut train_set, mut val_set): (Vec<Sample>, Vec<Sample>) = (Vec::new(), Vec::new());
    for (d, l) in data.iter().zip(&labels) {
        let mut samples = design_samples(d, l, &norm)?;
        if samples.len() > 1 {
            val_set.push(samples.pop().expect("non-empty"));
            train_set.extend(samples);
        } else {
            val_set.extend(samples.iter().cloned());
            train_set.extend(samples);
        }
    }

    let base = ModelConfig::default();
    let head_bias = a.head_bias.unwrap_or(false);
    let encoder = match &a.encoder {
        None => base.encoder,
        Some(v) => v
            .as_slice()
            .try_into()
            .map_err(|_| CliError::new("--encoder takes four widths"))?,
    };
    let decoder = match &a.decoder {
        None => base.decoder,
        Some(v) if v.len() == 3 => [v[0], v[1], v[2], 0],
        Some(_) => return Err(CliError::new("--decoder takes three widths")),
    };
    let config = ModelConfig {
        variant: Variant::from_name(a.variant.as_deref().unwrap_or("temporal3d"))?,
        cycles: window.cycles,
        steps_per_cycle: window.steps_per_cycle,
        encoder,
        decoder: [
            decoder[0],
            decoder[1],
            decoder[2],
            INSTANCE_FEATURES + usize::from(head_bias),
        ],
        head_bias,
    };
    let d = TrainHyper::default();
    let hyper = TrainHyper {
        epochs: a.epochs.unwrap_or(d.epochs),
        batch_size: a.batch_size.unwrap_or(d.batch_size),
        lambda: a.lambda.unwrap_or(d.lambda),
        adam: AdamConfig {
            lr: a.lr.unwrap_or(d.adam.lr),
            ..d.adam
        },
        patience: a.patience.unwrap_or(d.patience),
        seed: a.seed.unwrap_or(d.seed),
        augment: a.augment.unwrap_or(d.augment),
    };
    let mut model = Model::new(config, norm, hyper.seed)?;
    let log = fit(&mut model, &train_set, &val_set, &hyper)?;
    write_weights(&model, out)?;
    write(&suffixed(out, ".log.csv"), &log.to_csv())?;
    write(
        &suffixed(out, ".manifest.txt"),
        &manifest("train", &r.table, Some(hyper.seed)),
    )?;
    let best = &log.epochs[log.best_epoch.saturating_sub(1).min(log.epochs.len() - 1)];
    println!(
        "trained {} epochs on {} slices; best epoch {} validation RMSE {:.4} mV",
        log.epochs.len(),
        train_set.len(),
        log.best_epoch,
        best.val_rmse * 1e3
    );
    Ok(())
}

fn predict(design: &DesignBundle, ctx: &DesignContext, model: &Model, slice: usize) -> Result<Vec<f64>, CliError> {
    let trace = design
        .slice(slice)
        .ok_or_else(|| CliError::new(format!("no slice {slice}")))?;
    let (input, head) = prepare_slice(design, ctx, trace, &model.norm)?;
    Ok(predict_ir(&model.forward(&input)?, &head, model.norm.ir)?)
}

pub fn infer(r: Resolved<InferArgs>) -> Out {
    let a = &r.args;
    let dir = need(&a.corpus, "corpus")?;
    let out = need(&a.out, "out")?;
    let model = read_weights(need(&a.weights, "weights")?)?;
    let designs = corpus::select(corpus::load(dir)?, a.design.as_ref())?;
    let fc = FeatureConfig::default();
    let mut results = Vec::new();
    for design in &designs {
        let ctx = DesignContext::new(design, fc)?;
        let per_slice = design
            .slices()
            .iter()
            .map(|s| predict(design, &ctx, &model, s.slice_id))
            .collect::<Result<Vec<_>, _>>()?;
        results.push(per_slice);
    }
    for (design, per_slice) in designs.iter().zip(&results) {
        create_dir(&out.join(&design.name))?;
        for (trace, ir) in design.slices().iter().zip(per_slice) {
            write_ir_csv(design, ir, slice_file(out, &design.name, trace.slice_id))?;
        }
    }
    write(&out.join("manifest.txt"), &manifest("infer", &r.table, None))?;
    println!("predicted {} slices", results.iter().map(Vec::len).sum::<usize>());
    Ok(())
}

pub fn profile(r: Resolved<ProfileArgs>) -> Out {
    let a = &r.args;
    let dir = need(&a.corpus, "corpus")?;
    let out = need(&a.out, "out")?;
    let model = read_weights(need(&a.weights, "weights")?)?;
    let design = corpus::one(dir, need(&a.design, "design")?)?;
    let d = ProfilerParams::default();
    let coverage = match a.coverage.as_deref() {
        None | Some("max") => Coverage::AttainedMax,
        Some("won") => Coverage::WonOnly,
        Some(other) => return Err(CliError::new(format!("unknown coverage {other:?}; use `max` or `won`"))),
    };
    let params = ProfilerParams {
        n_a: a.n_a.unwrap_or(d.n_a),
        n_r: a.n_r.unwrap_or(d.n_r),
        n_o: a.n_o.unwrap_or(d.n_o),
        region_size: a.region_size.unwrap_or(d.region_size),
        cycle_divisor: d.cycle_divisor,
        coverage,
        cache_capacity: a.cache_capacity.unwrap_or(d.cache_capacity),
    };
    let ctx = DesignContext::new(&design, FeatureConfig::default())?;
    let predictor = ModelPredictor::new(&design, &ctx, &model, params.cache_capacity);
    let rec = profile_vector(&design, design.slices(), &predictor, &params)?;

    create_dir(out)?;
    write(&out.join("recommendation.csv"), &rec.to_csv())?;
    write(&out.join("report.txt"), &rec.report.to_text())?;
    for (k, (pick, ir)) in rec.ranking.picks.iter().zip(&rec.instance_ir).enumerate() {
        let tiles = tileize_ir(&ctx.location, ir, 1)?;
        let map = Heatmap::new(tiles.nx, tiles.ny, tiles.values)?;
        write_heatmap(
            &map,
            out.join(format!("pick_{}_slice_{}", k + 1, pick.slice_id)),
            map.range(),
        )?;
    }
    write(&out.join("manifest.txt"), &manifest("profile", &r.table, None))?;
    print!("{}", rec.to_csv());
    if let Some(w) = rec.worst_case() {
        println!("worst-case predicted drop {:.3} mV", w * 1e3);
    }
    Ok(())
}

fn add(a: Confusion, b: Confusion) -> Confusion {
    Confusion {
        tp: a.tp + b.tp,
        fp: a.fp + b.fp,
        fn_: a.fn_ + b.fn_,
        tn: a.tn + b.tn,
    }
}

fn curve_csv(c: &PrCurve) -> String {
    let mut s = String::from("recall,precision\n");
    for (r, p) in &c.points {
        let _ = writeln!(s, "{r},{p}");
    }
    s
}

pub fn eval(r: Resolved<EvalArgs>) -> Out {
    let a = &r.args;
    let dir = need(&a.corpus, "corpus")?;
    let out = need(&a.out, "out")?;
    let pred_root = need(&a.pred, "pred")?;
    let design = corpus::one(dir, need(&a.design, "design")?)?;
    let golden_root = a.golden.clone().unwrap_or_else(|| label_dir(dir));
    let threshold = a.threshold.unwrap_or(HOTSPOT_THRESHOLD);
    let ctx = DesignContext::new(&design, FeatureConfig::default())?;

    let (mut all_p, mut all_g) = (Vec::new(), Vec::new());
    let mut confusion = [Confusion::default(); 2];
    let mut scores: [(Vec<f64>, Vec<bool>); 2] = Default::default();
    for trace in design.slices() {
        let p = read_ir_csv(&design, slice_file(pred_root, &design.name, trace.slice_id))?;
        let g = read_ir_csv(&design, slice_file(&golden_root, &design.name, trace.slice_id))?;
        for (slot, block) in [1, REGION_TILES].into_iter().enumerate() {
            let pm = tileize_ir(&ctx.location, &p, block)?;
            let gm = tileize_ir(&ctx.location, &g, block)?;
            confusion[slot] = add(confusion[slot], classify_and_score(&pm, &gm, threshold)?);
            let (s, l) = hotspot_scores(&pm, &gm, threshold);
            scores[slot].0.extend(s);
            scores[slot].1.extend(l);
        }
        all_p.extend(p);
        all_g.extend(g);
    }
    let curve = |slot: usize| -> Result<Option<PrCurve>, CliError> {
        let (s, l) = &scores[slot];
        Ok(if l.iter().any(|&x| x) {
            Some(pr_auc(s, l)?)
        } else {
            None
        })
    };
    let report = MetricReport {
        errors: rmse_mae(&all_p, &all_g)?,
        threshold,
        confusion_1x1: confusion[0],
        confusion_6x6: confusion[1],
        pr_1x1: curve(0)?,
        pr_6x6: curve(1)?,
    };
    create_dir(out)?;
    let text = format!(
        "design={}\nslices={}\n{}",
        design.name,
        design.slices().len(),
        report.to_text()
    );
    write(&out.join("report.txt"), &text)?;
    for (name, c) in [("1x1", &report.pr_1x1), ("6x6", &report.pr_6x6)] {
        if let Some(c) = c {
            write(&out.join(format!("pr_{name}.csv")), &curve_csv(c))?;
        }
    }
    write(&out.join("manifest.txt"), &manifest("eval", &r.table, None))?;
    print!("{text}");
    Ok(())
}

pub fn plot(r: Resolved<PlotArgs>) -> Out {
    let a = &r.args;
    let dir = need(&a.corpus, "corpus")?;
    let out = need(&a.out, "out")?;
    let design = corpus::one(dir, need(&a.design, "design")?)?;
    let ir = read_ir_csv(&design, need(&a.ir, "ir")?)?;
    let ctx = DesignContext::new(&design, FeatureConfig::default())?;
    let tiles = tileize_ir(&ctx.location, &ir, a.block.unwrap_or(1))?;
    let map = Heatmap::new(tiles.nx, tiles.ny, tiles.values)?;
    let scale = match a.scale.as_deref() {
        None => map.range(),
        Some([lo, hi]) => (*lo, *hi),
        Some(_) => return Err(CliError::new("--scale takes `min,max`")),
    };
    let (csv, ppm) = write_heatmap(&map, out, scale)?;
    write(&suffixed(out, ".manifest.txt"), &manifest("plot", &r.table, None))?;
    println!("wrote {} and {}", csv.display(), ppm.display());
    Ok(())
}
