// SPDX-License-Identifier: Apache-2.0

//! Model weight files.
//!
//! ```text
//! format_version 1
//! model variant temporal3d cycles 20 steps_per_cycle 5 encoder 16 32 64 64 decoder 64 32 16 8 head_bias 0
//! norm instance <7 × e> temporal <e> spatial <6 × e> distance <e> ir <e>
//! layer <i> weight <cout> <cin> <kd> <kh> <kw>
//! <values, 17 significant digits, 8 per line>
//! layer <i> bias <cout>
//! <values>
//! end
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{file_label, read_to_string, write_string, Records};
use crate::error::{Error, Result};
use crate::features::NormConstants;
use crate::nn::{ConvLayer, Model, ModelConfig, Variant};

fn config_line(c: &ModelConfig) -> String {
    let join = |v: &[usize; 4]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    format!(
        "model variant {} cycles {} steps_per_cycle {} encoder {} decoder {} head_bias {}",
        c.variant.name(),
        c.cycles,
        c.steps_per_cycle,
        join(&c.encoder),
        join(&c.decoder),
        u8::from(c.head_bias)
    )
}

fn push_values(out: &mut String, values: &[f64]) {
    for row in values.chunks(8) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

pub fn write_weights_string(model: &Model) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "format_version {}", super::FORMAT_VERSION);
    let _ = writeln!(s, "{}", config_line(&model.config));
    let _ = writeln!(s, "norm {}", model.norm.to_fields());
    for (i, l) in model.layers.iter().enumerate() {
        let _ = writeln!(
            s,
            "layer {i} weight {} {} {} {} {}",
            l.cout, l.cin, l.kernel[0], l.kernel[1], l.kernel[2]
        );
        push_values(&mut s, &l.weight);
        let _ = writeln!(s, "layer {i} bias {}", l.cout);
        push_values(&mut s, &l.bias);
    }
    s.push_str("end\n");
    s
}

pub fn write_weights(model: &Model, path: &Path) -> Result<()> {
    write_string(path, &write_weights_string(model))
}

pub fn read_weights(path: &Path) -> Result<Model> {
    read_weights_str(&read_to_string(path)?, &file_label(path))
}

/// Reads a weights file and checks it was written for `expected`.
pub fn read_weights_for(path: &Path, expected: &ModelConfig) -> Result<Model> {
    let model = read_weights(path)?;
    if &model.config != expected {
        return Err(Error::Weights(format!(
            "{} holds `{}`, expected `{}`",
            path.display(),
            config_line(&model.config),
            config_line(expected)
        )));
    }
    Ok(model)
}

fn parse_config(rec: &Records, line: usize, f: &[&str]) -> Result<ModelConfig> {
    let err = || rec.error(line, "malformed `model` header");
    if f.len() != 19
        || f[1] != "variant"
        || f[3] != "cycles"
        || f[5] != "steps_per_cycle"
        || f[7] != "encoder"
        || f[12] != "decoder"
        || f[17] != "head_bias"
    {
        return Err(err());
    }
    let four = |at: usize| -> Result<[usize; 4]> {
        let mut out = [0; 4];
        for (k, o) in out.iter_mut().enumerate() {
            *o = rec.parse(line, "channel width", f[at + k])?;
        }
        Ok(out)
    };
    let variant = Variant::from_name(f[2]).map_err(|e| rec.error(line, e.to_string()))?;
    let head_bias = match f[18] {
        "0" => false,
        "1" => true,
        other => return Err(rec.error(line, format!("head_bias must be 0 or 1, got {other}"))),
    };
    Ok(ModelConfig {
        variant,
        cycles: rec.parse(line, "cycles", f[4])?,
        steps_per_cycle: rec.parse(line, "steps_per_cycle", f[6])?,
        encoder: four(8)?,
        decoder: four(13)?,
        head_bias,
    })
}

pub fn read_weights_str(text: &str, file: &str) -> Result<Model> {
    let last = text.lines().map(str::trim).rfind(|l| !l.is_empty());
    if last != Some("end") {
        return Err(Error::Weights(format!(
            "{file}: truncated weights file (no `end` record)"
        )));
    }
    let mut rec = Records::new(file, text);
    rec.expect_version()?;
    let wrap = |e: Error| match e {
        Error::Parse { .. } => Error::Weights(e.to_string()),
        other => other,
    };

    let header = rec
        .next()
        .ok_or_else(|| Error::Weights(format!("{file}: missing model header")))?;
    if header.fields.first() != Some(&"model") {
        return Err(wrap(rec.error(header.line, "expected `model` header")));
    }
    let config = parse_config(&rec, header.line, &header.fields).map_err(wrap)?;
    config.validate().map_err(|e| Error::Weights(format!("{file}: {e}")))?;

    let norm_rec = rec
        .next()
        .ok_or_else(|| Error::Weights(format!("{file}: missing norm line")))?;
    if norm_rec.fields.first() != Some(&"norm") {
        return Err(wrap(rec.error(norm_rec.line, "expected `norm` line")));
    }
    let norm = NormConstants::from_fields(&norm_rec.fields[1..])
        .map_err(|e| Error::Weights(format!("{file}:{}: {e}", norm_rec.line)))?;

    let mut model = Model::zeros(config, norm).map_err(|e| Error::Weights(format!("{file}: {e}")))?;
    let mut pending: Option<(usize, bool, usize)> = None; // (layer, is_weight, values still expected)
    let mut filled: Vec<f64> = Vec::new();
    let mut done = [[false; 2]; 8];
    let mut ended = false;
    for r in rec.by_ref() {
        if ended {
            return Err(Error::Weights(format!("{file}:{}: content after `end`", r.line)));
        }
        match (pending, r.fields[0]) {
            (None, "end") => ended = true,
            (None, "layer") => {
                let f = &r.fields;
                let bad = || Error::Weights(format!("{file}:{}: malformed layer header", r.line));
                if f.len() < 4 {
                    return Err(bad());
                }
                let idx: usize = f[1].parse().map_err(|_| bad())?;
                let layer = model.layers.get(idx).ok_or_else(bad)?;
                let dims: Vec<usize> = f[3..]
                    .iter()
                    .map(|t| t.parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad())?;
                let (is_weight, want) = match f[2] {
                    "weight" => (
                        true,
                        vec![layer.cout, layer.cin, layer.kernel[0], layer.kernel[1], layer.kernel[2]],
                    ),
                    "bias" => (false, vec![layer.cout]),
                    _ => return Err(bad()),
                };
                if dims != want {
                    return Err(Error::Weights(format!(
                        "{file}:{}: layer {idx} {} has shape {dims:?}, architecture expects {want:?}",
                        r.line, f[2]
                    )));
                }
                if done[idx][usize::from(!is_weight)] {
                    return Err(Error::Weights(format!("{file}:{}: duplicate layer block", r.line)));
                }
                let n: usize = want.iter().product();
                filled.clear();
                pending = (n > 0).then_some((idx, is_weight, n));
                if n == 0 {
                    done[idx][usize::from(!is_weight)] = true;
                }
            }
            (Some((idx, is_weight, n)), _) => {
                for tok in &r.fields {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| Error::Weights(format!("{file}:{}: bad value {tok:?}", r.line)))?;
                    filled.push(v);
                }
                if filled.len() > n {
                    return Err(Error::Weights(format!(
                        "{file}:{}: too many values for layer {idx}",
                        r.line
                    )));
                }
                if filled.len() == n {
                    let l: &mut ConvLayer = &mut model.layers[idx];
                    let dst = if is_weight { &mut l.weight } else { &mut l.bias };
                    dst.copy_from_slice(&filled);
                    done[idx][usize::from(!is_weight)] = true;
                    pending = None;
                }
            }
            (None, other) => {
                return Err(Error::Weights(format!(
                    "{file}:{}: unexpected record {other:?}",
                    r.line
                )));
            }
        }
    }
    if pending.is_some() || !ended || done.iter().flatten().any(|d| !d) {
        return Err(Error::Weights(format!("{file}: truncated weights file")));
    }
    Ok(model)
}
