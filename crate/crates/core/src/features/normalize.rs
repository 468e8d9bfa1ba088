// SPDX-License-Identifier: Apache-2.0

use super::{FeatureVolume, InstanceFeatures, SliceFeatures, SPATIAL_CHANNELS};
use crate::design::InstanceRecord;
use crate::error::{Error, Result};

/// Length of the per-instance vector multiplied by the predicted coefficients.
pub const INSTANCE_FEATURES: usize = 8;

/// Number of instance-level power entries in the feature vector.
pub const INSTANCE_POWERS: usize = 7;

/// Number of spatial power maps (all spatial channels except `R`).
pub const SPATIAL_POWERS: usize = SPATIAL_CHANNELS - 1;

/// Scale constants, one per channel family. Every feature is divided by its
/// constant and clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormConstants {
    /// `p_i, p_l, p_s, p_r, p_ol, p_tot`, peak `p_t`, W.
    pub instance: [f64; INSTANCE_POWERS],
    /// Temporal power maps `P_t`, W.
    pub temporal: f64,
    /// `P_i, P_l, P_s, P_r, P_ol, P_tot` maps, W.
    pub spatial: [f64; SPATIAL_POWERS],
    /// Effective distance (`r` and `R`), µm.
    pub distance: f64,
    /// IR drop, V.
    pub ir: f64,
}

const FIELD_COUNT: usize = 2 * 4 + INSTANCE_POWERS + SPATIAL_POWERS;

impl NormConstants {
    /// Every power family shares `power`.
    pub fn uniform(power: f64, distance: f64, ir: f64) -> Self {
        Self {
            instance: [power; INSTANCE_POWERS],
            temporal: power,
            spatial: [power; SPATIAL_POWERS],
            distance,
            ir,
        }
    }

    fn all(&self) -> impl Iterator<Item = f64> + '_ {
        self.instance
            .iter()
            .chain(std::iter::once(&self.temporal))
            .chain(&self.spatial)
            .chain([&self.distance, &self.ir])
            .copied()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(v) = self.all().find(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Features(format!(
                "normalisation constants must be positive and finite, got {v}"
            )));
        }
        Ok(())
    }

    /// Maxima over a training corpus. `labels` are golden IR values in volts;
    /// `distance` is the featurizer's `R_MAX`. A family whose maximum is zero
    /// gets the constant 1.
    pub fn fit<'a>(
        slices: impl IntoIterator<Item = (&'a [InstanceRecord], &'a SliceFeatures)>,
        labels: impl IntoIterator<Item = &'a [f64]>,
        distance: f64,
    ) -> Result<Self> {
        let mut c = Self::uniform(0.0, distance, 0.0);
        for (records, f) in slices {
            for (rec, inst) in records.iter().zip(&f.instances) {
                for (m, v) in c.instance.iter_mut().zip(raw_powers(rec, inst)) {
                    *m = m.max(v);
                }
            }
            c.temporal = f.volume.temporal.iter().copied().fold(c.temporal, f64::max);
            let plane = f.volume.plane();
            for (k, m) in c.spatial.iter_mut().enumerate() {
                *m = f.volume.spatial[k * plane..(k + 1) * plane]
                    .iter()
                    .copied()
                    .fold(*m, f64::max);
            }
        }
        c.ir = labels.into_iter().flat_map(|l| l.iter().copied()).fold(0.0, f64::max);
        let or_one = |v: &mut f64| {
            if !(*v > 0.0) {
                *v = 1.0;
            }
        };
        c.instance.iter_mut().for_each(or_one);
        c.spatial.iter_mut().for_each(or_one);
        or_one(&mut c.temporal);
        or_one(&mut c.ir);
        c.validate()?;
        Ok(c)
    }

    /// Stable text form: `instance <7> temporal <1> spatial <6> distance <1> ir <1>`,
    /// 17 significant digits.
    pub fn to_fields(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ");
        format!(
            "instance {} temporal {:.16e} spatial {} distance {:.16e} ir {:.16e}",
            list(&self.instance),
            self.temporal,
            list(&self.spatial),
            self.distance,
            self.ir
        )
    }

    /// Inverse of [`NormConstants::to_fields`], given its whitespace-split tokens.
    pub fn from_fields(tokens: &[&str]) -> Result<Self> {
        let bad = |m: &str| Error::Features(format!("malformed normalisation constants: {m}"));
        if tokens.len() != FIELD_COUNT {
            return Err(bad(&format!("expected {FIELD_COUNT} fields, got {}", tokens.len())));
        }
        let num = |k: usize| -> Result<f64> { tokens[k].parse().map_err(|_| bad(tokens[k])) };
        let tag = |k: usize, name: &str| {
            if tokens[k] == name {
                Ok(())
            } else {
                Err(bad(&format!("expected `{name}`")))
            }
        };
        let mut c = Self::uniform(0.0, 0.0, 0.0);
        tag(0, "instance")?;
        for (k, v) in c.instance.iter_mut().enumerate() {
            *v = num(1 + k)?;
        }
        let at = 1 + INSTANCE_POWERS;
        tag(at, "temporal")?;
        c.temporal = num(at + 1)?;
        tag(at + 2, "spatial")?;
        for (k, v) in c.spatial.iter_mut().enumerate() {
            *v = num(at + 3 + k)?;
        }
        let at = at + 3 + SPATIAL_POWERS;
        tag(at, "distance")?;
        c.distance = num(at + 1)?;
        tag(at + 2, "ir")?;
        c.ir = num(at + 3)?;
        c.validate()?;
        Ok(c)
    }
}

fn raw_powers(rec: &InstanceRecord, f: &InstanceFeatures) -> [f64; INSTANCE_POWERS] {
    [
        rec.p_internal,
        rec.p_leakage,
        rec.p_switching,
        f.p_r,
        f.p_ol,
        f.p_tot,
        f.peak_power(),
    ]
}

fn scale(v: f64, c: f64) -> f64 {
    (v / c).clamp(0.0, 1.0)
}

/// Divides every channel by its family constant and clamps into `[0, 1]`.
pub fn normalize(volume: &FeatureVolume, constants: &NormConstants) -> Result<FeatureVolume> {
    constants.validate()?;
    let plane = volume.plane();
    let mut out = volume.clone();
    for v in &mut out.temporal {
        *v = scale(*v, constants.temporal);
    }
    for (k, chunk) in out.spatial.chunks_mut(plane.max(1)).enumerate() {
        let c = constants.spatial.get(k).copied().unwrap_or(constants.distance);
        for v in chunk {
            *v = scale(*v, c);
        }
    }
    Ok(out)
}

/// `(p_i, p_l, p_s, p_r, p_ol, p_tot, r, max_j p_t(j))`, normalised.
pub fn instance_feature_vector(
    rec: &InstanceRecord,
    f: &InstanceFeatures,
    constants: &NormConstants,
) -> [f64; INSTANCE_FEATURES] {
    let p = raw_powers(rec, f);
    let c = &constants.instance;
    [
        scale(p[0], c[0]),
        scale(p[1], c[1]),
        scale(p[2], c[2]),
        scale(p[3], c[3]),
        scale(p[4], c[4]),
        scale(p[5], c[5]),
        scale(f.r, constants.distance),
        scale(p[6], c[6]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constants() -> NormConstants {
        NormConstants::uniform(2.0, 5.0, 0.7)
    }

    #[test]
    fn scaling_and_clamping() {
        let mut v = FeatureVolume::zeros(1, 1, 2);
        v.temporal = vec![0.5, 3.0];
        v.spatial = vec![0.0, 0.5, 0.5, 0.5, 0.5, 0.5, 2.5];
        let n = normalize(&v, &constants()).unwrap();
        assert_eq!(n.temporal, vec![0.25, 1.0]);
        assert_eq!(n.spatial[0], 0.0);
        assert_eq!(n.spatial[6], 0.5);
    }

    #[test]
    fn non_positive_constant_is_an_error() {
        let v = FeatureVolume::zeros(1, 1, 1);
        let mut c = constants();
        c.temporal = 0.0;
        assert!(normalize(&v, &c).is_err());
        c.temporal = 2.0;
        c.spatial[3] = -1.0;
        assert!(normalize(&v, &c).is_err());
    }

    #[test]
    fn feature_vector_layout() {
        let quiet = InstanceRecord::new("q", 0.0, 0.0, 0.0, 0.0, 0.0);
        let f = InstanceFeatures {
            r: 5.0,
            tau: 0.0,
            p_r: 0.0,
            p_tot: 0.0,
            p_ol: 0.0,
            p_t: vec![0.0; 4],
        };
        assert_eq!(
            instance_feature_vector(&quiet, &f, &constants()),
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]
        );

        let rec = InstanceRecord::new("t", 0.0, 0.0, 0.5, 0.4, 0.1);
        let f = InstanceFeatures {
            r: 1.0,
            tau: 0.25,
            p_r: 0.325,
            p_tot: 1.0,
            p_ol: 0.0,
            p_t: vec![0.1, 1.0, 0.1, 0.1],
        };
        let v = instance_feature_vector(&rec, &f, &constants());
        assert_eq!(v[7], 0.5);
        assert_eq!(v, instance_feature_vector(&rec, &f, &constants()));
    }

    #[test]
    fn text_form_round_trips() {
        let mut c = constants();
        c.instance[4] = 1.0 / 3.0;
        c.spatial[2] = 7.25e-5;
        let text = c.to_fields();
        let tokens: Vec<&str> = text.split_whitespace().collect();
        assert_eq!(NormConstants::from_fields(&tokens).unwrap(), c);
        assert!(NormConstants::from_fields(&tokens[1..]).is_err());
    }
}
