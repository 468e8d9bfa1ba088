// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::rank::ScoreTable;
use super::RegionGrid;
use crate::dataset::prepare_slice;
use crate::design::{DesignBundle, SliceTrace};
use crate::error::Result;
use crate::features::DesignContext;
use crate::nn::{predict_ir, HeadInput, Model, ModelInput};

/// Anything that maps a slice to per-instance IR drop (V).
pub trait IrPredictor: Sync {
    fn predict(&self, trace: &SliceTrace) -> Result<Vec<f64>>;
}

impl<F> IrPredictor for F
where
    F: Fn(&SliceTrace) -> Result<Vec<f64>> + Sync,
{
    fn predict(&self, trace: &SliceTrace) -> Result<Vec<f64>> {
        self(trace)
    }
}

type Prepared = Arc<(ModelInput, HeadInput)>;

/// Least-recently-used store of prepared inputs, keyed by slice id.
#[derive(Debug)]
pub struct VolumeCache {
    capacity: usize,
    inner: Mutex<CacheState>,
}

#[derive(Debug, Default)]
struct CacheState {
    tick: u64,
    entries: HashMap<usize, (Prepared, u64)>,
    hits: u64,
    misses: u64,
}

impl VolumeCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            inner: Mutex::new(CacheState::default()),
        }
    }

    fn get_or_insert(&self, key: usize, make: impl FnOnce() -> Result<Prepared>) -> Result<Prepared> {
        {
            let mut st = self.inner.lock().expect("cache lock");
            st.tick += 1;
            let tick = st.tick;
            if let Some((v, t)) = st.entries.get_mut(&key) {
                *t = tick;
                let v = Arc::clone(v);
                st.hits += 1;
                return Ok(v);
            }
            st.misses += 1;
        }
        // Built outside the lock so candidates featurise in parallel.
        let value = make()?;
        if self.capacity > 0 {
            let mut st = self.inner.lock().expect("cache lock");
            st.tick += 1;
            let tick = st.tick;
            st.entries.insert(key, (Arc::clone(&value), tick));
            while st.entries.len() > self.capacity {
                let oldest = st
                    .entries
                    .iter()
                    .min_by_key(|(k, (_, t))| (*t, **k))
                    .map(|(k, _)| *k)
                    .expect("non-empty cache");
                st.entries.remove(&oldest);
            }
        }
        Ok(value)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, key: usize) -> bool {
        self.inner.lock().expect("cache lock").entries.contains_key(&key)
    }

    /// `(hits, misses)` since creation.
    pub fn stats(&self) -> (u64, u64) {
        let st = self.inner.lock().expect("cache lock");
        (st.hits, st.misses)
    }
}

/// Feature extraction plus network inference, with an LRU of prepared inputs.
pub struct ModelPredictor<'a> {
    pub design: &'a DesignBundle,
    pub ctx: &'a DesignContext,
    pub model: &'a Model,
    pub cache: VolumeCache,
}

impl<'a> ModelPredictor<'a> {
    pub fn new(design: &'a DesignBundle, ctx: &'a DesignContext, model: &'a Model, cache_capacity: usize) -> Self {
        Self {
            design,
            ctx,
            model,
            cache: VolumeCache::new(cache_capacity),
        }
    }
}

impl IrPredictor for ModelPredictor<'_> {
    fn predict(&self, trace: &SliceTrace) -> Result<Vec<f64>> {
        let prepared = self.cache.get_or_insert(trace.slice_id, || {
            Ok(Arc::new(prepare_slice(self.design, self.ctx, trace, &self.model.norm)?))
        })?;
        let map = self.model.forward(&prepared.0)?;
        predict_ir(&map, &prepared.1, self.model.norm.ir)
    }
}

/// Maximum predicted IR per region; regions without instances score 0.
pub fn region_max(grid: &RegionGrid, design: &DesignBundle, ir: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0f64; grid.len()];
    for (inst, &v) in design.instances().iter().zip(ir) {
        let r = grid.region_of(inst.x, inst.y);
        out[r] = out[r].max(v);
    }
    out
}

/// Scores of the candidates that succeeded, plus the failures.
#[derive(Debug, Clone)]
pub struct Scored {
    pub table: ScoreTable,
    /// Per-instance predicted IR of each row of `table`.
    pub instance_ir: Vec<Vec<f64>>,
    pub failures: Vec<(usize, String)>,
}

/// Predicts every candidate in parallel and reduces to per-region maxima.
/// Row order follows `candidates`, independent of completion order.
pub fn score_candidates(
    design: &DesignBundle,
    grid: &RegionGrid,
    slices: &[SliceTrace],
    candidates: &[usize],
    predictor: &dyn IrPredictor,
) -> Result<Scored> {
    let lookup: HashMap<usize, &SliceTrace> = slices.iter().map(|s| (s.slice_id, s)).collect();
    let results: Vec<(usize, Result<Vec<f64>>)> = candidates
        .par_iter()
        .map(|&id| {
            let r = match lookup.get(&id) {
                Some(trace) => predictor.predict(trace),
                None => Err(crate::Error::Profiler(format!(
                    "candidate slice {id} not in the vector"
                ))),
            };
            (id, r)
        })
        .collect();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut instance_ir = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r.and_then(|ir| {
            if ir.len() != design.instances().len() {
                return Err(crate::Error::Profiler(format!(
                    "predictor returned {} values",
                    ir.len()
                )));
            }
            Ok(ir)
        }) {
            Ok(ir) => {
                ids.push(id);
                rows.push(region_max(grid, design, &ir));
                instance_ir.push(ir);
            }
            Err(e) => failures.push((id, e.to_string())),
        }
    }
    Ok(Scored {
        table: ScoreTable::new(grid.len(), ids, rows)?,
        instance_ir,
        failures,
    })
}
