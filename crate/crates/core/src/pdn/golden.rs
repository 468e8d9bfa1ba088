// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;

use super::GridModel;
use crate::design::{DesignBundle, SliceTrace};
use crate::error::{Error, Result};

/// Golden per-instance dynamic IR drop of one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldenIr {
    pub slice_id: usize,
    /// Worst drop over all time steps, per instance, V.
    pub worst: Vec<f64>,
    /// Per step, per instance drops when requested.
    pub per_step: Option<Vec<Vec<f64>>>,
}

/// Quasi-static rail analysis: at every step each instance sinks
/// `p_t(j) / V_dd` at its attachment node; its drop is the node drop plus the
/// drop across its attachment resistance. The label is the worst step.
pub fn golden_dynamic_ir(
    grid: &GridModel,
    design: &DesignBundle,
    trace: &SliceTrace,
    keep_steps: bool,
) -> Result<GoldenIr> {
    design.check_trace(trace)?;
    let insts = design.instances();
    if grid.attach.len() != insts.len() {
        return Err(Error::Grid(format!(
            "grid attaches {} instances, design has {}",
            grid.attach.len(),
            insts.len()
        )));
    }
    let vdd = design.vdd;
    let steps = design.window.steps();
    let mut toggling: Vec<Vec<u32>> = vec![Vec::new(); steps];
    for &(i, s) in trace.entries() {
        toggling[s as usize].push(i);
    }

    let mut leak_nodes = vec![0.0; grid.nodes()];
    for (inst, &n) in insts.iter().zip(&grid.attach) {
        leak_nodes[n as usize] += inst.p_leakage / vdd;
    }
    let quiet = grid.solve_dc(&leak_nodes)?.x;

    let step_drops = |active: &Vec<u32>| -> Result<Vec<f64>> {
        let node_drop = if active.is_empty() {
            quiet.clone()
        } else {
            let mut cur = leak_nodes.clone();
            for &i in active {
                cur[grid.attach[i as usize] as usize] += insts[i as usize].dynamic_power() / vdd;
            }
            grid.solve_dc(&cur)?.x
        };
        let mut drops: Vec<f64> = insts
            .iter()
            .zip(&grid.attach)
            .map(|(inst, &n)| node_drop[n as usize] + inst.p_leakage / vdd * grid.attach_resistance)
            .collect();
        for &i in active {
            drops[i as usize] += insts[i as usize].dynamic_power() / vdd * grid.attach_resistance;
        }
        Ok(drops)
    };

    let per_step: Vec<Vec<f64>> = toggling.par_iter().map(step_drops).collect::<Result<_>>()?;
    let mut worst = vec![0.0f64; insts.len()];
    for d in &per_step {
        for (w, &v) in worst.iter_mut().zip(d) {
            *w = w.max(v);
        }
    }
    if let Some((i, v)) = worst.iter().enumerate().find(|(_, &v)| !(v < vdd)) {
        return Err(Error::Grid(format!(
            "instance {} drops {v} V, not below V_dd = {vdd} V; grid too weak for this load",
            insts[i].id
        )));
    }
    Ok(GoldenIr {
        slice_id: trace.slice_id,
        worst,
        per_step: keep_steps.then_some(per_step),
    })
}
