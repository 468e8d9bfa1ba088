// SPDX-License-Identifier: Apache-2.0

//! Resistive power-grid oracle.
//!
//! Golden labels come from a quasi-static solve of a single-layer resistive
//! mesh: one DC solve per time step, worst case over the slice. There is no
//! capacitance, decap or package inductance in the model.

mod golden;
mod grid;
mod solver;
mod synth;

pub use golden::{golden_dynamic_ir, GoldenIr};
pub use grid::{GridModel, PdnConfig};
pub use solver::{conjugate_gradient, CgOptions, CsrMatrix, Solution};
pub use synth::{generate_design, SynthSpec};
