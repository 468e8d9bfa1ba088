// SPDX-License-Identifier: Apache-2.0

//! Vectored dynamic IR-drop estimation.
//!
//! The crate is organised as a pipeline:
//!
//! * [`design`] holds the in-memory design model (instances, via stacks, slice traces).
//! * [`io`] reads and writes every on-disk format (designs, slices, weights, CSV, heatmaps).
//! * [`features`] turns a design plus one slice into instance features and tile maps.
//! * [`pdn`] generates synthetic designs and solves the resistive power grid for golden labels.
//! * [`nn`] is the 3D-convolutional U-Net with a per-instance regression head, trained with ADAM.
//! * [`profiler`] ranks the slices of a long vector by predicted worst-case IR drop.
//! * [`metrics`] scores predictions against golden labels.
//!
//! The guide under `book/` walks through each stage with runnable snippets.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod design;
pub mod error;
pub mod features;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod pdn;
pub mod profiler;

pub use design::{DesignBundle, InstanceRecord, SliceTrace, ViaStack, Window};
pub use error::{Error, Result};

/// Edge length of a feature tile, µm.
pub const TILE_SIZE: f64 = 2.5;
