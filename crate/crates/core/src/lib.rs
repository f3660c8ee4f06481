//! Multi-view surface reconstruction by optimizing per-camera depth maps
//! against a signed-ray-distance consistency energy, followed by TSDF fusion.
//!
//! The pipeline is: render or load calibrated views ([`synth`], [`dataset`]),
//! initialize depths from the visual hull, optimize them per camera group
//! ([`optimize`]), fuse into a mesh ([`fusion`]) and evaluate ([`metrics`]).
//! [`pipeline`] strings the steps together as the `srdf` binary runs them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod consistency;
pub mod dataset;
mod error;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod optimize;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
