//! Differentiable mmWave multipath prediction over triangle-mesh scenes.
//!
//! The crate is organised along the processing pipeline: [`geometry`] loads
//! scenes and answers ray queries, [`materials`] and [`semantics`] turn
//! ingested vision features into per-surface EM parameters, [`tracer`] finds
//! propagation paths, [`channel`] turns paths into multipath components,
//! [`metrics`] and [`calibration`] compare predictions with soundings, and
//! [`dynamics`] / [`beamsel`] cover moving blockers and beam selection.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamsel;
pub mod calibration;
pub mod channel;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod materials;
pub mod metrics;
pub mod semantics;
pub mod tracer;
pub mod util;

pub use error::{Error, Result};
