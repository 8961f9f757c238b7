//! Few-shot calibration of per-region material embeddings against measured
//! snapshots through the SMAPE loss on CIR power and delay spread.

mod loss;
mod optimizer;
mod snapshot;

pub use loss::{gradients, smape_loss, FrozenSnapshot, LossGradient};
pub use optimizer::{Optimizer, OptimizerKind};
pub use snapshot::{read_snapshots_csv, write_snapshots_csv, Snapshot};

use std::path::Path;

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{path_gain, CirSpec, ScaleState};
use crate::error::{Error, Result};
use crate::geometry::Scene;
use crate::materials::{params_from_embedding, MaterialEmbedding, MaterialParams, ReadoutWeights};
use crate::tracer::{trace_paths, PathKind, PropagationPath, TraceConfig};
use crate::util::csv_error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub lambda_p: f64,
    pub lambda_tau: f64,
    /// Snapshots per iteration; `None` uses all of them.
    pub batch: Option<usize>,
    pub learning_rate: f64,
    /// Multiplicative learning-rate factor per iteration (1 keeps it fixed).
    pub lr_decay: f64,
    pub max_iterations: usize,
    /// Iterations between path re-discovery (0 disables re-tracing).
    pub retrace_period: usize,
    pub ema_beta: f64,
    /// Stop once the loss falls below this value.
    pub tolerance: f64,
    pub optimizer: OptimizerKind,
    pub cir: CirSpec,
    /// Seeds mini-batch selection.
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            lambda_p: 1.0,
            lambda_tau: 1.0,
            batch: None,
            learning_rate: 1e-2,
            lr_decay: 1.0,
            max_iterations: 500,
            retrace_period: 25,
            ema_beta: 0.9,
            tolerance: 1e-6,
            optimizer: OptimizerKind::Adam,
            cir: CirSpec::default(),
            seed: 0,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("calibration config: {m}")));
        if !(self.lambda_p >= 0.0 && self.lambda_tau >= 0.0) || self.lambda_p + self.lambda_tau == 0.0 {
            return bad("loss weights must be non-negative and not both zero");
        }
        if self.batch == Some(0) {
            return bad("batch size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("learning-rate decay must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.ema_beta) {
            return bad("EMA beta must lie in [0, 1)");
        }
        if !(self.tolerance >= 0.0) {
            return bad("tolerance must be non-negative");
        }
        if !(self.cir.sample_rate > 0.0) || self.cir.taps == 0 {
            return bad("CIR spec needs a positive sample rate and taps");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loss: f64,
    pub scale: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    pub embeddings: Vec<MaterialEmbedding>,
    pub params: Vec<MaterialParams>,
    pub scale: ScaleState,
    /// Loss before each step taken, plus the final evaluation.
    pub history: Vec<IterationRecord>,
    pub steps: usize,
    pub converged: bool,
}

impl CalibrationOutcome {
    pub fn final_loss(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.loss)
    }
}

/// Traces every snapshot's link; the scene is only read.
pub fn trace_snapshots(scene: &Scene, snapshots: &[Snapshot], trace: &TraceConfig) -> Result<Vec<Vec<PropagationPath>>> {
    snapshots.par_iter().map(|s| trace_paths(scene, s.tx, s.rx, trace)).collect()
}

fn update_scale(state: &mut ScaleState, batch: &[FrozenSnapshot<'_>], params: &[MaterialParams]) -> Result<()> {
    let mut pred = Vec::new();
    let mut meas = Vec::new();
    for (snap, paths) in batch {
        let (Some(i), Some(p)) = (snap.los_index(), paths.iter().find(|p| p.kind == PathKind::Los)) else {
            continue;
        };
        pred.push(path_gain(p, params, snap.freq_hz)?.amplitude.norm_sqr());
        meas.push(snap.mpcs[i].power());
    }
    if !pred.is_empty() {
        state.update(&pred, &meas)?;
    }
    Ok(())
}

/// Gradient calibration of the region embeddings. Paths are re-traced every
/// `retrace_period` iterations, the global scale follows an EMA over the
/// line-of-sight snapshots of each batch and is not part of the gradient step.
pub fn calibrate(
    scene: &Scene,
    weights: &ReadoutWeights,
    initial: &[MaterialEmbedding],
    snapshots: &[Snapshot],
    config: &CalibrationConfig,
    trace: &TraceConfig,
) -> Result<CalibrationOutcome> {
    config.validate()?;
    trace.validate()?;
    if snapshots.is_empty() {
        return Err(Error::InvalidInput("calibration needs at least one snapshot".into()));
    }
    for s in snapshots {
        s.validate()?;
    }
    if initial.len() < scene.region_count() {
        return Err(Error::InvalidInput(format!("{} embeddings for {} surface regions", initial.len(), scene.region_count())));
    }
    let dim = weights.dim();
    let mut x = DVector::from_iterator(initial.len() * dim, initial.iter().flat_map(|e| e.v.iter().copied()));
    let unflatten = |x: &DVector<f64>| -> Vec<MaterialEmbedding> {
        (0..initial.len()).map(|r| MaterialEmbedding { v: x.rows(r * dim, dim).into_owned() }).collect()
    };

    let mut paths = trace_snapshots(scene, snapshots, trace)?;
    let mut traced_epoch = scene.epoch();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, x.len());
    let mut scale = ScaleState::new(1.0, config.ema_beta)?;
    let mut history = Vec::new();
    let mut converged = false;
    let mut steps = 0;

    for iteration in 0..=config.max_iterations {
        // Discovery depends on geometry, poses and the trace config but not on
        // materials, so re-discovery is only needed once the scene epoch moved.
        if iteration > 0 && config.retrace_period > 0 && iteration % config.retrace_period == 0 && scene.epoch() != traced_epoch {
            paths = trace_snapshots(scene, snapshots, trace)?;
            traced_epoch = scene.epoch();
        }
        let indices: Vec<usize> = match config.batch {
            Some(b) if b < snapshots.len() => {
                let mut v = sample(&mut rng, snapshots.len(), b).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..snapshots.len()).collect(),
        };
        let batch: Vec<FrozenSnapshot<'_>> = indices.iter().map(|&i| (&snapshots[i], paths[i].as_slice())).collect();
        let embeddings = unflatten(&x);
        let params: Vec<MaterialParams> = embeddings.iter().map(|e| params_from_embedding(e, weights)).collect::<Result<_>>()?;
        assert!(params.iter().all(MaterialParams::is_physical), "read-out left the physical range");
        update_scale(&mut scale, &batch, &params)?;

        let g = gradients(&batch, &embeddings, weights, scale.scale, config)?;
        let flat = DVector::from_iterator(x.len(), g.d_embeddings.iter().flat_map(|d| d.iter().copied()));
        if !g.loss.is_finite() || flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration, loss: g.loss });
        }
        history.push(IterationRecord { iteration, loss: g.loss, scale: scale.scale, grad_norm: flat.norm() });
        log::debug!("iteration {iteration}: loss {:.6e} scale {:.6}", g.loss, scale.scale);
        if g.loss < config.tolerance {
            converged = true;
            break;
        }
        if iteration == config.max_iterations {
            break;
        }
        optimizer.set_learning_rate(config.learning_rate * config.lr_decay.powi(iteration as i32));
        optimizer.step(&mut x, &flat);
        steps += 1;
    }

    let embeddings = unflatten(&x);
    let params = embeddings.iter().map(|e| params_from_embedding(e, weights)).collect::<Result<Vec<_>>>()?;
    Ok(CalibrationOutcome { embeddings, params, scale, history, steps, converged })
}

pub fn write_loss_history_csv(history: &[IterationRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in history {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct ParamRow<'a> {
    region: usize,
    label: &'a str,
    sigma_before: f64,
    sigma_after: f64,
    eps_r_before: f64,
    eps_r_after: f64,
    scattering_before: f64,
    scattering_after: f64,
}

/// Per-region before/after parameter table.
pub fn write_param_table_csv(labels: &[String], before: &[MaterialParams], after: &[MaterialParams], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for (r, (b, a)) in before.iter().zip(after).enumerate() {
        w.serialize(ParamRow {
            region: r,
            label: labels.get(r).map_or("", String::as_str),
            sigma_before: b.sigma,
            sigma_after: a.sigma,
            eps_r_before: b.eps_r,
            eps_r_after: a.eps_r,
            scattering_before: b.scattering,
            scattering_after: a.scattering,
        })
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
