use nalgebra::DVector;
use rayon::prelude::*;

use super::CalibrationConfig;
use crate::channel::{path_gain_with_gradient, ChannelImpulseResponse};
use crate::error::{Error, Result};
use crate::materials::{params_from_embedding, readout_derivatives, MaterialEmbedding, MaterialParams, ReadoutWeights};
use crate::metrics::{delay_spread_weights, tap_features, TapFeatures};
use crate::tracer::PropagationPath;

use super::Snapshot;

fn smape_term(x: f64, x_hat: f64) -> f64 {
    let d = x + x_hat;
    if d > 0.0 {
        (x - x_hat).abs() / d
    } else {
        0.0
    }
}

/// `d/dx_hat |x - x_hat| / (x + x_hat)`, with subgradient 0 at `x_hat = x`.
fn smape_slope(x: f64, x_hat: f64) -> f64 {
    let d = x + x_hat;
    if !(d > 0.0) || x_hat == x {
        return 0.0;
    }
    (x_hat - x).signum() * 2.0 * x / (d * d)
}

/// Batch-averaged `lambda_P |P - P^| / (P + P^) + lambda_tau |tau - tau^| / (tau + tau^)`.
pub fn smape_loss(pred: &[TapFeatures], meas: &[TapFeatures], lambda_p: f64, lambda_tau: f64) -> Result<f64> {
    if pred.len() != meas.len() || pred.is_empty() {
        return Err(Error::InvalidInput("prediction and measurement batches must be equal and non-empty".into()));
    }
    let mut total = 0.0;
    for (p, m) in pred.iter().zip(meas) {
        if !(p.power > 0.0) || !(m.power > 0.0) {
            return Err(Error::ZeroPower("SMAPE power term"));
        }
        total += lambda_p * smape_term(m.power, p.power) + lambda_tau * smape_term(m.delay_spread, p.delay_spread);
    }
    Ok(total / pred.len() as f64)
}

/// Loss and its derivatives at fixed path geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub loss: f64,
    /// `dL/dv` per region.
    pub d_embeddings: Vec<DVector<f64>>,
    /// `dL/d(sigma, eps_r, S)` per region.
    pub d_params: Vec<[f64; 3]>,
    /// `dL/ds` for the global amplitude scale.
    pub d_scale: f64,
}

struct SnapshotTerm {
    loss: f64,
    d_params: Vec<(u32, [f64; 3])>,
    d_scale: f64,
}

/// One frozen batch entry: a measured snapshot and the paths traced for it.
pub type FrozenSnapshot<'a> = (&'a Snapshot, &'a [PropagationPath]);

/// Exact derivative of [`smape_loss`] through tap features, CIR synthesis,
/// path gains and the embedding read-out, with path geometry held fixed.
/// Measured features come from each snapshot's own MPC list.
pub fn gradients(
    batch: &[FrozenSnapshot<'_>],
    embeddings: &[MaterialEmbedding],
    weights: &ReadoutWeights,
    scale: f64,
    config: &CalibrationConfig,
) -> Result<LossGradient> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty calibration batch".into()));
    }
    let params: Vec<MaterialParams> = embeddings.iter().map(|e| params_from_embedding(e, weights)).collect::<Result<_>>()?;
    let terms: Vec<SnapshotTerm> =
        batch.par_iter().map(|(snap, paths)| snapshot_term(snap, paths, &params, scale, config)).collect::<Result<_>>()?;

    let b = batch.len() as f64;
    let mut loss = 0.0;
    let mut d_scale = 0.0;
    let mut d_params = vec![[0.0; 3]; params.len()];
    // fixed snapshot order keeps the accumulation deterministic
    for t in &terms {
        loss += t.loss / b;
        d_scale += t.d_scale / b;
        for (r, g) in &t.d_params {
            for k in 0..3 {
                d_params[*r as usize][k] += g[k] / b;
            }
        }
    }
    let w = weights.vectors();
    let d_embeddings = params
        .iter()
        .zip(&d_params)
        .map(|(p, g)| {
            let j = readout_derivatives(p);
            &w[0] * (g[0] * j[0]) + &w[1] * (g[1] * j[1]) + &w[2] * (g[2] * j[2])
        })
        .collect();
    Ok(LossGradient { loss, d_embeddings, d_params, d_scale })
}

fn snapshot_term(
    snap: &Snapshot,
    paths: &[PropagationPath],
    params: &[MaterialParams],
    scale: f64,
    config: &CalibrationConfig,
) -> Result<SnapshotTerm> {
    let meas = snap.features(&config.cir)?;
    let spec = &config.cir;
    let mut taps = vec![num_complex::Complex64::new(0.0, 0.0); spec.taps];
    let mut evaluated = Vec::with_capacity(paths.len());
    for p in paths {
        let (g, grads) = path_gain_with_gradient(p, params, snap.freq_hz)?;
        let l = (g.delay * spec.sample_rate).round() as usize;
        if l < spec.taps {
            taps[l] += g.amplitude * scale;
            evaluated.push((l, grads));
        }
    }
    let cir = ChannelImpulseResponse { taps, sample_rate: spec.sample_rate, t0: 0.0 };
    let pred = tap_features(&cir)?;
    let loss = smape_loss(&[pred], &[meas], config.lambda_p, config.lambda_tau)?;

    // dL/d|h_l|^2 for every tap
    let dp = config.lambda_p * smape_slope(meas.power, pred.power);
    let dt = config.lambda_tau * smape_slope(meas.delay_spread, pred.delay_spread);
    let tau_w = delay_spread_weights(&cir, &pred);
    let g: Vec<f64> = tau_w.iter().map(|w| dp + dt * w).collect();

    let d_scale = if scale != 0.0 { cir.taps.iter().zip(&g).map(|(h, g)| g * 2.0 * h.norm_sqr() / scale).sum() } else { 0.0 };
    let mut d_params = Vec::new();
    for (l, grads) in evaluated {
        let hc = cir.taps[l].conj() * scale;
        let k = 2.0 * g[l];
        for gg in grads {
            d_params.push((gg.region, [k * (hc * gg.d_sigma).re, k * (hc * gg.d_eps_r).re, k * (hc * gg.d_scattering).re]));
        }
    }
    Ok(SnapshotTerm { loss, d_params, d_scale })
}
