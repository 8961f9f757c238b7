use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::gain::path_gain;
use crate::error::{Error, Result};
use crate::materials::MaterialParams;
use crate::tracer::{PathKind, PropagationPath};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultipathComponent {
    /// Delay (s).
    pub delay: f64,
    /// Departure azimuth and elevation (rad).
    pub aod_az: f64,
    pub aod_el: f64,
    /// Arrival azimuth and elevation (rad).
    pub aoa_az: f64,
    pub aoa_el: f64,
    /// Complex amplitude (linear field units).
    pub amplitude: Complex64,
    pub kind: PathKind,
}

impl MultipathComponent {
    pub fn power(&self) -> f64 {
        self.amplitude.norm_sqr()
    }
}

/// Tapped channel impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelImpulseResponse {
    pub taps: Vec<Complex64>,
    /// Sample rate W (Hz).
    pub sample_rate: f64,
    /// Delay of tap 0 (s).
    pub t0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CirSpec {
    pub sample_rate: f64,
    pub taps: usize,
}

impl Default for CirSpec {
    fn default() -> Self {
        Self { sample_rate: 2e9, taps: 1024 }
    }
}

impl ChannelImpulseResponse {
    /// Nearest-tap binning of MPCs (`l = round(tau W)`). Coherent mode sums
    /// complex amplitudes; power mode sums powers and stores the square root,
    /// for measurements without phase. MPCs beyond the last tap are dropped.
    pub fn from_mpcs(mpcs: &[MultipathComponent], spec: &CirSpec, coherent: bool) -> Result<Self> {
        if !(spec.sample_rate > 0.0) || spec.taps == 0 {
            return Err(Error::InvalidInput("CIR needs a positive sample rate and at least one tap".into()));
        }
        let mut taps = vec![Complex64::new(0.0, 0.0); spec.taps];
        let mut power = vec![0.0; spec.taps];
        let mut dropped = 0;
        for m in mpcs {
            if !(m.delay >= 0.0) {
                return Err(Error::InvalidInput(format!("negative delay {}", m.delay)));
            }
            let l = (m.delay * spec.sample_rate).round() as usize;
            if l >= spec.taps {
                dropped += 1;
                continue;
            }
            taps[l] += m.amplitude;
            power[l] += m.power();
        }
        if dropped > 0 {
            log::warn!("{dropped} MPC(s) beyond the last CIR tap dropped");
        }
        if !coherent {
            for (t, p) in taps.iter_mut().zip(power) {
                *t = Complex64::new(p.sqrt(), 0.0);
            }
        }
        Ok(Self { taps, sample_rate: spec.sample_rate, t0: 0.0 })
    }

    pub fn power(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_sqr()).sum()
    }
}

/// Global amplitude scale tracked by an exponential moving average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleState {
    pub scale: f64,
    pub beta: f64,
}

impl Default for ScaleState {
    fn default() -> Self {
        Self { scale: 1.0, beta: 0.9 }
    }
}

impl ScaleState {
    pub fn new(scale: f64, beta: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) || !(0.0..1.0).contains(&beta) {
            return Err(Error::InvalidInput(format!("invalid scale state (s = {scale}, beta = {beta})")));
        }
        Ok(Self { scale, beta })
    }

    /// Instantaneous amplitude scale matching mean LoS powers; `predicted`
    /// must be unscaled.
    pub fn instantaneous(predicted: &[f64], measured: &[f64]) -> Result<f64> {
        if predicted.is_empty() || measured.is_empty() {
            return Err(Error::InvalidInput("scale calibration needs at least one LoS pair".into()));
        }
        let mp = predicted.iter().sum::<f64>() / predicted.len() as f64;
        let mm = measured.iter().sum::<f64>() / measured.len() as f64;
        if !(mp > 0.0) {
            return Err(Error::ZeroPower("predicted LoS power"));
        }
        if !(mm > 0.0) {
            return Err(Error::ZeroPower("measured LoS power"));
        }
        Ok((mm / mp).sqrt())
    }

    /// `s <- beta s + (1 - beta) s*` from LoS MPC powers; returns `s*`.
    pub fn update(&mut self, predicted_los: &[f64], measured_los: &[f64]) -> Result<f64> {
        let target = Self::instantaneous(predicted_los, measured_los)?;
        self.scale = self.beta * self.scale + (1.0 - self.beta) * target;
        Ok(target)
    }
}

/// Convenience form of [`ScaleState::update`] over MPC lists.
pub fn calibrate_scale(predicted_los: &[MultipathComponent], measured_los: &[MultipathComponent], state: &mut ScaleState) -> Result<f64> {
    let p: Vec<f64> = predicted_los.iter().map(MultipathComponent::power).collect();
    let m: Vec<f64> = measured_los.iter().map(MultipathComponent::power).collect();
    state.update(&p, &m)
}

/// One MPC per path (amplitude times `scale`), plus the CIR when requested.
pub fn synthesize(
    paths: &[PropagationPath],
    materials: &[MaterialParams],
    freq_hz: f64,
    scale: f64,
    cir: Option<&CirSpec>,
) -> Result<(Vec<MultipathComponent>, Option<ChannelImpulseResponse>)> {
    let mpcs = paths
        .iter()
        .map(|p| {
            let g = path_gain(p, materials, freq_hz)?;
            Ok(MultipathComponent {
                delay: g.delay,
                aod_az: g.aod.0,
                aod_el: g.aod.1,
                aoa_az: g.aoa.0,
                aoa_el: g.aoa.1,
                amplitude: g.amplitude * scale,
                kind: p.kind,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cir = cir.map(|spec| ChannelImpulseResponse::from_mpcs(&mpcs, spec, true)).transpose()?;
    Ok((mpcs, cir))
}
