//! Beam-codebook evaluation against MPC sets, SNR-to-rate mapping and
//! throughput-maximising beam selection.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::MultipathComponent;
use crate::error::{Error, Result};
use crate::util::{csv_error, power_from_db, wrap_angle};

const DEFAULT_BUDGET: &str = include_str!("../../data/link_budget_80211ad.toml");

/// Sectored receive codebook: flat mainlobe gain within half the beamwidth of
/// the boresight azimuth, floor gain elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamCodebook {
    /// Boresight azimuths (rad) in (-pi, pi].
    pub boresights: Vec<f64>,
    pub g_max_dbi: f64,
    pub g_min_dbi: f64,
    /// Full mainlobe width (rad).
    pub beamwidth: f64,
}

impl Default for BeamCodebook {
    fn default() -> Self {
        Self::sectored(8, 15.0, -10.0, 30f64.to_radians())
    }
}

impl BeamCodebook {
    /// `n` boresights evenly spaced from 0.
    pub fn sectored(n: usize, g_max_dbi: f64, g_min_dbi: f64, beamwidth: f64) -> Self {
        let boresights = (0..n).map(|k| wrap_angle(std::f64::consts::TAU * k as f64 / n as f64)).collect();
        Self { boresights, g_max_dbi, g_min_dbi, beamwidth }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("codebook: {m}")));
        if self.boresights.is_empty() {
            return bad("at least one beam is required");
        }
        if !(self.g_max_dbi > self.g_min_dbi) {
            return bad("mainlobe gain must exceed the floor gain");
        }
        if !(self.beamwidth > 0.0 && self.beamwidth.is_finite()) {
            return bad("beamwidth must be positive");
        }
        if self.boresights.iter().any(|b| !(b.is_finite() && *b > -std::f64::consts::PI && *b <= std::f64::consts::PI)) {
            return bad("boresights must lie in (-pi, pi]");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.boresights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boresights.is_empty()
    }

    /// Linear power gain of `beam` toward azimuth `az`.
    pub fn gain_linear(&self, beam: usize, az: f64) -> f64 {
        let off = wrap_angle(az - self.boresights[beam]).abs();
        power_from_db(if off <= 0.5 * self.beamwidth { self.g_max_dbi } else { self.g_min_dbi })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cb: Self = toml::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        cb.validate()?;
        Ok(cb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    pub index: u32,
    pub snr_db: f64,
    pub rate_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub thermal_noise_dbm_hz: f64,
    pub mac_efficiency: f64,
    pub mcs: Vec<McsEntry>,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self::parse(DEFAULT_BUDGET).expect("bundled link budget is valid")
    }
}

impl LinkBudget {
    pub fn parse(text: &str) -> Result<Self> {
        let b: Self = toml::from_str(text).map_err(|e| Error::parse("link budget", e.to_string()))?;
        b.validate()?;
        Ok(b)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("link budget: {m}")));
        if !(self.bandwidth_hz > 0.0) {
            return bad("bandwidth must be positive");
        }
        if !(self.mac_efficiency > 0.0 && self.mac_efficiency <= 1.0) {
            return bad("MAC efficiency must lie in (0, 1]");
        }
        if self.mcs.is_empty() {
            return bad("empty MCS table");
        }
        if self.mcs.windows(2).any(|w| !(w[1].snr_db > w[0].snr_db && w[1].rate_mbps > w[0].rate_mbps)) {
            return bad("MCS thresholds and rates must strictly increase");
        }
        Ok(())
    }

    /// `-174 + 10 log10(B) + NF` (dBm).
    pub fn noise_floor_dbm(&self) -> f64 {
        self.thermal_noise_dbm_hz + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
    }
}

/// Effective power gain of one beam. Coherent mode sums complex amplitudes
/// weighted by the amplitude pattern; power mode sums weighted powers (for
/// measurements without phase).
pub fn effective_gain(mpcs: &[MultipathComponent], codebook: &BeamCodebook, beam: usize, coherent: bool) -> f64 {
    if coherent {
        mpcs.iter().map(|m| m.amplitude * codebook.gain_linear(beam, m.aoa_az).sqrt()).sum::<Complex64>().norm_sqr()
    } else {
        mpcs.iter().map(|m| m.power() * codebook.gain_linear(beam, m.aoa_az)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateOutcome {
    pub snr_db: f64,
    /// Selected MCS index; 0 below the lowest threshold.
    pub mcs: u32,
    pub rate_mbps: f64,
    pub throughput_mbps: f64,
}

pub fn snr_and_rate(gain_linear: f64, budget: &LinkBudget) -> RateOutcome {
    let snr_db = budget.tx_power_dbm + 10.0 * gain_linear.log10() - budget.noise_floor_dbm();
    match budget.mcs.iter().rev().find(|m| m.snr_db <= snr_db) {
        Some(m) => RateOutcome { snr_db, mcs: m.index, rate_mbps: m.rate_mbps, throughput_mbps: m.rate_mbps * budget.mac_efficiency },
        None => RateOutcome { snr_db, mcs: 0, rate_mbps: 0.0, throughput_mbps: 0.0 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamChoice {
    pub beam: usize,
    pub gain: f64,
    pub outcome: RateOutcome,
}

/// Throughput-maximising beam; ties go to the lowest index.
pub fn select_beam(mpcs: &[MultipathComponent], codebook: &BeamCodebook, budget: &LinkBudget, coherent: bool) -> Result<BeamChoice> {
    if codebook.is_empty() {
        return Err(Error::InvalidInput("empty codebook".into()));
    }
    let mut best: Option<BeamChoice> = None;
    for beam in 0..codebook.len() {
        let gain = effective_gain(mpcs, codebook, beam, coherent);
        let outcome = snr_and_rate(gain, budget);
        if best.is_none_or(|b| outcome.throughput_mbps > b.outcome.throughput_mbps) {
            best = Some(BeamChoice { beam, gain, outcome });
        }
    }
    Ok(best.expect("non-empty codebook"))
}

#[derive(Serialize)]
struct SelectionRow {
    snapshot: usize,
    beam: usize,
    boresight_deg: f64,
    snr_db: f64,
    mcs: u32,
    rate_mbps: f64,
    throughput_mbps: f64,
}

pub fn write_selection_csv(rows: &[(usize, BeamChoice)], codebook: &BeamCodebook, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for (snapshot, c) in rows {
        w.serialize(SelectionRow {
            snapshot: *snapshot,
            beam: c.beam,
            boresight_deg: codebook.boresights[c.beam].to_degrees(),
            snr_db: c.outcome.snr_db,
            mcs: c.outcome.mcs,
            rate_mbps: c.outcome.rate_mbps,
            throughput_mbps: c.outcome.throughput_mbps,
        })
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
