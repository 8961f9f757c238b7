use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ChannelImpulseResponse, MultipathComponent};
use crate::error::{Error, Result};
use crate::tracer::PathKind;
use crate::util::csv_error;

/// CSV row of an MPC table; angles in degrees, delay in ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcRow {
    pub delay_ns: f64,
    pub aod_az_deg: f64,
    pub aod_el_deg: f64,
    pub aoa_az_deg: f64,
    pub aoa_el_deg: f64,
    pub pathloss_db: f64,
    #[serde(default)]
    pub phase_deg: Option<f64>,
    #[serde(default)]
    pub kind: Option<PathKind>,
}

impl From<&MultipathComponent> for MpcRow {
    fn from(m: &MultipathComponent) -> Self {
        Self {
            delay_ns: m.delay * 1e9,
            aod_az_deg: m.aod_az.to_degrees(),
            aod_el_deg: m.aod_el.to_degrees(),
            aoa_az_deg: m.aoa_az.to_degrees(),
            aoa_el_deg: m.aoa_el.to_degrees(),
            pathloss_db: -10.0 * m.power().log10(),
            phase_deg: Some(m.amplitude.arg().to_degrees()),
            kind: Some(m.kind),
        }
    }
}

impl MpcRow {
    /// Converts back to an MPC; rows without phase get a zero phase.
    /// Rows without a kind are treated as non-LoS.
    pub fn to_mpc(&self) -> Result<MultipathComponent> {
        let vals = [self.delay_ns, self.aod_az_deg, self.aod_el_deg, self.aoa_az_deg, self.aoa_el_deg];
        if vals.iter().any(|v| !v.is_finite()) || self.pathloss_db.is_nan() {
            return Err(Error::InvalidInput("non-finite MPC field".into()));
        }
        if self.delay_ns < 0.0 {
            return Err(Error::InvalidInput(format!("negative MPC delay {} ns", self.delay_ns)));
        }
        let mag = 10f64.powf(-self.pathloss_db / 20.0);
        let phase = self.phase_deg.unwrap_or(0.0).to_radians();
        Ok(MultipathComponent {
            delay: self.delay_ns * 1e-9,
            aod_az: crate::util::wrap_angle(self.aod_az_deg.to_radians()),
            aod_el: self.aod_el_deg.to_radians(),
            aoa_az: crate::util::wrap_angle(self.aoa_az_deg.to_radians()),
            aoa_el: self.aoa_el_deg.to_radians(),
            amplitude: Complex64::from_polar(mag, phase),
            kind: self.kind.unwrap_or(PathKind::Specular),
        })
    }
}

pub fn write_mpcs_csv(mpcs: &[MultipathComponent], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for m in mpcs {
        w.serialize(MpcRow::from(m)).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads an MPC table. The flag reports whether every row carried a phase.
pub fn read_mpcs_csv(path: impl AsRef<Path>) -> Result<(Vec<MultipathComponent>, bool)> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    let mut phased = true;
    for row in r.deserialize::<MpcRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        phased &= row.phase_deg.is_some();
        out.push(row.to_mpc()?);
    }
    Ok((out, phased))
}

#[derive(Serialize)]
struct TapRow {
    tap: usize,
    delay_ns: f64,
    re: f64,
    im: f64,
    power_db: f64,
}

/// Writes the non-zero taps of a CIR.
pub fn write_cir_csv(cir: &ChannelImpulseResponse, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for (l, t) in cir.taps.iter().enumerate().filter(|(_, t)| t.norm_sqr() > 0.0) {
        let row = TapRow {
            tap: l,
            delay_ns: (cir.t0 + l as f64 / cir.sample_rate) * 1e9,
            re: t.re,
            im: t.im,
            power_db: 10.0 * t.norm_sqr().log10(),
        };
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
