use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelImpulseResponse, CirSpec, MpcRow, MultipathComponent};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::metrics::{tap_features, TapFeatures};
use crate::tracer::PathKind;
use crate::util::csv_error;

/// One channel measurement (or prediction) at a fixed TX/RX configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub id: usize,
    pub tx: Vec3,
    pub rx: Vec3,
    pub freq_hz: f64,
    pub mpcs: Vec<MultipathComponent>,
    /// Whether every MPC carries a measured phase.
    pub phased: bool,
}

impl Snapshot {
    pub fn new(id: usize, tx: Vec3, rx: Vec3, freq_hz: f64, mpcs: Vec<MultipathComponent>) -> Self {
        Self { id, tx, rx, freq_hz, mpcs, phased: true }
    }

    /// Index of the MPC tagged as line of sight.
    pub fn los_index(&self) -> Option<usize> {
        self.mpcs.iter().position(|m| m.kind == PathKind::Los)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.freq_hz > 0.0 && self.freq_hz.is_finite()) {
            return Err(Error::InvalidInput(format!("snapshot {}: frequency must be positive", self.id)));
        }
        if self.mpcs.is_empty() {
            return Err(Error::InvalidInput(format!("snapshot {} has no MPCs", self.id)));
        }
        Ok(())
    }

    /// `(P, tau)` of the MPC list rendered to a CIR; MPCs without phase are
    /// combined in power.
    pub fn features(&self, spec: &CirSpec) -> Result<TapFeatures> {
        let cir = ChannelImpulseResponse::from_mpcs(&self.mpcs, spec, self.phased)?;
        tap_features(&cir)
    }
}

/// Flat CSV row: the pose columns repeat on every MPC row of a snapshot.
/// A row with an empty `delay_ns` only declares the pose.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SnapshotRow {
    snapshot: usize,
    tx_x: f64,
    tx_y: f64,
    tx_z: f64,
    rx_x: f64,
    rx_y: f64,
    rx_z: f64,
    freq_ghz: f64,
    delay_ns: Option<f64>,
    aod_az_deg: Option<f64>,
    aod_el_deg: Option<f64>,
    aoa_az_deg: Option<f64>,
    aoa_el_deg: Option<f64>,
    pathloss_db: Option<f64>,
    phase_deg: Option<f64>,
    kind: Option<PathKind>,
}

impl SnapshotRow {
    fn pose(s: &Snapshot) -> Self {
        Self {
            snapshot: s.id,
            tx_x: s.tx.x,
            tx_y: s.tx.y,
            tx_z: s.tx.z,
            rx_x: s.rx.x,
            rx_y: s.rx.y,
            rx_z: s.rx.z,
            freq_ghz: s.freq_hz / 1e9,
            delay_ns: None,
            aod_az_deg: None,
            aod_el_deg: None,
            aoa_az_deg: None,
            aoa_el_deg: None,
            pathloss_db: None,
            phase_deg: None,
            kind: None,
        }
    }

    fn mpc(&self) -> Option<Result<MpcRow>> {
        let delay_ns = self.delay_ns?;
        let missing = || Error::InvalidInput(format!("snapshot {}: incomplete MPC row", self.snapshot));
        Some((|| {
            Ok(MpcRow {
                delay_ns,
                aod_az_deg: self.aod_az_deg.ok_or_else(missing)?,
                aod_el_deg: self.aod_el_deg.ok_or_else(missing)?,
                aoa_az_deg: self.aoa_az_deg.ok_or_else(missing)?,
                aoa_el_deg: self.aoa_el_deg.ok_or_else(missing)?,
                pathloss_db: self.pathloss_db.ok_or_else(missing)?,
                phase_deg: self.phase_deg,
                kind: self.kind,
            })
        })())
    }
}

/// Writes snapshots as one row per MPC (a pose-only row for empty snapshots).
/// Phases are omitted for snapshots flagged as unphased.
pub fn write_snapshots_csv(snapshots: &[Snapshot], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for s in snapshots {
        if s.mpcs.is_empty() {
            w.serialize(SnapshotRow::pose(s)).map_err(|e| csv_error(path, e))?;
        }
        for m in &s.mpcs {
            let r = MpcRow::from(m);
            let row = SnapshotRow {
                delay_ns: Some(r.delay_ns),
                aod_az_deg: Some(r.aod_az_deg),
                aod_el_deg: Some(r.aod_el_deg),
                aoa_az_deg: Some(r.aoa_az_deg),
                aoa_el_deg: Some(r.aoa_el_deg),
                pathloss_db: Some(r.pathloss_db),
                phase_deg: r.phase_deg.filter(|_| s.phased),
                kind: r.kind,
                ..SnapshotRow::pose(s)
            };
            w.serialize(row).map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a snapshot table, grouping rows by snapshot id (ascending).
pub fn read_snapshots_csv(path: impl AsRef<Path>) -> Result<Vec<Snapshot>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut groups: BTreeMap<usize, Snapshot> = BTreeMap::new();
    for (line, row) in r.deserialize::<SnapshotRow>().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let ctx = || format!("{} row {}", path.display(), line + 2);
        let tx = Vec3::new(row.tx_x, row.tx_y, row.tx_z);
        let rx = Vec3::new(row.rx_x, row.rx_y, row.rx_z);
        let freq_hz = row.freq_ghz * 1e9;
        if !(freq_hz > 0.0 && freq_hz.is_finite()) {
            return Err(Error::parse(ctx(), "frequency must be positive"));
        }
        let snap = groups.entry(row.snapshot).or_insert_with(|| Snapshot::new(row.snapshot, tx, rx, freq_hz, Vec::new()));
        if snap.tx != tx || snap.rx != rx || snap.freq_hz != freq_hz {
            return Err(Error::parse(ctx(), format!("inconsistent pose for snapshot {}", row.snapshot)));
        }
        if let Some(mpc) = row.mpc() {
            let mpc = mpc?;
            snap.phased &= mpc.phase_deg.is_some();
            snap.mpcs.push(mpc.to_mpc().map_err(|e| Error::parse(ctx(), e.to_string()))?);
        }
    }
    Ok(groups.into_values().collect())
}
