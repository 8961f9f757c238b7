//! Snapshot-level channel metrics, CIR tap features, shadow loss and
//! delay/angle cluster matching.

mod assignment;

pub use assignment::hungarian;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelImpulseResponse, MultipathComponent};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Which end of the link the angular spread is computed on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleSide {
    #[default]
    Arrival,
    Departure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotMetrics {
    /// `-10 log10(sum P)`.
    pub path_loss_db: f64,
    /// RMS delay spread (s).
    pub tau_rms: f64,
    /// Azimuth angular spread (rad).
    pub angular_spread: f64,
    /// Rician K-factor (dB); absent without a LoS component.
    pub k_factor_db: Option<f64>,
}

impl SnapshotMetrics {
    pub fn angular_spread_deg(&self) -> f64 {
        self.angular_spread.to_degrees()
    }
}

pub fn snapshot_metrics(mpcs: &[MultipathComponent], los_index: Option<usize>, side: AngleSide) -> Result<SnapshotMetrics> {
    let total: f64 = mpcs.iter().map(MultipathComponent::power).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroPower("snapshot MPC powers"));
    }
    let mean_tau = mpcs.iter().map(|m| m.power() * m.delay).sum::<f64>() / total;
    let var = mpcs.iter().map(|m| m.power() * (m.delay - mean_tau).powi(2)).sum::<f64>() / total;
    let phi: Vec<f64> = mpcs
        .iter()
        .map(|m| match side {
            AngleSide::Arrival => m.aoa_az,
            AngleSide::Departure => m.aod_az,
        })
        .collect();
    let angular_spread = angular_spread(mpcs, &phi, total);
    let k_factor_db = match los_index {
        Some(i) => {
            let los = mpcs.get(i).ok_or_else(|| Error::InvalidInput(format!("LoS index {i} out of range")))?.power();
            Some(10.0 * (los / (total - los)).log10())
        }
        None => None,
    };
    Ok(SnapshotMetrics { path_loss_db: -10.0 * total.log10(), tau_rms: var.max(0.0).sqrt(), angular_spread, k_factor_db })
}

/// Above this many MPCs the pairwise form gives way to the direct phasor sum.
const PAIRWISE_LIMIT: usize = 2048;

/// `sqrt(-2 ln r)` with `r = |sum P e^{j phi}| / sum P`. For moderate sizes
/// `1 - r^2 = sum_ij P_i P_j 2 sin^2((phi_i - phi_j) / 2) / (sum P)^2` is used,
/// which stays accurate when the spread is tiny and `r` is close to 1.
fn angular_spread(mpcs: &[MultipathComponent], phi: &[f64], total: f64) -> f64 {
    let q = if mpcs.len() <= PAIRWISE_LIMIT {
        let mut d = 0.0;
        for i in 0..mpcs.len() {
            for j in i + 1..mpcs.len() {
                let s = ((phi[i] - phi[j]) * 0.5).sin();
                d += mpcs[i].power() * mpcs[j].power() * s * s;
            }
        }
        (4.0 * d / (total * total)).min(1.0)
    } else {
        let phasor: Complex64 = mpcs.iter().zip(phi).map(|(m, &p)| Complex64::from_polar(m.power(), p)).sum();
        1.0 - (phasor.norm() / total).min(1.0).powi(2)
    };
    (-(-q).ln_1p()).max(0.0).sqrt()
}

/// Received power and delay spread of a CIR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapFeatures {
    /// `P_d = sum |h[l]|^2`.
    pub power: f64,
    /// Power-weighted mean tap index.
    pub mean_tap: f64,
    /// RMS delay spread (s).
    pub delay_spread: f64,
}

pub fn tap_features(cir: &ChannelImpulseResponse) -> Result<TapFeatures> {
    if !(cir.sample_rate > 0.0) {
        return Err(Error::InvalidInput("CIR sample rate must be positive".into()));
    }
    let w: Vec<f64> = cir.taps.iter().map(|h| h.norm_sqr()).collect();
    let power: f64 = w.iter().sum();
    if !(power > 0.0) {
        return Err(Error::ZeroPower("CIR taps"));
    }
    let mean_tap = w.iter().enumerate().map(|(l, x)| l as f64 * x).sum::<f64>() / power;
    let var = w.iter().enumerate().map(|(l, x)| (l as f64 - mean_tap).powi(2) * x).sum::<f64>() / power;
    Ok(TapFeatures { power, mean_tap, delay_spread: var.max(0.0).sqrt() / cir.sample_rate })
}

/// `d tau_d / d |h[l]|^2` for every tap (zero when the spread vanishes).
pub(crate) fn delay_spread_weights(cir: &ChannelImpulseResponse, f: &TapFeatures) -> Vec<f64> {
    if f.delay_spread == 0.0 {
        return vec![0.0; cir.taps.len()];
    }
    let var_taps = (f.delay_spread * cir.sample_rate).powi(2);
    let w2 = cir.sample_rate * cir.sample_rate;
    (0..cir.taps.len()).map(|l| (((l as f64 - f.mean_tap).powi(2) - var_taps) / (w2 * f.power)) / (2.0 * f.delay_spread)).collect()
}

/// `20 log10(|E_los| / |E_rx|)`; positive when the link is attenuated.
pub fn shadow_loss(e_los: f64, e_rx: f64) -> Result<f64> {
    if !(e_los.abs() > 0.0) || !(e_rx.abs() > 0.0) {
        return Err(Error::ZeroPower("shadow-loss field magnitude"));
    }
    Ok(20.0 * (e_los.abs() / e_rx.abs()).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterGates {
    /// Delay gate (s).
    pub delay: f64,
    /// Arrival-angle gate (rad).
    pub angle: f64,
}

impl Default for ClusterGates {
    fn default() -> Self {
        Self { delay: 5e-9, angle: 10f64.to_radians() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub pred: usize,
    pub meas: usize,
    /// Predicted minus measured delay (s).
    pub delay_error: f64,
    /// Great-circle distance between arrival directions (rad).
    pub angle_error: f64,
    /// Predicted minus measured power (dB).
    pub power_error_db: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusterMatchReport {
    pub pairs: Vec<MatchedPair>,
    pub misses: usize,
    pub false_alarms: usize,
}

fn direction(az: f64, el: f64) -> Vec3 {
    Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
}

/// Great-circle angle between the arrival directions of two MPCs.
pub fn arrival_separation(a: &MultipathComponent, b: &MultipathComponent) -> f64 {
    let (u, v) = (direction(a.aoa_az, a.aoa_el), direction(b.aoa_az, b.aoa_el));
    u.cross(&v).norm().atan2(u.dot(&v))
}

/// Minimum-cost one-to-one matching of predicted to measured MPCs.
///
/// Pairs are admissible when both the delay and the arrival-angle difference
/// lie within the gates; an admissible pair costs
/// `|dtau| / gate_tau + dangle / gate_angle` (at most 2), and leaving an MPC
/// unmatched costs 1, so matching is never worse than leaving both sides open.
pub fn cluster_match(pred: &[MultipathComponent], meas: &[MultipathComponent], gates: &ClusterGates) -> Result<ClusterMatchReport> {
    if !(gates.delay > 0.0) || !(gates.angle > 0.0) {
        return Err(Error::InvalidInput("cluster gates must be positive".into()));
    }
    let (n, m) = (pred.len(), meas.len());
    let size = n + m;
    const FORBIDDEN: f64 = 1e9;
    const UNMATCHED: f64 = 1.0;
    let mut cost = vec![vec![FORBIDDEN; size]; size];
    for (i, p) in pred.iter().enumerate() {
        for (j, q) in meas.iter().enumerate() {
            let dt = (p.delay - q.delay).abs();
            let da = arrival_separation(p, q);
            if dt <= gates.delay && da <= gates.angle {
                cost[i][j] = dt / gates.delay + da / gates.angle;
            }
        }
        cost[i][m + i] = UNMATCHED;
    }
    for j in 0..m {
        cost[n + j][j] = UNMATCHED;
        for l in 0..n {
            cost[n + j][m + l] = 0.0;
        }
    }
    let assign = hungarian(&cost);
    let mut report = ClusterMatchReport::default();
    for (i, &j) in assign.iter().enumerate().take(n) {
        if j < m && cost[i][j] < FORBIDDEN {
            report.pairs.push(MatchedPair {
                pred: i,
                meas: j,
                delay_error: pred[i].delay - meas[j].delay,
                angle_error: arrival_separation(&pred[i], &meas[j]),
                power_error_db: 10.0 * (pred[i].power() / meas[j].power()).log10(),
            });
        }
    }
    report.false_alarms = n - report.pairs.len();
    report.misses = m - report.pairs.len();
    Ok(report)
}

#[derive(Serialize)]
struct MetricsRow {
    snapshot: usize,
    path_loss_db: f64,
    tau_rms_ns: f64,
    angular_spread_deg: f64,
    k_factor_db: Option<f64>,
}

/// One row per snapshot: `snapshot,path_loss_db,tau_rms_ns,angular_spread_deg,k_factor_db`.
pub fn write_metrics_csv(rows: &[(usize, SnapshotMetrics)], path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| crate::util::csv_error(path, e))?;
    for (snapshot, m) in rows {
        w.serialize(MetricsRow {
            snapshot: *snapshot,
            path_loss_db: m.path_loss_db,
            tau_rms_ns: m.tau_rms * 1e9,
            angular_spread_deg: m.angular_spread_deg(),
            k_factor_db: m.k_factor_db,
        })
        .map_err(|e| crate::util::csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct PairRow {
    snapshot: usize,
    pred: usize,
    meas: usize,
    delay_error_ns: f64,
    angle_error_deg: f64,
    power_error_db: f64,
}

/// Matched-pair table across snapshots.
pub fn write_cluster_csv(reports: &[(usize, ClusterMatchReport)], path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| crate::util::csv_error(path, e))?;
    for (snapshot, r) in reports {
        for p in &r.pairs {
            w.serialize(PairRow {
                snapshot: *snapshot,
                pred: p.pred,
                meas: p.meas,
                delay_error_ns: p.delay_error * 1e9,
                angle_error_deg: p.angle_error.to_degrees(),
                power_error_db: p.power_error_db,
            })
            .map_err(|e| crate::util::csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
