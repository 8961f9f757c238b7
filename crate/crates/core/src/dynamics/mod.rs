//! Moving-entity proxies, dirty-region tracking and incremental retracing.

mod proxy;
mod retrace;

pub use proxy::{insert_proxy, move_proxy, DirtyRegion, Pose, ProxyObject, ProxyShape, DIRTY_MARGIN};
pub use retrace::{invalidate_and_retrace, invalidated_paths, RetraceOutcome};

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::path_gain;
use crate::error::{Error, Result};
use crate::geometry::{Scene, Vec3};
use crate::materials::MaterialParams;
use crate::metrics::shadow_loss;
use crate::tracer::{trace_link, PropagationPath, TraceConfig};
use crate::util::csv_error;

/// One trajectory sample; `yaw` is in degrees in files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t_s: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

impl TrajectoryPoint {
    pub fn pose(&self) -> Pose {
        Pose { position: Vec3::new(self.x, self.y, self.z), yaw: self.yaw.to_radians() }
    }
}

pub fn read_trajectory_csv(path: impl AsRef<Path>) -> Result<Vec<TrajectoryPoint>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let pts = r.deserialize().collect::<std::result::Result<Vec<TrajectoryPoint>, _>>().map_err(|e| csv_error(path, e))?;
    if pts.is_empty() {
        return Err(Error::InvalidInput(format!("{}: empty trajectory", path.display())));
    }
    if pts.windows(2).any(|w| !(w[1].t_s > w[0].t_s)) {
        return Err(Error::parse(path.display().to_string(), "timestamps must increase"));
    }
    Ok(pts)
}

pub fn write_trajectory_csv(points: &[TrajectoryPoint], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for p in points {
        w.serialize(p).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Coherent received field (sum of complex path amplitudes).
pub fn received_field(paths: &[PropagationPath], materials: &[MaterialParams], freq_hz: f64) -> Result<Complex64> {
    paths.iter().map(|p| path_gain(p, materials, freq_hz).map(|g| g.amplitude)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepStep {
    pub step: usize,
    pub t_s: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// `20 log10(|E_ref| / |E|)` against the link without the proxy.
    pub shadow_loss_db: f64,
    pub paths: usize,
    pub reshot: usize,
    pub invalidated: usize,
}

/// Walks a proxy along a trajectory and retraces the link incrementally at
/// every step. `materials` covers the static regions; the proxy region takes
/// `proxy_material`. Returns the per-step shadow loss and the final trace.
#[allow(clippy::too_many_arguments)]
pub fn shadow_loss_sweep(
    scene: &Scene,
    proxy: &ProxyObject,
    proxy_material: MaterialParams,
    trajectory: &[TrajectoryPoint],
    (tx, rx): (Vec3, Vec3),
    materials: &[MaterialParams],
    freq_hz: f64,
    config: &TraceConfig,
    mut on_step: impl FnMut(usize, &Scene, &[PropagationPath]) -> Result<()>,
) -> Result<Vec<SweepStep>> {
    if trajectory.is_empty() {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }
    if materials.len() < scene.region_count() {
        return Err(Error::InvalidInput("materials do not cover every region".into()));
    }
    let base = trace_link(scene, tx, rx, config)?;
    let e_ref = received_field(&base.paths, materials, freq_hz)?.norm();
    let mut all: Vec<MaterialParams> = materials[..scene.region_count()].to_vec();
    all.push(proxy_material);

    let mut out = Vec::with_capacity(trajectory.len());
    let mut current: Option<(Scene, u32)> = None;
    let mut cached = base;
    for (step, tp) in trajectory.iter().enumerate() {
        let (next, region, dirty) = match &current {
            None => {
                let placed = proxy.with_pose(tp.pose());
                insert_proxy(scene, &placed, None)?
            }
            Some((s, region)) => {
                let (n, d) = move_proxy(s, *region, proxy, tp.pose())?;
                (n, *region, d)
            }
        };
        let outcome = invalidate_and_retrace(&next, &cached, &dirty)?;
        on_step(step, &next, &outcome.trace.paths)?;
        let e = received_field(&outcome.trace.paths, &all, freq_hz)?.norm();
        out.push(SweepStep {
            step,
            t_s: tp.t_s,
            x: tp.x,
            y: tp.y,
            z: tp.z,
            shadow_loss_db: shadow_loss(e_ref, e)?,
            paths: outcome.trace.paths.len(),
            reshot: outcome.reshot,
            invalidated: outcome.invalidated,
        });
        cached = outcome.trace;
        current = Some((next, region));
    }
    Ok(out)
}

pub fn write_sweep_csv(steps: &[SweepStep], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for s in steps {
        w.serialize(s).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
