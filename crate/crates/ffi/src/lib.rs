//! C ABI over the mmtwin engine.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free`. Every fallible call returns an [`MmtStatus`]; on failure
//! a description is kept per thread and can be copied out with
//! [`mmt_last_error_message`]. Angles are radians, delays seconds, positions
//! metres.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mmtwin::beamsel::{select_beam, BeamCodebook, LinkBudget};
use mmtwin::channel::{synthesize, MultipathComponent};
use mmtwin::geometry::{load_mesh, Scene, SceneBuilder, Vec3};
use mmtwin::materials::{MaterialDb, MaterialParams};
use mmtwin::metrics::{snapshot_metrics, AngleSide};
use mmtwin::tracer::{trace_paths, PathKind, TraceConfig};
use mmtwin::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    NotFound = 5,
    Numeric = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmtPathKind {
    Los = 0,
    Specular = 1,
    Scattered = 2,
}

/// Ray-launching options; start from [`mmt_trace_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MmtTraceOptions {
    pub n_rays: usize,
    pub max_depth: u32,
    pub seed: u64,
    pub frequency_hz: f64,
}

/// One multipath component.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MmtMpc {
    pub delay_s: f64,
    pub aod_az: f64,
    pub aod_el: f64,
    pub aoa_az: f64,
    pub aoa_el: f64,
    pub amplitude_re: f64,
    pub amplitude_im: f64,
    pub kind: MmtPathKind,
}

/// Snapshot metrics; `has_k_factor` is 0 when there is no LoS component.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MmtMetrics {
    pub path_loss_db: f64,
    pub tau_rms_s: f64,
    pub angular_spread_rad: f64,
    pub k_factor_db: f64,
    pub has_k_factor: u8,
}

/// Scene geometry plus one material per surface region.
pub struct MmtScene {
    scene: Scene,
    materials: Vec<MaterialParams>,
}

/// Multipath components of one traced link.
pub struct MmtChannel {
    mpcs: Vec<MultipathComponent>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> MmtStatus {
    match err {
        Error::Io { .. } => MmtStatus::Io,
        Error::Parse { .. } | Error::EmptyMesh | Error::MissingRegionMapping(_) => MmtStatus::Parse,
        Error::UnknownLabel(_) | Error::UnknownRegion(_) => MmtStatus::NotFound,
        Error::ZeroPower(_) | Error::Grazing(_) | Error::Diverged { .. } => MmtStatus::Numeric,
        _ => MmtStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (MmtStatus, String)>) -> MmtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MmtStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MmtStatus::Panic
        }
    }
}

fn lib<T>(r: mmtwin::Result<T>) -> Result<T, (MmtStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (MmtStatus, String) {
    (MmtStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (MmtStatus, String) {
    (MmtStatus::InvalidArgument, msg.into())
}

unsafe fn point(p: *const f64, what: &str) -> Result<Vec3, (MmtStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = std::slice::from_raw_parts(p, 3);
    Ok(Vec3::new(s[0], s[1], s[2]))
}

/// Default materials: database entry for each region label, concrete otherwise.
fn default_materials(scene: &Scene) -> Vec<MaterialParams> {
    let db = MaterialDb::default_60ghz();
    let concrete = db.lookup("concrete").expect("bundled concrete entry").nominal_params();
    (0..scene.region_count() as u32)
        .map(|r| scene.region_label(r).and_then(|l| db.lookup(l).ok()).map_or(concrete, |m| m.nominal_params()))
        .collect()
}

/// NUL-terminated library version string (static storage).
#[no_mangle]
pub extern "C" fn mmt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// NUL-terminated) and returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mmt_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

#[no_mangle]
pub extern "C" fn mmt_trace_options_default() -> MmtTraceOptions {
    let d = TraceConfig::default();
    MmtTraceOptions { n_rays: d.n_rays, max_depth: d.max_depth, seed: d.rng_seed, frequency_hz: 60.5e9 }
}

/// Loads a PLY mesh (regions from a face property or `<path>.regions`).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmt_scene_load(path: *const c_char, out: *mut *mut MmtScene) -> MmtStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = CStr::from_ptr(path).to_str().map_err(|e| invalid(format!("path is not UTF-8: {e}")))?;
        let (scene, _) = lib(load_mesh(path))?;
        let materials = default_materials(&scene);
        *out = Box::into_raw(Box::new(MmtScene { scene, materials }));
        Ok(())
    })
}

/// Builds a scene from `n_triangles` triangles: `vertices` holds 9 doubles per
/// triangle, `regions` one id per triangle. Degenerate triangles are dropped;
/// zero triangles give free space.
///
/// # Safety
/// `vertices` must hold `9 * n_triangles` doubles, `regions` `n_triangles`
/// ids; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmt_scene_from_triangles(
    vertices: *const f64,
    regions: *const u32,
    n_triangles: usize,
    out: *mut *mut MmtScene,
) -> MmtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if n_triangles > 0 && (vertices.is_null() || regions.is_null()) {
            return Err(null("vertices/regions"));
        }
        let scene = if n_triangles == 0 {
            Scene::empty()
        } else {
            let mut b = SceneBuilder::new();
            let v = std::slice::from_raw_parts(vertices, 9 * n_triangles);
            let r = std::slice::from_raw_parts(regions, n_triangles);
            for (t, &region) in v.chunks_exact(9).zip(r) {
                let p = |k: usize| Vec3::new(t[3 * k], t[3 * k + 1], t[3 * k + 2]);
                b.add_triangle(p(0), p(1), p(2), region);
            }
            lib(b.build())?.0
        };
        let materials = default_materials(&scene);
        *out = Box::into_raw(Box::new(MmtScene { scene, materials }));
        Ok(())
    })
}

/// # Safety
/// `scene` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mmt_scene_free(scene: *mut MmtScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Number of surface regions (0 for a null handle).
///
/// # Safety
/// `scene` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mmt_scene_region_count(scene: *const MmtScene) -> usize {
    scene.as_ref().map_or(0, |s| s.scene.region_count())
}

/// Sets the material of one region (`sigma` S/m, relative permittivity,
/// scattering coefficient in (0, 1)).
///
/// # Safety
/// `scene` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mmt_scene_set_material(scene: *mut MmtScene, region: u32, sigma: f64, eps_r: f64, scattering: f64) -> MmtStatus {
    guard(|| {
        let s = scene.as_mut().ok_or_else(|| null("scene"))?;
        let p = MaterialParams::new(sigma, eps_r, scattering);
        if !(p.is_physical() && scattering < 1.0) {
            return Err(invalid(format!("unphysical material ({sigma}, {eps_r}, {scattering})")));
        }
        let slot = s.materials.get_mut(region as usize).ok_or_else(|| (MmtStatus::NotFound, Error::UnknownRegion(region).to_string()))?;
        *slot = p;
        Ok(())
    })
}

/// Traces one link and synthesises its multipath components.
///
/// # Safety
/// `scene` must be a live handle, `tx`/`rx` point to 3 doubles, `options` is
/// null (defaults) or valid, `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmt_trace(
    scene: *const MmtScene,
    options: *const MmtTraceOptions,
    tx: *const f64,
    rx: *const f64,
    out: *mut *mut MmtChannel,
) -> MmtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let s = scene.as_ref().ok_or_else(|| null("scene"))?;
        let opts = options.as_ref().copied().unwrap_or_else(|| mmt_trace_options_default());
        let (tx, rx) = (point(tx, "tx")?, point(rx, "rx")?);
        if !(opts.frequency_hz > 0.0 && opts.frequency_hz.is_finite()) {
            return Err(invalid("frequency must be positive"));
        }
        let config = TraceConfig { n_rays: opts.n_rays, max_depth: opts.max_depth, rng_seed: opts.seed, ..TraceConfig::default() };
        let paths = lib(trace_paths(&s.scene, tx, rx, &config))?;
        let (mpcs, _) = lib(synthesize(&paths, &s.materials, opts.frequency_hz, 1.0, None))?;
        *out = Box::into_raw(Box::new(MmtChannel { mpcs }));
        Ok(())
    })
}

/// # Safety
/// `channel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mmt_channel_free(channel: *mut MmtChannel) {
    if !channel.is_null() {
        drop(Box::from_raw(channel));
    }
}

/// # Safety
/// `channel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mmt_channel_len(channel: *const MmtChannel) -> usize {
    channel.as_ref().map_or(0, |c| c.mpcs.len())
}

/// Copies MPC `index` into `out`.
///
/// # Safety
/// `channel` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmt_channel_get(channel: *const MmtChannel, index: usize, out: *mut MmtMpc) -> MmtStatus {
    guard(|| {
        let c = channel.as_ref().ok_or_else(|| null("channel"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let m = c.mpcs.get(index).ok_or_else(|| invalid(format!("index {index} out of range ({} MPCs)", c.mpcs.len())))?;
        *out = MmtMpc {
            delay_s: m.delay,
            aod_az: m.aod_az,
            aod_el: m.aod_el,
            aoa_az: m.aoa_az,
            aoa_el: m.aoa_el,
            amplitude_re: m.amplitude.re,
            amplitude_im: m.amplitude.im,
            kind: match m.kind {
                PathKind::Los => MmtPathKind::Los,
                PathKind::Specular => MmtPathKind::Specular,
                PathKind::Scattered => MmtPathKind::Scattered,
            },
        };
        Ok(())
    })
}

/// Path loss, RMS delay spread, arrival angular spread and K-factor.
///
/// # Safety
/// `channel` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmt_channel_metrics(channel: *const MmtChannel, out: *mut MmtMetrics) -> MmtStatus {
    guard(|| {
        let c = channel.as_ref().ok_or_else(|| null("channel"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let los = c.mpcs.iter().position(|m| m.kind == PathKind::Los);
        let m = lib(snapshot_metrics(&c.mpcs, los, AngleSide::Arrival))?;
        *out = MmtMetrics {
            path_loss_db: m.path_loss_db,
            tau_rms_s: m.tau_rms,
            angular_spread_rad: m.angular_spread,
            k_factor_db: m.k_factor_db.unwrap_or(f64::NAN),
            has_k_factor: m.k_factor_db.is_some() as u8,
        };
        Ok(())
    })
}

/// Best beam of an evenly spaced sectored codebook under the default
/// 802.11ad link budget; writes the beam index and its throughput (Mbit/s).
///
/// # Safety
/// `channel` must be a live handle; `beam` and `throughput_mbps` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mmt_select_beam(
    channel: *const MmtChannel,
    n_beams: usize,
    g_max_dbi: f64,
    g_min_dbi: f64,
    beamwidth_rad: f64,
    beam: *mut usize,
    throughput_mbps: *mut f64,
) -> MmtStatus {
    guard(|| {
        let c = channel.as_ref().ok_or_else(|| null("channel"))?;
        if beam.is_null() || throughput_mbps.is_null() {
            return Err(null("output"));
        }
        let cb = BeamCodebook::sectored(n_beams, g_max_dbi, g_min_dbi, beamwidth_rad);
        lib(cb.validate())?;
        let choice = lib(select_beam(&c.mpcs, &cb, &LinkBudget::default(), true))?;
        *beam = choice.beam;
        *throughput_mbps = choice.outcome.throughput_mbps;
        Ok(())
    })
}
