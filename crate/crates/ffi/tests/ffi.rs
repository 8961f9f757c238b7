use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use mmtwin_ffi::*;

const C: f64 = 299_792_458.0;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { mmt_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
    assert_eq!(s.len(), n.min(255));
    s
}

/// One large floor quad at z = 0 (region 0).
fn floor() -> *mut MmtScene {
    let (a, b) = (-50.0, 50.0);
    let v = [a, a, 0.0, b, a, 0.0, b, b, 0.0, a, a, 0.0, b, b, 0.0, a, b, 0.0];
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { mmt_scene_from_triangles(v.as_ptr(), [0u32, 0].as_ptr(), 2, &mut s) }, MmtStatus::Ok);
    s
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(mmt_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn free_space_link_matches_friis() {
    let mut scene = ptr::null_mut();
    assert_eq!(unsafe { mmt_scene_from_triangles(ptr::null(), ptr::null(), 0, &mut scene) }, MmtStatus::Ok);
    assert_eq!(unsafe { mmt_scene_region_count(scene) }, 0);
    let mut ch = ptr::null_mut();
    let (tx, rx) = ([0.0, 0.0, 1.0], [10.0, 0.0, 1.0]);
    assert_eq!(unsafe { mmt_trace(scene, ptr::null(), tx.as_ptr(), rx.as_ptr(), &mut ch) }, MmtStatus::Ok);
    assert_eq!(unsafe { mmt_channel_len(ch) }, 1);
    let mut m = MmtMetrics::default();
    assert_eq!(unsafe { mmt_channel_metrics(ch, &mut m) }, MmtStatus::Ok);
    let lambda = C / 60.5e9;
    let friis = 20.0 * (4.0 * std::f64::consts::PI * 10.0 / lambda).log10();
    assert!((m.path_loss_db - friis).abs() < 1e-9);
    assert_eq!(m.tau_rms_s, 0.0);
    assert_eq!(m.has_k_factor, 1);
    assert!(m.k_factor_db.is_infinite());
    unsafe {
        mmt_channel_free(ch);
        mmt_scene_free(scene);
    }
}

#[test]
fn ground_reflection_and_materials() {
    let scene = floor();
    let mut opts = mmt_trace_options_default();
    opts.n_rays = 20_000;
    let (tx, rx) = ([0.0, 0.0, 2.0], [4.0, 0.0, 2.0]);
    let trace = |scene| {
        let mut ch = ptr::null_mut();
        assert_eq!(unsafe { mmt_trace(scene, &opts, tx.as_ptr(), rx.as_ptr(), &mut ch) }, MmtStatus::Ok);
        let n = unsafe { mmt_channel_len(ch) };
        let mpcs: Vec<MmtMpc> = (0..n)
            .map(|i| {
                let mut m = std::mem::MaybeUninit::<MmtMpc>::uninit();
                assert_eq!(unsafe { mmt_channel_get(ch, i, m.as_mut_ptr()) }, MmtStatus::Ok);
                unsafe { m.assume_init() }
            })
            .collect();
        unsafe { mmt_channel_free(ch) };
        mpcs
    };
    let mpcs = trace(scene);
    let los = mpcs.iter().find(|m| m.kind == MmtPathKind::Los).unwrap();
    let refl = mpcs.iter().find(|m| m.kind == MmtPathKind::Specular).unwrap();
    assert!((los.delay_s - 4.0 / C).abs() < 1e-15);
    assert!((refl.delay_s - 32f64.sqrt() / C).abs() < 1e-15);

    // A metal-like floor reflects more strongly.
    let weak = refl.amplitude_re.hypot(refl.amplitude_im);
    assert_eq!(unsafe { mmt_scene_set_material(scene, 0, 1e7, 1.0, 0.01) }, MmtStatus::Ok);
    let strong = trace(scene).into_iter().find(|m| m.kind == MmtPathKind::Specular).unwrap();
    assert!(strong.amplitude_re.hypot(strong.amplitude_im) > weak);

    let mut beam = 99usize;
    let mut tput = -1.0;
    let mut ch = ptr::null_mut();
    assert_eq!(unsafe { mmt_trace(scene, &opts, tx.as_ptr(), rx.as_ptr(), &mut ch) }, MmtStatus::Ok);
    assert_eq!(unsafe { mmt_select_beam(ch, 8, 15.0, -10.0, 30f64.to_radians(), &mut beam, &mut tput) }, MmtStatus::Ok);
    // Arrival from -x: boresight pi.
    assert_eq!(beam, 4);
    assert!(tput > 0.0);
    unsafe {
        mmt_channel_free(ch);
        mmt_scene_free(scene);
    }
}

#[test]
fn error_codes_and_messages() {
    let scene = floor();
    assert_eq!(unsafe { mmt_scene_set_material(scene, 5, 1.0, 2.0, 0.1) }, MmtStatus::NotFound);
    assert!(last_error().contains("region 5"));
    assert_eq!(unsafe { mmt_scene_set_material(scene, 0, -1.0, 2.0, 0.1) }, MmtStatus::InvalidArgument);
    assert_eq!(unsafe { mmt_scene_set_material(ptr::null_mut(), 0, 1.0, 2.0, 0.1) }, MmtStatus::NullPointer);
    assert_eq!(last_error(), "scene is null");

    let mut ch = ptr::null_mut();
    let p = [0.0, 0.0, 1.0];
    assert_eq!(unsafe { mmt_trace(scene, ptr::null(), ptr::null(), p.as_ptr(), &mut ch) }, MmtStatus::NullPointer);
    assert!(ch.is_null());
    let mut opts = mmt_trace_options_default();
    opts.n_rays = 0;
    let q = [1.0, 0.0, 1.0];
    assert_eq!(unsafe { mmt_trace(scene, &opts, p.as_ptr(), q.as_ptr(), &mut ch) }, MmtStatus::InvalidArgument);

    let mut out = ptr::null_mut();
    let missing = CString::new("/nonexistent/mesh.ply").unwrap();
    assert_eq!(unsafe { mmt_scene_load(missing.as_ptr(), &mut out) }, MmtStatus::Io);
    assert!(out.is_null());
    assert!(last_error().contains("nonexistent"));

    // Truncation keeps a terminated prefix and reports the full length.
    let mut small = [0 as std::ffi::c_char; 4];
    let n = unsafe { mmt_last_error_message(small.as_mut_ptr(), small.len()) };
    assert!(n > 3);
    assert_eq!(unsafe { CStr::from_ptr(small.as_ptr()) }.to_bytes().len(), 3);

    let mut m = MmtMetrics::default();
    assert_eq!(unsafe { mmt_channel_metrics(ptr::null(), &mut m) }, MmtStatus::NullPointer);
    unsafe {
        mmt_scene_free(ptr::null_mut());
        mmt_channel_free(ptr::null_mut());
        mmt_scene_free(scene);
    }
}

#[test]
fn load_fixture_mesh() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/shoebox.ply");
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut scene = ptr::null_mut();
    assert_eq!(unsafe { mmt_scene_load(c.as_ptr(), &mut scene) }, MmtStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { mmt_scene_region_count(scene) }, 3);
    unsafe { mmt_scene_free(scene) };
}

#[test]
fn header_declares_the_api_and_compiles() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/mmtwin.h")).unwrap();
    for name in [
        "mmt_scene_load",
        "mmt_scene_from_triangles",
        "mmt_trace",
        "mmt_channel_get",
        "mmt_last_error_message",
        "MMT_STATUS_OK",
        "typedef struct MmtScene MmtScene",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
    // Syntax-check the header with the system C compiler when one is present.
    let Ok(cc) = which_cc() else { return };
    let tmp = tempfile_path("mmtwin_header_check.c");
    std::fs::write(&tmp, "#include \"mmtwin.h\"\nint main(void) { MmtScene *s = 0; mmt_scene_free(s); return MMT_STATUS_OK; }\n").unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&tmp)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}

fn tempfile_path(name: &str) -> std::path::PathBuf {
    std::env::temp_dir().join(format!("{}_{name}", std::process::id()))
}
