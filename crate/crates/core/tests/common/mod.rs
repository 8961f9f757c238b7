#![allow(dead_code)]

pub mod oracle;

use mmtwin::calibration::Snapshot;
use mmtwin::channel::synthesize;
use mmtwin::geometry::{Scene, SceneBuilder, Vec3};
use mmtwin::materials::MaterialParams;
use mmtwin::tracer::{trace_paths, TraceConfig};
use rand::Rng;

pub const FREQ: f64 = 60.5e9;
pub const ROOM: [f64; 3] = [6.0, 4.0, 3.0];

/// 6 x 4 x 3 m room: walls (0), floor (1), ceiling (2).
pub fn shoebox() -> Scene {
    let mut b = SceneBuilder::new();
    b.add_box(Vec3::zeros(), Vec3::new(ROOM[0], ROOM[1], ROOM[2]), [0, 0, 0, 0, 1, 2]);
    b.label_region(0, "wall").label_region(1, "floor").label_region(2, "ceiling");
    b.build().unwrap().0
}

/// Ground truth for the room. Conductivities are large enough that
/// `sigma / (2 pi f eps0)` is comparable to `eps_r`; small conductivities
/// only enter reflection magnitudes at second order and cannot be recovered
/// from power and delay spread.
pub fn truth() -> Vec<MaterialParams> {
    vec![MaterialParams::new(3.0, 6.0, 0.3), MaterialParams::new(1.5, 3.5, 0.15), MaterialParams::new(6.0, 9.0, 0.45)]
}

pub fn trace_config(n_rays: usize) -> TraceConfig {
    TraceConfig { n_rays, ..TraceConfig::default() }
}

/// Random TX/RX pair inside the room, at least 1 m apart.
pub fn random_link(rng: &mut impl Rng) -> (Vec3, Vec3) {
    let point = |rng: &mut dyn rand::RngCore| {
        Vec3::new(rng.gen_range(0.5..ROOM[0] - 0.5), rng.gen_range(0.5..ROOM[1] - 0.5), rng.gen_range(0.8..ROOM[2] - 0.5))
    };
    loop {
        let (a, b) = (point(rng), point(rng));
        if (a - b).norm() > 1.0 {
            return (a, b);
        }
    }
}

/// Snapshot whose MPCs are synthesized from `params` on `scene`.
pub fn synthetic_snapshot(scene: &Scene, params: &[MaterialParams], id: usize, tx: Vec3, rx: Vec3, cfg: &TraceConfig) -> Snapshot {
    let paths = trace_paths(scene, tx, rx, cfg).unwrap();
    let (mpcs, _) = synthesize(&paths, params, FREQ, 1.0, None).unwrap();
    Snapshot::new(id, tx, rx, FREQ, mpcs)
}

/// 12 x 12 m concrete floor: the open-space link fixture for body blockage.
pub fn floor_plane() -> Scene {
    let mut b = SceneBuilder::new();
    let (lo, hi) = (-6.0, 6.0);
    b.add_quad(Vec3::new(lo, lo, 0.0), Vec3::new(hi, lo, 0.0), Vec3::new(hi, hi, 0.0), Vec3::new(lo, hi, 0.0), 0);
    b.label_region(0, "concrete");
    b.build().unwrap().0
}

pub fn floor_material() -> Vec<MaterialParams> {
    vec![MaterialParams::new(1.1437, 5.24, 0.4)]
}

/// TX and RX 4 m apart at 1.2 m height.
pub const BLOCKAGE_LINK: (f64, f64, f64) = (-2.0, 2.0, 1.2);

pub fn blockage_link() -> (Vec3, Vec3) {
    let (a, b, h) = BLOCKAGE_LINK;
    (Vec3::new(a, 0.0, h), Vec3::new(b, 0.0, h))
}

/// 60 steps crossing the link midpoint perpendicularly, 0.1 m apart.
pub fn crossing_walk() -> Vec<mmtwin::dynamics::TrajectoryPoint> {
    (0..60)
        .map(|k| mmtwin::dynamics::TrajectoryPoint { t_s: 0.1 * k as f64, x: 0.0, y: -2.95 + 0.1 * k as f64, z: 0.0, yaw: 0.0 })
        .collect()
}
