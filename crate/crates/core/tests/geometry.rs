use mmtwin::geometry::{
    closest_point_on_triangle, load_mesh, load_mesh_with_regions, mesh_distance, mirror_reflect, write_ascii_ply, Ray, Scene, SceneBuilder,
    Vec3,
};
use mmtwin::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_scene(rng: &mut impl Rng, n: usize) -> Scene {
    let mut b = SceneBuilder::new();
    for i in 0..n {
        let c = Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let s = rng.gen_range(0.05..2.0);
        let a = c + random_unit(rng) * s;
        let bb = c + random_unit(rng) * s;
        let cc = c + random_unit(rng) * s;
        b.add_triangle(a, bb, cc, (i % 4) as u32);
    }
    b.build().unwrap().0
}

#[test]
fn bvh_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut hits = 0;
    for s in 0..10 {
        let scene = random_scene(&mut rng, 50 + 40 * s);
        for _ in 0..1000 {
            let o = Vec3::new(rng.gen_range(-7.0..7.0), rng.gen_range(-7.0..7.0), rng.gen_range(-7.0..7.0));
            let ray = Ray::new(o, random_unit(&mut rng), 0.0, rng.gen_range(1.0..30.0)).unwrap();
            let a = scene.intersect(&ray);
            let b = scene.intersect_brute_force(&ray);
            assert_eq!(a, b);
            if let Some(h) = a {
                hits += 1;
                assert!((h.point - ray.at(h.t)).norm() < 1e-6);
                assert!(h.normal.dot(&ray.direction) <= 0.0);
                assert!((h.normal.norm() - 1.0).abs() < 1e-9);
            }
        }
    }
    assert!(hits > 1000, "fixture should produce plenty of hits, got {hits}");
}

#[test]
fn cube_hit_from_below_and_inside() {
    let mut b = SceneBuilder::new();
    b.add_box(Vec3::repeat(-0.5), Vec3::repeat(0.5), [0; 6]);
    let (scene, _) = b.build().unwrap();
    let h = scene.intersect(&Ray::towards(Vec3::new(0.0, 0.0, -5.0), Vec3::z())).unwrap();
    assert!((h.t - 4.5).abs() < 1e-12);
    assert_eq!(h.normal, Vec3::new(0.0, 0.0, -1.0));
    assert!(scene.intersect(&Ray::towards(Vec3::new(0.0, 0.0, -5.0), -Vec3::z())).is_none());

    let inside = Ray::towards(Vec3::new(0.1, -0.2, 0.05), Vec3::new(0.3, 1.0, 0.2));
    let h = scene.intersect(&inside).unwrap();
    // independent slab oracle for the exit distance
    let t_exit = (0..3)
        .map(|i| {
            let d = inside.direction[i];
            if d > 0.0 {
                (0.5 - inside.origin[i]) / d
            } else if d < 0.0 {
                (-0.5 - inside.origin[i]) / d
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min);
    assert!((h.t - t_exit).abs() < 1e-12);
    assert_eq!(Some(h), scene.intersect_brute_force(&inside));
}

proptest! {
    #[test]
    fn mirror_is_an_involution(d in prop::array::uniform3(-1.0f64..1.0), n in prop::array::uniform3(-1.0f64..1.0)) {
        let d = Vec3::from(d);
        let n = Vec3::from(n);
        prop_assume!(d.norm() > 1e-3 && n.norm() > 1e-3);
        let d = d.normalize();
        let mut n = n.normalize();
        if d.dot(&n) > 0.0 { n = -n; }
        prop_assume!(d.dot(&n).abs() > 1e-6);
        let r = mirror_reflect(&d, &n).unwrap();
        prop_assert!((r.norm() - 1.0).abs() < 1e-12);
        // tangential part preserved, normal part flipped
        prop_assert!(((r - n * r.dot(&n)) - (d - n * d.dot(&n))).norm() < 1e-12);
        prop_assert!((r.dot(&n) + d.dot(&n)).abs() < 1e-12);
        let back = mirror_reflect(&r, &-n).unwrap();
        prop_assert!((back - d).norm() < 1e-12);
    }
}

fn square(z: f64) -> Scene {
    let mut b = SceneBuilder::new();
    b.add_quad(Vec3::new(0.0, 0.0, z), Vec3::new(1.0, 0.0, z), Vec3::new(1.0, 1.0, z), Vec3::new(0.0, 1.0, z), 0);
    b.build().unwrap().0
}

fn cube(h: f64) -> Scene {
    let mut b = SceneBuilder::new();
    b.add_box(Vec3::repeat(-h), Vec3::repeat(h), [0, 1, 2, 3, 4, 5]);
    b.build().unwrap().0
}

#[test]
fn distance_identical_meshes_is_zero() {
    let c = cube(0.5);
    let s = mesh_distance(&c, &c, 2000, &[0.0, 0.07], 10, 3).unwrap();
    assert!(s.distances.iter().all(|&d| d < 1e-12));
    assert_eq!(s.fraction_within[1], 1.0);
}

#[test]
fn distance_offset_plane() {
    let s = mesh_distance(&square(0.0), &square(0.05), 1000, &[0.04, 0.07], 5, 1).unwrap();
    assert!(s.distances.iter().all(|&d| (d - 0.05).abs() < 1e-12));
    assert_eq!(s.fraction_within, vec![0.0, 1.0]);
    assert_eq!(s.histogram_counts.iter().sum::<usize>(), 1000);
}

#[test]
fn distance_scaled_cube_matches_oracles() {
    let inner = cube(0.5);
    let outer = cube(0.55);
    let s = mesh_distance(&inner, &outer, 500, &[0.05], 4, 9).unwrap();
    let samples = mmtwin::geometry::sample_surface_points(&inner, 500, 9).unwrap();
    let tris: Vec<_> = outer.triangles().map(|(_, t)| t.clone()).collect();
    for (p, &d) in samples.iter().zip(&s.distances) {
        // analytic: distance from an interior point to the box surface
        let analytic = (0..3).map(|i| 0.55 - p[i].abs()).fold(f64::INFINITY, f64::min);
        let brute = tris.iter().map(|t| (closest_point_on_triangle(p, &t.v[0], &t.v[1], &t.v[2]) - p).norm()).fold(f64::INFINITY, f64::min);
        assert!((d - analytic).abs() < 1e-12);
        assert!((d - brute).abs() < 1e-12);
    }
    assert!(s.median() >= 0.05 - 1e-12);
}

#[test]
fn distance_rejects_empty_inputs() {
    assert!(matches!(mesh_distance(&Scene::empty(), &cube(1.0), 10, &[], 1, 0), Err(Error::EmptyMesh)));
    assert!(mesh_distance(&cube(1.0), &cube(1.0), 0, &[], 1, 0).is_err());
}

const CUBE_VERTS: &str =
    "-0.5 -0.5 -0.5\n0.5 -0.5 -0.5\n0.5 0.5 -0.5\n-0.5 0.5 -0.5\n-0.5 -0.5 0.5\n0.5 -0.5 0.5\n0.5 0.5 0.5\n-0.5 0.5 0.5\n";
const CUBE_FACES: [[u32; 3]; 12] =
    [[0, 2, 1], [0, 3, 2], [4, 5, 6], [4, 6, 7], [0, 1, 5], [0, 5, 4], [3, 7, 6], [3, 6, 2], [0, 4, 7], [0, 7, 3], [1, 2, 6], [1, 6, 5]];

fn ascii_cube(with_region: bool, extra_degenerate: bool) -> String {
    let nf = 12 + extra_degenerate as usize;
    let mut s = format!("ply\nformat ascii 1.0\ncomment test cube\nelement vertex 8\nproperty float x\nproperty float y\nproperty float z\nelement face {nf}\nproperty list uchar int vertex_indices\n");
    if with_region {
        s.push_str("property int region\n");
    }
    s.push_str("end_header\n");
    s.push_str(CUBE_VERTS);
    for (i, f) in CUBE_FACES.iter().enumerate() {
        s.push_str(&format!("3 {} {} {}", f[0], f[1], f[2]));
        if with_region {
            s.push_str(&format!(" {}", 10 * (i / 2)));
        }
        s.push('\n');
    }
    if extra_degenerate {
        s.push_str("3 0 1 0");
        if with_region {
            s.push_str(" 0");
        }
        s.push('\n');
    }
    s
}

#[test]
fn ply_ascii_inline_regions() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cube.ply");
    std::fs::write(&p, ascii_cube(true, false)).unwrap();
    let (scene, report) = load_mesh(&p).unwrap();
    assert_eq!(scene.triangle_count(), 12);
    assert_eq!(scene.region_count(), 6);
    assert_eq!(report.degenerate_dropped, 0);
    // ids 0,10,...,50 are compacted to 0..6
    let mut regions: Vec<u32> = scene.triangles().map(|(_, t)| t.region).collect();
    regions.dedup();
    assert_eq!(regions, vec![0, 1, 2, 3, 4, 5]);
}

#[test]
fn ply_zero_area_triangle_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cube.ply");
    std::fs::write(&p, ascii_cube(true, true)).unwrap();
    let (scene, report) = load_mesh(&p).unwrap();
    assert_eq!(scene.triangle_count(), 12);
    assert_eq!(report.degenerate_dropped, 1);
    assert_eq!(report.faces_read, 13);
}

#[test]
fn ply_companion_region_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cube.ply");
    std::fs::write(&p, ascii_cube(false, false)).unwrap();
    assert!(matches!(load_mesh(&p), Err(Error::MissingRegionMapping(0))));
    std::fs::write(dir.path().join("cube.ply.regions"), "0 11 0 concrete\n").unwrap();
    let (scene, _) = load_mesh(&p).unwrap();
    assert_eq!(scene.region_count(), 1);
    assert_eq!(scene.region_label(0), Some("concrete"));

    let explicit = dir.path().join("split.map");
    std::fs::write(&explicit, "0 5 3 wall\n6 11 7 floor\n").unwrap();
    let (scene, _) = load_mesh_with_regions(&p, &explicit).unwrap();
    assert_eq!(scene.region_labels(), &["wall".to_string(), "floor".to_string()]);

    std::fs::write(&explicit, "0 5 3 wall\n").unwrap();
    assert!(matches!(load_mesh_with_regions(&p, &explicit), Err(Error::MissingRegionMapping(6))));
}

#[test]
fn ply_binary_little_endian() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cube_bin.ply");
    let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 8\nproperty float x\nproperty float y\nproperty float z\nelement face 12\nproperty list uchar int vertex_indices\nproperty uchar material_id\nend_header\n".to_vec();
    for line in CUBE_VERTS.lines() {
        for v in line.split_whitespace() {
            bytes.extend_from_slice(&v.parse::<f32>().unwrap().to_le_bytes());
        }
    }
    for (i, f) in CUBE_FACES.iter().enumerate() {
        bytes.push(3);
        for &k in f {
            bytes.extend_from_slice(&(k as i32).to_le_bytes());
        }
        bytes.push((i / 6) as u8);
    }
    std::fs::write(&p, bytes).unwrap();
    let (scene, _) = load_mesh(&p).unwrap();
    assert_eq!(scene.triangle_count(), 12);
    assert_eq!(scene.region_count(), 2);
}

#[test]
fn ply_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let c = cube(0.5);
    let p = dir.path().join("rt.ply");
    write_ascii_ply(&c, &p).unwrap();
    let (back, _) = load_mesh(&p).unwrap();
    assert_eq!(back.triangle_count(), 12);
    assert_eq!(back.region_count(), 6);
    let ray = Ray::towards(Vec3::new(0.0, 0.0, -5.0), Vec3::z());
    assert_eq!(back.intersect(&ray).map(|h| h.t), c.intersect(&ray).map(|h| h.t));

    let bad = dir.path().join("bad.ply");
    std::fs::write(&bad, "not a ply file").unwrap();
    assert!(matches!(load_mesh(&bad), Err(Error::Parse { .. })));
    let empty = dir.path().join("empty.ply");
    std::fs::write(&empty, "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n").unwrap();
    assert!(matches!(load_mesh(&empty), Err(Error::EmptyMesh)));
    assert!(matches!(load_mesh(dir.path().join("missing.ply")), Err(Error::Io { .. })));
}
