use std::collections::HashMap;

use super::{Interaction, InteractionKind, PathKind, PropagationPath};
use crate::geometry::{Scene, Vec3};

/// Barycentric slack when deciding whether a refined point lies on a triangle.
const INSIDE_SLACK: f64 = 1e-9;
/// Minimum distance of a path vertex from a reflecting plane (m).
const SIDE_EPS: f64 = 1e-9;
/// Mirror-law tolerance used by [`verify_path`] (rad).
const MIRROR_TOL: f64 = 1e-6;

/// Supporting plane and member triangles of every coplanar group.
#[derive(Debug, Clone, Default)]
pub(crate) struct GroupIndex {
    planes: HashMap<u32, (Vec3, f64)>,
    members: HashMap<u32, Vec<u32>>,
}

impl GroupIndex {
    pub(crate) fn new(scene: &Scene) -> Self {
        let mut idx = Self::default();
        for (id, t) in scene.triangles() {
            idx.planes.entry(t.group).or_insert((t.normal, t.normal.dot(&t.v[0])));
            idx.members.entry(t.group).or_default().push(id);
        }
        idx
    }
}

fn mirror_point(p: &Vec3, n: &Vec3, d: f64) -> Vec3 {
    p - n * (2.0 * (n.dot(p) - d))
}

/// Exact specular path through the plane sequence `groups`, or `None` when
/// the sequence admits no valid unobstructed reflection chain.
pub fn refine_specular(scene: &Scene, tx: Vec3, rx: Vec3, groups: &[u32]) -> Option<PropagationPath> {
    refine_with(scene, &GroupIndex::new(scene), tx, rx, groups)
}

pub(crate) fn refine_with(scene: &Scene, index: &GroupIndex, tx: Vec3, rx: Vec3, groups: &[u32]) -> Option<PropagationPath> {
    let k = groups.len();
    if k == 0 {
        return None;
    }
    let planes: Vec<(Vec3, f64)> = groups.iter().map(|g| index.planes.get(g).copied()).collect::<Option<_>>()?;

    let mut images = Vec::with_capacity(k + 1);
    images.push(tx);
    for (n, d) in &planes {
        let last = images[images.len() - 1];
        images.push(mirror_point(&last, n, *d));
    }

    let mut points = vec![Vec3::zeros(); k];
    let mut target = rx;
    for j in (0..k).rev() {
        let (n, d) = planes[j];
        let image = images[j + 1];
        let dir = target - image;
        let denom = n.dot(&dir);
        if denom.abs() < 1e-15 {
            return None;
        }
        let s = (d - n.dot(&image)) / denom;
        if !(s > 0.0 && s < 1.0) {
            return None;
        }
        points[j] = image + dir * s;
        target = points[j];
    }

    let mut interactions = Vec::with_capacity(k);
    let mut prev = tx;
    let mut length = 0.0;
    for j in 0..k {
        let (n, d) = planes[j];
        let p = points[j];
        let next = if j + 1 < k { points[j + 1] } else { rx };
        let side_prev = n.dot(&prev) - d;
        let side_next = n.dot(&next) - d;
        if side_prev.abs() < SIDE_EPS || side_next.abs() < SIDE_EPS || side_prev.signum() != side_next.signum() {
            return None;
        }
        let triangle = *index.members[&groups[j]].iter().find(|&&id| scene.triangle(id).contains_planar(&p, INSIDE_SLACK))?;
        if scene.segment_blocked(&prev, &p) {
            return None;
        }
        let tri = scene.triangle(triangle);
        interactions.push(Interaction {
            point: p,
            normal: if side_prev > 0.0 { n } else { -n },
            triangle,
            region: tri.region,
            group: groups[j],
            area: tri.area,
            kind: InteractionKind::Reflect,
        });
        length += (p - prev).norm();
        prev = p;
    }
    if scene.segment_blocked(&prev, &rx) {
        return None;
    }
    length += (rx - prev).norm();
    Some(PropagationPath { kind: PathKind::Specular, tx, rx, interactions, length })
}

/// Independent re-check of a path against the scene: unobstructed segments,
/// interaction points on their triangles, the mirror law at every reflection,
/// at most one scatter, and a consistent total length.
pub fn verify_path(scene: &Scene, path: &PropagationPath) -> std::result::Result<(), String> {
    let v = path.vertices();
    for w in v.windows(2) {
        if scene.segment_blocked(&w[0], &w[1]) {
            return Err(format!("segment {:?} -> {:?} is obstructed", w[0], w[1]));
        }
    }
    let n_scatter = path.interactions.iter().filter(|i| i.kind == InteractionKind::Scatter).count();
    match path.kind {
        PathKind::Los if !path.interactions.is_empty() => return Err("LoS path with interactions".into()),
        PathKind::Specular if n_scatter > 0 || path.interactions.is_empty() => {
            return Err("specular path must contain only reflections".into())
        }
        PathKind::Scattered if n_scatter != 1 || path.interactions.len() != 1 => {
            return Err("scattered path must consist of exactly one scatter".into())
        }
        _ => {}
    }
    for (j, it) in path.interactions.iter().enumerate() {
        if it.triangle as usize >= scene.triangle_count() {
            return Err(format!("interaction {j}: unknown triangle {}", it.triangle));
        }
        let tri = scene.triangle(it.triangle);
        let off = tri.normal.dot(&(it.point - tri.v[0]));
        if off.abs() > 1e-9 || !tri.contains_planar(&it.point, INSIDE_SLACK) {
            return Err(format!("interaction {j} is not on triangle {}", it.triangle));
        }
        let d_in = (v[j + 1] - v[j]).normalize();
        let d_out = (v[j + 2] - v[j + 1]).normalize();
        let n = tri.normal;
        if d_in.dot(&n).signum() == d_out.dot(&n).signum() {
            return Err(format!("interaction {j}: path crosses the surface"));
        }
        if it.kind == InteractionKind::Reflect {
            let r = d_in - n * (2.0 * d_in.dot(&n));
            let angle = r.cross(&d_out).norm().atan2(r.dot(&d_out));
            if angle > MIRROR_TOL {
                return Err(format!("interaction {j}: mirror law violated by {angle:.3e} rad"));
            }
        }
    }
    let len: f64 = v.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    if (len - path.length).abs() > 1e-9 * len.max(1.0) {
        return Err(format!("length {} does not match geometry {len}", path.length));
    }
    Ok(())
}
