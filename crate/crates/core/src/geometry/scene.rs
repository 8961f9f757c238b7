use std::collections::HashMap;
use std::sync::Arc;

use super::{intersect_triangle, Aabb, Bvh, Hit, Ray, Vec3};
use crate::error::{Error, Result};

/// Offset applied to both ends of an occlusion segment so that the surfaces
/// the endpoints sit on do not count as blockers.
pub(crate) const OCCLUSION_EPS: f64 = 1e-6;

/// Triangle with cached edges, winding normal and bookkeeping ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Triangle {
    pub v: [Vec3; 3],
    pub e1: Vec3,
    pub e2: Vec3,
    /// Unit normal from the file winding; queries re-orient it per ray.
    pub normal: Vec3,
    pub area: f64,
    pub region: u32,
    /// Coplanar group within the region. Reflections are keyed on groups so a
    /// wall split into several triangles yields one specular path.
    pub group: u32,
}

impl Triangle {
    /// Returns `None` for zero-area input.
    pub fn new(a: Vec3, b: Vec3, c: Vec3, region: u32) -> Option<Self> {
        let e1 = b - a;
        let e2 = c - a;
        let n = e1.cross(&e2);
        let len = n.norm();
        let scale = e1.norm().max(e2.norm()).max((c - b).norm());
        if !(len > 1e-12 * scale * scale) || !len.is_finite() {
            return None;
        }
        Some(Self { v: [a, b, c], e1, e2, normal: n / len, area: 0.5 * len, region, group: 0 })
    }

    pub fn centroid(&self) -> Vec3 {
        (self.v[0] + self.v[1] + self.v[2]) / 3.0
    }

    /// Whether `p` (assumed on the supporting plane) lies inside the triangle,
    /// with a small absolute slack in barycentric terms.
    pub fn contains_planar(&self, p: &Vec3, slack: f64) -> bool {
        let v2 = p - self.v[0];
        let d00 = self.e1.dot(&self.e1);
        let d01 = self.e1.dot(&self.e2);
        let d11 = self.e2.dot(&self.e2);
        let d20 = v2.dot(&self.e1);
        let d21 = v2.dot(&self.e2);
        let denom = d00 * d11 - d01 * d01;
        let v = (d11 * d20 - d01 * d21) / denom;
        let w = (d00 * d21 - d01 * d20) / denom;
        v >= -slack && w >= -slack && v + w <= 1.0 + slack
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.v.iter())
    }
}

/// Assigns coplanar-group ids (local, starting at 0) to triangles that share a
/// region and a supporting plane.
pub(crate) fn plane_groups(tris: &[Triangle]) -> (Vec<u32>, u32) {
    let mut map: HashMap<(u32, [i64; 4]), u32> = HashMap::new();
    let mut out = Vec::with_capacity(tris.len());
    for t in tris {
        let mut n = t.normal;
        // canonical sign: first significant component positive
        let lead = (0..3).find(|&i| n[i].abs() > 1e-9).unwrap_or(2);
        if n[lead] < 0.0 {
            n = -n;
        }
        let d = n.dot(&t.v[0]);
        let q = |x: f64| (x * 1e6).round() as i64;
        let key = (t.region, [q(n.x), q(n.y), q(n.z), q(d)]);
        let next = map.len() as u32;
        out.push(*map.entry(key).or_insert(next));
    }
    let n = map.len() as u32;
    (out, n)
}

/// One independently indexed triangle set: the static mesh or one proxy.
#[derive(Debug, Clone)]
pub(crate) struct MeshPart {
    pub tris: Vec<Triangle>,
    pub bvh: Bvh,
    pub first_id: u32,
    pub proxy: Option<u32>,
}

impl MeshPart {
    pub(crate) fn new(tris: Vec<Triangle>, first_id: u32, proxy: Option<u32>) -> Self {
        let bvh = Bvh::build(&tris);
        Self { tris, bvh, first_id, proxy }
    }
}

/// Indexed triangle scene. Immutable once built; proxy insertion produces a
/// new `Scene` value with a higher epoch that shares the static mesh.
#[derive(Debug, Clone)]
pub struct Scene {
    pub(crate) parts: Vec<Arc<MeshPart>>,
    pub(crate) region_labels: Vec<String>,
    pub(crate) group_count: u32,
    pub(crate) epoch: u64,
}

impl Scene {
    pub fn empty() -> Self {
        Self { parts: Vec::new(), region_labels: Vec::new(), group_count: 0, epoch: 0 }
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn triangle_count(&self) -> usize {
        self.parts.iter().map(|p| p.tris.len()).sum()
    }

    /// Number of surface regions `K`; ids are `0..K`.
    pub fn region_count(&self) -> usize {
        self.region_labels.len()
    }

    pub fn region_label(&self, region: u32) -> Option<&str> {
        self.region_labels.get(region as usize).map(String::as_str)
    }

    pub fn region_labels(&self) -> &[String] {
        &self.region_labels
    }

    pub fn is_empty(&self) -> bool {
        self.triangle_count() == 0
    }

    pub fn triangle(&self, id: u32) -> &Triangle {
        let part = self.parts.iter().rev().find(|p| p.first_id <= id).expect("triangle id out of range");
        &part.tris[(id - part.first_id) as usize]
    }

    pub fn triangles(&self) -> impl Iterator<Item = (u32, &Triangle)> {
        self.parts.iter().flat_map(|p| p.tris.iter().enumerate().map(move |(i, t)| (p.first_id + i as u32, t)))
    }

    pub fn bounds(&self) -> Aabb {
        self.parts.iter().filter_map(|p| p.bvh.bounds()).fold(Aabb::empty(), |a, b| a.union(&b))
    }

    pub fn total_area(&self) -> f64 {
        self.triangles().map(|(_, t)| t.area).sum()
    }

    /// Nearest hit via the acceleration index.
    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        let mut best: Option<(f64, u32)> = None;
        for part in &self.parts {
            let limit = best.map_or(ray.t_max, |b| b.0.next_up());
            if let Some((t, local)) = part.bvh.intersect(&part.tris, &ray.origin, &ray.direction, ray.t_min, limit) {
                let id = part.first_id + local;
                if best.is_none_or(|(bt, bi)| t < bt || (t == bt && id < bi)) {
                    best = Some((t, id));
                }
            }
        }
        best.map(|(t, id)| self.make_hit(ray, t, id))
    }

    /// Nearest hit by exhaustive scan; reference for the indexed query.
    pub fn intersect_brute_force(&self, ray: &Ray) -> Option<Hit> {
        let mut best: Option<(f64, u32)> = None;
        for (id, t) in self.triangles() {
            if let Some(th) = intersect_triangle(&ray.origin, &ray.direction, &t.v[0], &t.e1, &t.e2, ray.t_min, ray.t_max) {
                if best.is_none_or(|(bt, bi)| th < bt || (th == bt && id < bi)) {
                    best = Some((th, id));
                }
            }
        }
        best.map(|(t, id)| self.make_hit(ray, t, id))
    }

    fn make_hit(&self, ray: &Ray, t: f64, id: u32) -> Hit {
        let tri = self.triangle(id);
        let normal = if tri.normal.dot(&ray.direction) > 0.0 { -tri.normal } else { tri.normal };
        Hit { t, point: ray.at(t), normal, triangle: id, region: tri.region }
    }

    /// Whether any surface lies strictly between `a` and `b`.
    pub fn segment_blocked(&self, a: &Vec3, b: &Vec3) -> bool {
        let d = b - a;
        let len = d.norm();
        if len <= 2.0 * OCCLUSION_EPS {
            return false;
        }
        let dir = d / len;
        self.parts.iter().any(|part| part.bvh.intersect(&part.tris, a, &dir, OCCLUSION_EPS, len - OCCLUSION_EPS).is_some())
    }

    /// Closest point on the scene surface: `(distance, point, triangle id)`.
    pub fn nearest_point(&self, p: &Vec3, max_distance: f64) -> Option<(f64, Vec3, u32)> {
        let mut best: Option<(f64, Vec3, u32)> = None;
        let mut bound = max_distance * max_distance;
        for part in &self.parts {
            if let Some((d2, q, local)) = part.bvh.nearest_point(&part.tris, p, bound) {
                let id = part.first_id + local;
                if best.is_none_or(|(bd, _, bi)| d2 < bd || (d2 == bd && id < bi)) {
                    best = Some((d2, q, id));
                    bound = d2;
                }
            }
        }
        best.map(|(d2, q, id)| (d2.sqrt(), q, id))
    }

    pub(crate) fn next_triangle_id(&self) -> u32 {
        self.triangle_count() as u32
    }

    pub(crate) fn proxy_part(&self, proxy: u32) -> Option<usize> {
        self.parts.iter().position(|p| p.proxy == Some(proxy))
    }
}

/// Accumulates triangles and builds a [`Scene`].
#[derive(Debug, Default)]
pub struct SceneBuilder {
    vertices: Vec<Vec3>,
    faces: Vec<([u32; 3], u32)>,
    labels: HashMap<u32, String>,
}

impl SceneBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, p: Vec3) -> u32 {
        self.vertices.push(p);
        (self.vertices.len() - 1) as u32
    }

    pub fn add_face(&mut self, idx: [u32; 3], region: u32) -> &mut Self {
        self.faces.push((idx, region));
        self
    }

    pub fn add_triangle(&mut self, a: Vec3, b: Vec3, c: Vec3, region: u32) -> &mut Self {
        let i = self.add_vertex(a);
        self.add_vertex(b);
        self.add_vertex(c);
        self.add_face([i, i + 1, i + 2], region)
    }

    /// Axis-aligned quad split into two triangles.
    pub fn add_quad(&mut self, a: Vec3, b: Vec3, c: Vec3, d: Vec3, region: u32) -> &mut Self {
        self.add_triangle(a, b, c, region);
        self.add_triangle(a, c, d, region)
    }

    /// Twelve triangles of an axis-aligned box; `regions` holds one id per face
    /// in the order -x, +x, -y, +y, -z, +z.
    pub fn add_box(&mut self, min: Vec3, max: Vec3, regions: [u32; 6]) -> &mut Self {
        let c = |x: usize, y: usize, z: usize| {
            Vec3::new(if x == 0 { min.x } else { max.x }, if y == 0 { min.y } else { max.y }, if z == 0 { min.z } else { max.z })
        };
        self.add_quad(c(0, 0, 0), c(0, 0, 1), c(0, 1, 1), c(0, 1, 0), regions[0]);
        self.add_quad(c(1, 0, 0), c(1, 1, 0), c(1, 1, 1), c(1, 0, 1), regions[1]);
        self.add_quad(c(0, 0, 0), c(1, 0, 0), c(1, 0, 1), c(0, 0, 1), regions[2]);
        self.add_quad(c(0, 1, 0), c(0, 1, 1), c(1, 1, 1), c(1, 1, 0), regions[3]);
        self.add_quad(c(0, 0, 0), c(0, 1, 0), c(1, 1, 0), c(1, 0, 0), regions[4]);
        self.add_quad(c(0, 0, 1), c(1, 0, 1), c(1, 1, 1), c(0, 1, 1), regions[5]);
        self
    }

    pub fn label_region(&mut self, region: u32, label: impl Into<String>) -> &mut Self {
        self.labels.insert(region, label.into());
        self
    }

    /// Builds the scene. Returns the number of degenerate triangles dropped.
    pub fn build(self) -> Result<(Scene, usize)> {
        if self.faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let nv = self.vertices.len() as u32;
        let mut tris = Vec::with_capacity(self.faces.len());
        let mut dropped = 0;
        for (fi, (idx, region)) in self.faces.iter().enumerate() {
            if idx.iter().any(|&i| i >= nv) {
                return Err(Error::InvalidInput(format!("face {fi} references a vertex out of range")));
            }
            let [a, b, c] = idx.map(|i| self.vertices[i as usize]);
            if !(a.iter().chain(b.iter()).chain(c.iter()).all(|x| x.is_finite())) {
                return Err(Error::InvalidInput(format!("face {fi} has non-finite coordinates")));
            }
            match Triangle::new(a, b, c, *region) {
                Some(t) => tris.push(t),
                None => dropped += 1,
            }
        }
        if tris.is_empty() {
            return Err(Error::EmptyMesh);
        }
        // remap region ids onto 0..K in ascending order of the original ids
        let mut ids: Vec<u32> = tris.iter().map(|t| t.region).collect();
        ids.sort_unstable();
        ids.dedup();
        let remap: HashMap<u32, u32> = ids.iter().enumerate().map(|(i, &r)| (r, i as u32)).collect();
        for t in &mut tris {
            t.region = remap[&t.region];
        }
        let region_labels = ids.iter().map(|r| self.labels.get(r).cloned().unwrap_or_else(|| format!("region_{r}"))).collect();
        let (groups, group_count) = plane_groups(&tris);
        for (t, g) in tris.iter_mut().zip(groups) {
            t.group = g;
        }
        let scene = Scene { parts: vec![Arc::new(MeshPart::new(tris, 0, None))], region_labels, group_count, epoch: 0 };
        Ok((scene, dropped))
    }
}
