use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::scene::{plane_groups, MeshPart};
use crate::geometry::{Aabb, Scene, Triangle, Vec3};

/// Inflation applied to dirty boxes so that refined reflection points that
/// move slightly are still covered.
pub const DIRTY_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum ProxyShape {
    /// Capped cylinder standing on its base; `sides` facets around.
    Cylinder { radius: f64, height: f64, sides: u32 },
    /// Box with its base centred on the pose position.
    Box { size_x: f64, size_y: f64, size_z: f64 },
}

impl ProxyShape {
    /// Default body stand-in: r = 0.25 m, h = 1.7 m.
    pub fn human() -> Self {
        ProxyShape::Cylinder { radius: 0.25, height: 1.7, sides: 16 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ProxyShape::Cylinder { radius, height, sides } => radius > 0.0 && height > 0.0 && sides >= 3,
            ProxyShape::Box { size_x, size_y, size_z } => size_x > 0.0 && size_y > 0.0 && size_z > 0.0,
        };
        if ok && self.extent().iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("proxy shape needs positive dimensions: {self:?}")))
        }
    }

    fn extent(&self) -> [f64; 3] {
        match *self {
            ProxyShape::Cylinder { radius, height, .. } => [radius, radius, height],
            ProxyShape::Box { size_x, size_y, size_z } => [size_x, size_y, size_z],
        }
    }

    /// Triangles in the local frame (base centred at the origin, +z up),
    /// wound outward.
    fn local_triangles(&self) -> Vec<[Vec3; 3]> {
        let mut out = Vec::new();
        match *self {
            ProxyShape::Cylinder { radius, height, sides } => {
                let ring = |k: u32, z: f64| {
                    let a = TAU * f64::from(k % sides) / f64::from(sides);
                    Vec3::new(radius * a.cos(), radius * a.sin(), z)
                };
                let (bottom, top) = (Vec3::zeros(), Vec3::new(0.0, 0.0, height));
                for k in 0..sides {
                    let (a0, a1) = (ring(k, 0.0), ring(k + 1, 0.0));
                    let (b0, b1) = (ring(k, height), ring(k + 1, height));
                    out.push([a0, a1, b1]);
                    out.push([a0, b1, b0]);
                    out.push([bottom, a1, a0]);
                    out.push([top, b0, b1]);
                }
            }
            ProxyShape::Box { size_x, size_y, size_z } => {
                let (hx, hy) = (0.5 * size_x, 0.5 * size_y);
                let c = |x: usize, y: usize, z: usize| {
                    Vec3::new(if x == 0 { -hx } else { hx }, if y == 0 { -hy } else { hy }, if z == 0 { 0.0 } else { size_z })
                };
                let quads = [
                    [c(0, 0, 0), c(0, 0, 1), c(0, 1, 1), c(0, 1, 0)],
                    [c(1, 0, 0), c(1, 1, 0), c(1, 1, 1), c(1, 0, 1)],
                    [c(0, 0, 0), c(1, 0, 0), c(1, 0, 1), c(0, 0, 1)],
                    [c(0, 1, 0), c(0, 1, 1), c(1, 1, 1), c(1, 1, 0)],
                    [c(0, 0, 0), c(0, 1, 0), c(1, 1, 0), c(1, 0, 0)],
                    [c(0, 0, 1), c(1, 0, 1), c(1, 1, 1), c(0, 1, 1)],
                ];
                for [a, b, c, d] in quads {
                    out.push([a, b, c]);
                    out.push([a, c, d]);
                }
            }
        }
        out
    }
}

/// Rigid placement: base position and rotation about +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    /// Yaw (rad).
    pub yaw: f64,
}

impl Pose {
    pub fn at(position: Vec3) -> Self {
        Self { position, yaw: 0.0 }
    }

    fn apply(&self, p: &Vec3) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z) + self.position
    }
}

/// Moving entity represented by a canned mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyObject {
    pub shape: ProxyShape,
    pub pose: Pose,
    /// Material database label (region label of the inserted mesh).
    pub material: String,
}

impl ProxyObject {
    pub fn human(pose: Pose) -> Self {
        Self { shape: ProxyShape::human(), pose, material: "human body".into() }
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if !(self.pose.position.iter().all(|x| x.is_finite()) && self.pose.yaw.is_finite()) {
            return Err(Error::InvalidInput("proxy pose must be finite".into()));
        }
        Ok(())
    }

    pub fn triangles(&self) -> Vec<[Vec3; 3]> {
        self.shape.local_triangles().iter().map(|t| t.map(|v| self.pose.apply(&v))).collect()
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.triangles().iter().flatten())
    }

    pub fn with_pose(&self, pose: Pose) -> Self {
        Self { pose, ..self.clone() }
    }
}

/// Box in which the scene changed between two epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirtyRegion {
    pub bbox: Aabb,
    /// Epoch the cached traces must come from.
    pub from_epoch: u64,
    /// Epoch of the mutated scene.
    pub to_epoch: u64,
}

impl DirtyRegion {
    /// Chains two consecutive changes into one.
    pub fn then(&self, next: &DirtyRegion) -> Result<DirtyRegion> {
        if next.from_epoch != self.to_epoch {
            return Err(Error::StaleEpoch { cached: self.to_epoch, expected: next.from_epoch });
        }
        Ok(DirtyRegion { bbox: self.bbox.union(&next.bbox), from_epoch: self.from_epoch, to_epoch: next.to_epoch })
    }
}

fn build_part(proxy: &ProxyObject, region: u32, first_id: u32, group_base: u32) -> Result<(MeshPart, u32)> {
    let mut tris: Vec<Triangle> = proxy.triangles().into_iter().filter_map(|[a, b, c]| Triangle::new(a, b, c, region)).collect();
    if tris.is_empty() {
        return Err(Error::InvalidInput("proxy mesh is degenerate".into()));
    }
    let (groups, n) = plane_groups(&tris);
    for (t, g) in tris.iter_mut().zip(groups) {
        t.group = group_base + g;
    }
    Ok((MeshPart::new(tris, first_id, Some(region)), n))
}

/// Adds the proxy under a fresh surface region (the next free id unless
/// `region` is given). Only the proxy's own index is built; the static mesh is
/// shared with the previous epoch.
pub fn insert_proxy(scene: &Scene, proxy: &ProxyObject, region: Option<u32>) -> Result<(Scene, u32, DirtyRegion)> {
    proxy.validate()?;
    let next = scene.region_count() as u32;
    let region = region.unwrap_or(next);
    if region < next {
        return Err(Error::RegionInUse(region));
    }
    if region != next {
        return Err(Error::InvalidInput(format!("proxy region must be the next free id {next}, got {region}")));
    }
    let (part, n_groups) = build_part(proxy, region, scene.next_triangle_id(), scene.group_count)?;
    let bbox = part.bvh.bounds().expect("non-empty proxy").inflate(DIRTY_MARGIN);
    let mut out = scene.clone();
    out.parts.push(Arc::new(part));
    out.region_labels.push(proxy.material.clone());
    out.group_count += n_groups;
    out.epoch += 1;
    let dirty = DirtyRegion { bbox, from_epoch: scene.epoch, to_epoch: out.epoch };
    Ok((out, region, dirty))
}

/// Moves an inserted proxy to `pose`. The dirty box covers the old and new
/// placements plus the margin.
pub fn move_proxy(scene: &Scene, region: u32, proxy: &ProxyObject, pose: Pose) -> Result<(Scene, DirtyRegion)> {
    let moved = proxy.with_pose(pose);
    moved.validate()?;
    let idx = scene.proxy_part(region).ok_or_else(|| Error::InvalidInput(format!("region {region} is not a proxy")))?;
    let old = &scene.parts[idx];
    // fresh group ids keep every epoch's plane groups unique
    let (part, n_groups) = build_part(&moved, region, old.first_id, scene.group_count)?;
    if part.tris.len() != old.tris.len() {
        return Err(Error::InvalidInput("moved proxy must keep its tessellation".into()));
    }
    let old_box = old.bvh.bounds().expect("non-empty proxy");
    let bbox = old_box.union(&part.bvh.bounds().expect("non-empty proxy")).inflate(DIRTY_MARGIN);
    let mut out = scene.clone();
    out.parts[idx] = Arc::new(part);
    out.group_count += n_groups;
    out.epoch += 1;
    let dirty = DirtyRegion { bbox, from_epoch: scene.epoch, to_epoch: out.epoch };
    Ok((out, dirty))
}
