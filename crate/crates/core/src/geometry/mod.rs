//! Triangle-mesh scenes, ray queries and mesh-to-mesh distance analysis.

mod bvh;
mod distance;
mod io;
pub(crate) mod scene;

pub use bvh::Bvh;
pub use distance::{mesh_distance, sample_surface_points, DistanceSummary};
pub use io::{load_mesh, load_mesh_with_regions, parse_region_map, write_ascii_ply, LoadReport, RegionRange};
pub use scene::{Scene, SceneBuilder, Triangle};

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Tolerance used to decide whether a direction is unit length.
const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub t_min: f64,
    pub t_max: f64,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3, t_min: f64, t_max: f64) -> Result<Self> {
        if (direction.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidInput(format!("ray direction must be unit length, got |d| = {}", direction.norm())));
        }
        if !(t_min >= 0.0 && t_min < t_max) {
            return Err(Error::InvalidInput(format!("ray interval must satisfy 0 <= t_min < t_max, got [{t_min}, {t_max}]")));
        }
        Ok(Self { origin, direction, t_min, t_max })
    }

    /// Ray from `origin` along a direction that is normalized here.
    pub fn towards(origin: Vec3, direction: Vec3) -> Self {
        Self { origin, direction: direction.normalize(), t_min: 0.0, t_max: f64::INFINITY }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Nearest ray/triangle intersection. The normal faces the incoming ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Vec3,
    pub normal: Vec3,
    pub triangle: u32,
    pub region: u32,
}

/// Specular reflection `d - 2 (d.n) n`.
pub fn mirror_reflect(direction: &Vec3, normal: &Vec3) -> Result<Vec3> {
    let dn = direction.dot(normal);
    if dn.abs() < 1e-12 {
        return Err(Error::Grazing(dn.abs()));
    }
    if dn > 0.0 {
        return Err(Error::InvalidInput("direction must point against the normal (d.n < 0)".into()));
    }
    Ok(direction - normal * (2.0 * dn))
}

/// Reflection without the incidence checks; used inside the tracer where the
/// normal is already oriented against the ray.
pub(crate) fn reflect_unchecked(direction: &Vec3, normal: &Vec3) -> Vec3 {
    let r = direction - normal * (2.0 * direction.dot(normal));
    r / r.norm()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self { min: Vec3::repeat(f64::INFINITY), max: Vec3::repeat(f64::NEG_INFINITY) }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb { min: self.min.inf(&other.min), max: self.max.sup(&other.max) }
    }

    pub fn inflate(&self, margin: f64) -> Aabb {
        Aabb { min: self.min.add_scalar(-margin), max: self.max.add_scalar(margin) }
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min[i] <= self.max[i])
    }

    pub fn centroid(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn surface_area(&self) -> f64 {
        let d = self.max - self.min;
        2.0 * (d.x * d.y + d.y * d.z + d.z * d.x)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Slab test; returns the entry distance when the ray overlaps `[t_min, t_max]`.
    pub fn ray_entry(&self, origin: &Vec3, inv_dir: &Vec3, t_min: f64, t_max: f64) -> Option<f64> {
        let mut t0 = t_min;
        let mut t1 = t_max;
        for i in 0..3 {
            let mut ta = (self.min[i] - origin[i]) * inv_dir[i];
            let mut tb = (self.max[i] - origin[i]) * inv_dir[i];
            // 0 * inf for rays parallel to and on a slab face
            if ta.is_nan() {
                ta = f64::NEG_INFINITY;
            }
            if tb.is_nan() {
                tb = f64::INFINITY;
            }
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }

    /// Whether the segment `a -> b` touches the box.
    pub fn intersects_segment(&self, a: &Vec3, b: &Vec3) -> bool {
        let d = b - a;
        let inv = Vec3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z);
        self.ray_entry(a, &inv, 0.0, 1.0).is_some()
    }

    /// Whether the half-line from `origin` along `dir` (up to `t_max`) touches the box.
    pub fn intersects_ray(&self, origin: &Vec3, dir: &Vec3, t_max: f64) -> bool {
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        self.ray_entry(origin, &inv, 0.0, t_max).is_some()
    }

    pub fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d2 += v * v;
        }
        d2
    }
}

/// Möller-Trumbore intersection; returns `(t, u, v)` for `t` in `(t_min, t_max)`.
pub(crate) fn intersect_triangle(origin: &Vec3, dir: &Vec3, v0: &Vec3, e1: &Vec3, e2: &Vec3, t_min: f64, t_max: f64) -> Option<f64> {
    let p = dir.cross(e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-15 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - v0;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    if t > t_min && t < t_max {
        Some(t)
    } else {
        None
    }
}

/// Closest point on triangle `(a, b, c)` to `p` (Ericson, Real-Time Collision Detection 5.1.5).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirror_normal_incidence() {
        let r = mirror_reflect(&Vec3::new(0.0, 0.0, -1.0), &Vec3::z()).unwrap();
        assert_eq!(r, Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn mirror_oblique() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = mirror_reflect(&Vec3::new(s, 0.0, -s), &Vec3::z()).unwrap();
        assert!((r - Vec3::new(s, 0.0, s)).norm() < 1e-15);
    }

    #[test]
    fn mirror_rejects_grazing() {
        assert!(matches!(mirror_reflect(&Vec3::x(), &Vec3::z()), Err(Error::Grazing(_))));
    }

    #[test]
    fn ray_validation() {
        assert!(Ray::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 0.0), 0.0, 1.0).is_err());
        assert!(Ray::new(Vec3::zeros(), Vec3::x(), 1.0, 1.0).is_err());
        assert!(Ray::new(Vec3::zeros(), Vec3::x(), 0.0, f64::INFINITY).is_ok());
    }

    #[test]
    fn closest_point_regions() {
        let a = Vec3::zeros();
        let b = Vec3::x();
        let c = Vec3::y();
        assert!((closest_point_on_triangle(&Vec3::new(0.2, 0.2, 1.0), &a, &b, &c) - Vec3::new(0.2, 0.2, 0.0)).norm() < 1e-15);
        assert_eq!(closest_point_on_triangle(&Vec3::new(-1.0, -1.0, 0.0), &a, &b, &c), a);
        let e = closest_point_on_triangle(&Vec3::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((e - Vec3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn segment_box() {
        let b = Aabb { min: Vec3::repeat(-1.0), max: Vec3::repeat(1.0) };
        assert!(b.intersects_segment(&Vec3::new(-5.0, 0.0, 0.0), &Vec3::new(5.0, 0.0, 0.0)));
        assert!(!b.intersects_segment(&Vec3::new(-5.0, 2.0, 0.0), &Vec3::new(5.0, 2.0, 0.0)));
        assert!(!b.intersects_segment(&Vec3::new(-5.0, 0.0, 0.0), &Vec3::new(-3.0, 0.0, 0.0)));
        assert!(b.intersects_ray(&Vec3::new(-5.0, 0.0, 0.0), &Vec3::x(), f64::INFINITY));
    }
}
