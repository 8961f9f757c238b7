use std::f64::consts::PI;

use rand::Rng;

use crate::geometry::Vec3;

/// Plastic number, the generator of the R2 low-discrepancy sequence.
const PLASTIC: f64 = 1.324_717_957_244_746;

/// Launch direction `i` on the unit sphere.
///
/// Uses the R2 Kronecker sequence mapped through an area-preserving
/// cylinder-to-sphere projection. The sequence is prefix-stable: direction `i`
/// does not depend on the total ray count, so a larger budget only adds rays.
pub fn launch_direction(i: u64) -> Vec3 {
    let a1 = 1.0 / PLASTIC;
    let a2 = 1.0 / (PLASTIC * PLASTIC);
    let n = i as f64;
    let u = (0.5 + a1 * n).fract();
    let v = (0.5 + a2 * n).fract();
    let z = 1.0 - 2.0 * u;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * PI * v;
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Orthonormal tangent pair `(t, b)` with `t x b = n` (Duff et al. 2017).
pub(crate) fn tangent_frame(n: &Vec3) -> (Vec3, Vec3) {
    let sign = 1.0f64.copysign(n.z);
    let a = -1.0 / (sign + n.z);
    let b = n.x * n.y * a;
    let t = Vec3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x);
    let bt = Vec3::new(b, sign + n.y * n.y * a, -n.y);
    (t, bt)
}

/// Cosine-weighted direction in the hemisphere around `normal`
/// (density `cos(theta) / pi` per steradian).
pub fn sample_scatter_direction(normal: &Vec3, rng: &mut impl Rng) -> Vec3 {
    let (t, b) = tangent_frame(normal);
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let r = u1.sqrt();
        let phi = 2.0 * PI * u2;
        let z = (1.0 - u1).sqrt();
        // u1 == 1 would give a tangent direction; redraw to keep n.d > 0
        if z > 0.0 {
            return (t * (r * phi.cos()) + b * (r * phi.sin()) + normal * z).normalize();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn launch_directions_are_unit_and_spread() {
        let n = 20_000;
        let mut mean = Vec3::zeros();
        for i in 0..n {
            let d = launch_direction(i);
            assert!((d.norm() - 1.0).abs() < 1e-12);
            mean += d;
        }
        assert!((mean / n as f64).norm() < 5e-3);
    }

    #[test]
    fn frame_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let n = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
            let (t, b) = tangent_frame(&n);
            assert!((t.norm() - 1.0).abs() < 1e-12 && (b.norm() - 1.0).abs() < 1e-12);
            assert!(t.dot(&n).abs() < 1e-12 && b.dot(&n).abs() < 1e-12 && t.dot(&b).abs() < 1e-12);
        }
        let (t, b) = tangent_frame(&-Vec3::z());
        assert!(t.dot(&b).abs() < 1e-12);
    }

    #[test]
    fn scatter_in_hemisphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = Vec3::new(0.3, -0.4, 0.5).normalize();
        for _ in 0..10_000 {
            assert!(sample_scatter_direction(&n, &mut rng).dot(&n) > 0.0);
        }
    }
}
