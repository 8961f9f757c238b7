use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Fresnel reflection coefficients `(TE, TM)` for incidence angle `theta`
/// (rad from the normal) onto a half-space of relative permittivity `eta`.
///
/// At exactly grazing incidence both coefficients take their limit `-1`.
pub fn fresnel(theta: f64, eta: Complex64) -> Result<(Complex64, Complex64)> {
    check_angle(theta)?;
    if theta >= FRAC_PI_2 {
        return Ok((Complex64::new(-1.0, 0.0), Complex64::new(-1.0, 0.0)));
    }
    let c = theta.cos();
    // eta - sin^2 written as (eta - 1) + cos^2: no cancellation near grazing.
    let r = (eta - 1.0 + c * c).sqrt();
    Ok(((c - r) / (c + r), (eta * c - r) / (eta * c + r)))
}

/// Derivatives `(dTE/deta, dTM/deta)` of the Fresnel coefficients.
pub fn fresnel_derivative(theta: f64, eta: Complex64) -> Result<(Complex64, Complex64)> {
    check_angle(theta)?;
    if theta >= FRAC_PI_2 {
        return Ok((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)));
    }
    let c = theta.cos();
    let s2 = theta.sin().powi(2);
    let r = (eta - 1.0 + c * c).sqrt();
    let d_te = -c / (r * (c + r) * (c + r));
    let den = eta * c + r;
    let d_tm = c * (eta - 2.0 * s2) / (r * den * den);
    Ok((d_te, d_tm))
}

fn check_angle(theta: f64) -> Result<()> {
    if !(0.0..=FRAC_PI_2).contains(&theta) {
        return Err(Error::InvalidInput(format!("incidence angle {theta} outside [0, pi/2]")));
    }
    Ok(())
}

/// Lambertian lobe `max(n.k_s, 0) / pi`; independent of the incident direction.
pub fn lambertian_bsdf(_k_in: &Vec3, k_out: &Vec3, normal: &Vec3) -> f64 {
    normal.dot(k_out).max(0.0) / PI
}
