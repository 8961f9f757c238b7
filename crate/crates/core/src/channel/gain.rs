use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;

use super::fresnel::{fresnel, fresnel_derivative};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::materials::{complex_permittivity, permittivity_dsigma, MaterialParams};
use crate::tracer::{tangent_frame, InteractionKind, PathKind, PropagationPath};
use crate::util::{wavelength, wrap_angle, SPEED_OF_LIGHT};

type CVec3 = Vector3<Complex64>;

/// Largest diffuse patch that contributes coherently, in wavelengths per side.
const A_EFF_CAP_WAVELENGTHS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGain {
    pub amplitude: Complex64,
    /// Propagation delay (s).
    pub delay: f64,
    /// Departure (azimuth, elevation) at the transmitter (rad).
    pub aod: (f64, f64),
    /// Arrival (azimuth, elevation) at the receiver (rad), pointing back
    /// toward the incoming wave.
    pub aoa: (f64, f64),
}

/// Derivatives of a path amplitude with respect to one interaction's material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainGradient {
    pub region: u32,
    pub d_sigma: Complex64,
    pub d_eps_r: Complex64,
    pub d_scattering: Complex64,
}

pub fn azimuth_elevation(d: &Vec3) -> (f64, f64) {
    (wrap_angle(d.y.atan2(d.x)), d.z.clamp(-1.0, 1.0).asin())
}

/// Reference linear polarisation for propagation direction `k`: the
/// projection of the vertical onto the transverse plane (x for vertical `k`).
pub fn polarization_basis(k: &Vec3) -> Vec3 {
    let v = Vec3::z() - k * k.z;
    if v.norm() > 1e-9 {
        v.normalize()
    } else {
        (Vec3::x() - k * k.x).normalize()
    }
}

fn cvec(v: &Vec3) -> CVec3 {
    v.map(|x| Complex64::new(x, 0.0))
}

fn cdot(a: &CVec3, b: &Vec3) -> Complex64 {
    a.x * b.x + a.y * b.y + a.z * b.z
}

/// Per-reflection linear operator `E -> g_te (E.s) s + g_tm (E.p_in) p_out`.
#[derive(Debug, Clone, Copy)]
struct Bounce {
    s: Vec3,
    p_in: Vec3,
    p_out: Vec3,
}

impl Bounce {
    fn new(k_in: &Vec3, k_out: &Vec3, n: &Vec3) -> Self {
        let c = k_in.cross(n);
        let s = if c.norm() > 1e-12 { c.normalize() } else { tangent_frame(n).0 };
        Self { s, p_in: s.cross(k_in), p_out: s.cross(k_out) }
    }

    fn apply(&self, e: &CVec3, te: Complex64, tm: Complex64) -> CVec3 {
        cvec(&self.s) * (te * cdot(e, &self.s)) + cvec(&self.p_out) * (tm * cdot(e, &self.p_in))
    }
}

struct Coeffs {
    te: Complex64,
    tm: Complex64,
    d_te: Complex64,
    d_tm: Complex64,
}

fn material(materials: &[MaterialParams], region: u32) -> Result<MaterialParams> {
    materials.get(region as usize).copied().ok_or(Error::UnknownRegion(region))
}

/// Complex amplitude, delay and angles of one propagation path.
pub fn path_gain(path: &PropagationPath, materials: &[MaterialParams], freq_hz: f64) -> Result<PathGain> {
    evaluate(path, materials, freq_hz, false).map(|(g, _)| g)
}

/// [`path_gain`] plus the amplitude derivatives with respect to the
/// `(sigma, eps_r, S)` of every interaction, in interaction order.
pub fn path_gain_with_gradient(
    path: &PropagationPath,
    materials: &[MaterialParams],
    freq_hz: f64,
) -> Result<(PathGain, Vec<GainGradient>)> {
    evaluate(path, materials, freq_hz, true)
}

fn evaluate(path: &PropagationPath, materials: &[MaterialParams], freq_hz: f64, want_grad: bool) -> Result<(PathGain, Vec<GainGradient>)> {
    if !(freq_hz > 0.0 && freq_hz.is_finite()) {
        return Err(Error::InvalidInput(format!("frequency must be positive, got {freq_hz}")));
    }
    let lambda = wavelength(freq_hz);
    let phase = Complex64::from_polar(1.0, -2.0 * PI * freq_hz * path.length / SPEED_OF_LIGHT);
    let departure = path.departure();
    let arrival = path.arrival();
    let geometry = PathGain {
        amplitude: Complex64::new(0.0, 0.0),
        delay: path.length / SPEED_OF_LIGHT,
        aod: azimuth_elevation(&departure),
        aoa: azimuth_elevation(&arrival),
    };
    let deta_dsigma = permittivity_dsigma(freq_hz);
    let coeffs = |m: &MaterialParams, cos_theta: f64| -> Result<Coeffs> {
        let theta = cos_theta.clamp(0.0, 1.0).acos();
        let eta = complex_permittivity(m.eps_r, m.sigma, freq_hz);
        let (te, tm) = fresnel(theta, eta)?;
        let (d_te, d_tm) = if want_grad { fresnel_derivative(theta, eta)? } else { Default::default() };
        Ok(Coeffs { te, tm, d_te, d_tm })
    };

    match path.kind {
        PathKind::Los => Ok((PathGain { amplitude: phase * (lambda / (4.0 * PI * path.length)), ..geometry }, Vec::new())),
        PathKind::Scattered => {
            let it = path
                .interactions
                .first()
                .filter(|i| i.kind == InteractionKind::Scatter)
                .ok_or_else(|| Error::InvalidInput("scattered path without a scatter interaction".into()))?;
            let m = material(materials, it.region)?;
            let to_tx = path.tx - it.point;
            let to_rx = path.rx - it.point;
            let (r1, r2) = (to_tx.norm(), to_rx.norm());
            let cos_i = it.normal.dot(&to_tx) / r1;
            let cos_s = (it.normal.dot(&to_rx) / r2).max(0.0);
            let c = coeffs(&m, cos_i)?;
            let gbar = ((c.te.norm_sqr() + c.tm.norm_sqr()) / 2.0).sqrt();
            let a_eff = it.area.min((A_EFF_CAP_WAVELENGTHS * lambda).powi(2));
            let base = phase * (lambda / (4.0 * PI * r1 * r2) * (cos_s / PI).sqrt() * a_eff.sqrt());
            let s = m.scattering;
            let amplitude = base * (s * gbar);
            let mut grads = Vec::new();
            if want_grad {
                // d|G| / dx for a real parameter x entering through eta
                let dgbar = |deta: Complex64| {
                    if gbar == 0.0 {
                        return 0.0;
                    }
                    ((c.te.conj() * c.d_te * deta).re + (c.tm.conj() * c.d_tm * deta).re) / (2.0 * gbar)
                };
                grads.push(GainGradient {
                    region: it.region,
                    d_sigma: base * (s * dgbar(deta_dsigma)),
                    d_eps_r: base * (s * dgbar(Complex64::new(1.0, 0.0))),
                    d_scattering: base * gbar,
                });
            }
            Ok((PathGain { amplitude, ..geometry }, grads))
        }
        PathKind::Specular => {
            let verts = path.vertices();
            let k = path.interactions.len();
            let mut bounces = Vec::with_capacity(k);
            let mut cs = Vec::with_capacity(k);
            let mut mats = Vec::with_capacity(k);
            for (j, it) in path.interactions.iter().enumerate() {
                if it.kind != InteractionKind::Reflect {
                    return Err(Error::InvalidInput("specular path with a non-reflect interaction".into()));
                }
                let k_in = (verts[j + 1] - verts[j]).normalize();
                let k_out = (verts[j + 2] - verts[j + 1]).normalize();
                let m = material(materials, it.region)?;
                cs.push(coeffs(&m, -k_in.dot(&it.normal))?);
                bounces.push(Bounce::new(&k_in, &k_out, &it.normal));
                mats.push(m);
            }
            let rough: Vec<f64> = mats.iter().map(|m| (1.0 - m.scattering * m.scattering).max(0.0).sqrt()).collect();
            let spread = phase * (lambda / (4.0 * PI * path.length));
            let rx_pol = polarization_basis(&-arrival);

            // prefix[j] = field after j bounces
            let mut prefix = Vec::with_capacity(k + 1);
            prefix.push(cvec(&polarization_basis(&departure)));
            for j in 0..k {
                let e = bounces[j].apply(&prefix[j], cs[j].te, cs[j].tm) * Complex64::new(rough[j], 0.0);
                prefix.push(e);
            }
            let amplitude = spread * cdot(&prefix[k], &rx_pol);

            let mut grads = Vec::new();
            if want_grad {
                // suffix[j]: linear map of the field after bounce j to the RX
                // response, represented by propagating basis vectors forward.
                for j in 0..k {
                    let tail = |e: CVec3| -> Complex64 {
                        let mut e = e;
                        for (i, b) in bounces.iter().enumerate().skip(j + 1) {
                            e = b.apply(&e, cs[i].te, cs[i].tm) * Complex64::new(rough[i], 0.0);
                        }
                        spread * cdot(&e, &rx_pol)
                    };
                    let e = &prefix[j];
                    let b = &bounces[j];
                    let r = Complex64::new(rough[j], 0.0);
                    let d_eps = tail(b.apply(e, cs[j].d_te, cs[j].d_tm) * r);
                    let d_sigma = tail(b.apply(e, cs[j].d_te * deta_dsigma, cs[j].d_tm * deta_dsigma) * r);
                    let s = mats[j].scattering;
                    let dr = if rough[j] > 0.0 { -s / rough[j] } else { 0.0 };
                    let d_s = tail(b.apply(e, cs[j].te, cs[j].tm) * Complex64::new(dr, 0.0));
                    grads.push(GainGradient { region: path.interactions[j].region, d_sigma, d_eps_r: d_eps, d_scattering: d_s });
                }
            }
            Ok((PathGain { amplitude, ..geometry }, grads))
        }
    }
}
