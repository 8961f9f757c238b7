//! Independent reference implementations of the channel metrics.

use mmtwin::channel::MultipathComponent;
use mmtwin::tracer::PathKind;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

pub fn random_set(rng: &mut ChaCha8Rng) -> Vec<MultipathComponent> {
    // n >= 2: with one MPC the spread is 0 only up to cos^2 + sin^2 rounding,
    // where sqrt(-2 ln r) has unbounded condition number (covered exactly in
    // `worked_values`).
    let n = rng.gen_range(2..30);
    (0..n)
        .map(|_| MultipathComponent {
            delay: rng.gen_range(0.0..200e-9),
            aod_az: rng.gen_range(-PI..PI),
            aod_el: rng.gen_range(-1.5..1.5),
            aoa_az: rng.gen_range(-PI..PI),
            aoa_el: rng.gen_range(-1.5..1.5),
            amplitude: Complex64::from_polar(rng.gen_range(1e-5..1e-2), rng.gen_range(0.0..TAU)),
            kind: PathKind::Specular,
        })
        .collect()
}

// Double-double arithmetic so the literal moment formula can be evaluated
// without the cancellation that plain f64 suffers in `E[t^2] - E[t]^2`.
#[derive(Clone, Copy)]
struct Dd(f64, f64);

impl Dd {
    fn from(x: f64) -> Self {
        Dd(x, 0.0)
    }
    fn add(self, o: Dd) -> Dd {
        let s = self.0 + o.0;
        let bb = s - self.0;
        let err = (self.0 - (s - bb)) + (o.0 - bb);
        let lo = err + self.1 + o.1;
        let hi = s + lo;
        Dd(hi, lo - (hi - s))
    }
    fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }
    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let e = self.0.mul_add(o.0, -p) + (self.0 * o.1 + self.1 * o.0);
        let hi = p + e;
        Dd(hi, e - (hi - p))
    }
    fn div(self, o: Dd) -> Dd {
        let q1 = self.0 / o.0;
        let r = self.add(o.mul(Dd::from(q1)).neg());
        let q2 = r.0 / o.0;
        let r = r.add(o.mul(Dd::from(q2)).neg());
        let q3 = r.0 / o.0;
        Dd::from(q1).add(Dd::from(q2)).add(Dd::from(q3))
    }
    fn f(self) -> f64 {
        self.0 + self.1
    }
}

// Literal evaluation of the table formulas, written independently.
pub fn metrics_oracle(m: &[MultipathComponent], los: Option<usize>) -> (f64, f64, f64, Option<f64>) {
    let p: Vec<Dd> = m
        .iter()
        .map(|x| {
            let (re, im) = (Dd::from(x.amplitude.re), Dd::from(x.amplitude.im));
            re.mul(re).add(im.mul(im))
        })
        .collect();
    let zero = Dd::from(0.0);
    let sp = p.iter().fold(zero, |a, &b| a.add(b));
    let m1 = p.iter().zip(m).fold(zero, |a, (&p, x)| a.add(p.mul(Dd::from(x.delay)))).div(sp);
    let m2 = p.iter().zip(m).fold(zero, |a, (&p, x)| a.add(p.mul(Dd::from(x.delay)).mul(Dd::from(x.delay)))).div(sp);
    let var = m2.add(m1.mul(m1).neg()).f();
    // 1 - r^2 = (S^2 - |sum P e^{j phi}|^2) / S^2, expanded over ordered pairs with
    // 1 - cos(d) = 2 sin^2(d / 2); evaluating cos/sin of the raw angles instead
    // loses ~1e-16 / (1 - r) relative accuracy once the spread is concentrated.
    let mut gap = zero;
    for (i, (&pi, a)) in p.iter().zip(m).enumerate() {
        for (&pj, b) in p.iter().zip(m).skip(i + 1) {
            let s = Dd::from(((a.aoa_az - b.aoa_az) / 2.0).sin());
            gap = gap.add(Dd::from(4.0).mul(pi).mul(pj).mul(s).mul(s));
        }
    }
    let q = gap.div(sp.mul(sp)).f().min(1.0);
    let k = los.map(|i| 10.0 * (p[i].f() / sp.add(p[i].neg()).f()).log10());
    (-10.0 * sp.f().log10(), var.max(0.0).sqrt(), (-(-q).ln_1p()).max(0.0).sqrt(), k)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() < 1e-300
}

/// Literal tap power and delay spread of a CIR sampled at `w`.
pub fn tap_oracle(taps: &[Complex64], w: f64) -> (f64, f64) {
    let p: f64 = taps.iter().map(|t| t.re * t.re + t.im * t.im).sum();
    let mean: f64 = taps.iter().enumerate().map(|(l, t)| l as f64 * (t.re * t.re + t.im * t.im)).sum::<f64>() / p;
    let tau = (taps.iter().enumerate().map(|(l, t)| ((l as f64 - mean) / w).powi(2) * (t.re * t.re + t.im * t.im)).sum::<f64>() / p).sqrt();
    (p, tau)
}
