//! Material database, trainable embedding read-out and complex permittivity.

mod db;
mod embedding;

pub use db::{MaterialDb, RadioMaterial};
pub(crate) use embedding::readout_derivatives;
pub use embedding::{embedding_from_params, params_from_embedding, MaterialEmbedding, MaterialParams, ReadoutWeights, DEFAULT_LATENT_DIM};

use num_complex::Complex64;

use crate::util::VACUUM_PERMITTIVITY;

/// `eps_r - j sigma / (2 pi f eps0)` under the `exp(+j w t)` time convention,
/// so lossy media have a non-positive imaginary part.
pub fn complex_permittivity(eps_r: f64, sigma: f64, freq_hz: f64) -> Complex64 {
    Complex64::new(eps_r, -sigma / (2.0 * std::f64::consts::PI * freq_hz * VACUUM_PERMITTIVITY))
}

/// `d eta / d sigma` at fixed frequency.
pub(crate) fn permittivity_dsigma(freq_hz: f64) -> Complex64 {
    Complex64::new(0.0, -1.0 / (2.0 * std::f64::consts::PI * freq_hz * VACUUM_PERMITTIVITY))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_is_real() {
        let eta = complex_permittivity(5.24, 0.0, 60.5e9);
        assert_eq!(eta, Complex64::new(5.24, 0.0));
    }

    #[test]
    fn concrete_imaginary_part() {
        let eta = complex_permittivity(5.24, 0.123, 60.5e9);
        assert!((eta.im - (-0.0365)).abs() < 5e-5, "{}", eta.im);
        assert_eq!(eta.re, 5.24);
    }

    #[test]
    fn loss_monotone_in_sigma() {
        let mut last = 0.0;
        for k in 1..20 {
            let im = complex_permittivity(3.0, k as f64 * 0.1, 60.5e9).im.abs();
            assert!(im > last);
            last = im;
        }
    }
}
