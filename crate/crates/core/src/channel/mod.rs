//! Per-path electromagnetic gains, multipath synthesis and the global power
//! scale.
//!
//! Conventions: time dependence `exp(+j w t)`, so a path of length `L`
//! carries the phase `exp(-j 2 pi f L / c)`; transmitter and receiver are
//! isotropic, vertically polarised probes and reflections act on the full
//! transverse field through their TE/TM coefficients.

mod fresnel;
mod gain;
mod io;
mod synth;

pub use fresnel::{fresnel, fresnel_derivative, lambertian_bsdf};
pub use gain::{azimuth_elevation, path_gain, path_gain_with_gradient, polarization_basis, GainGradient, PathGain};
pub use io::{read_mpcs_csv, write_cir_csv, write_mpcs_csv, MpcRow};
pub use synth::{calibrate_scale, synthesize, ChannelImpulseResponse, CirSpec, MultipathComponent, ScaleState};
