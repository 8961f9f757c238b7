use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LATENT_DIM: usize = 8;

/// Margin used when a target sits on the boundary of the read-out range.
const BOUNDARY_MARGIN: f64 = 1e-6;

/// Physical EM parameters of a surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Conductivity (S/m).
    pub sigma: f64,
    /// Relative permittivity.
    pub eps_r: f64,
    /// Scattering coefficient in (0, 1).
    pub scattering: f64,
}

impl MaterialParams {
    pub fn new(sigma: f64, eps_r: f64, scattering: f64) -> Self {
        Self { sigma, eps_r, scattering }
    }

    pub fn is_physical(&self) -> bool {
        self.sigma > 0.0
            && self.eps_r >= 1.0
            && self.scattering > 0.0
            && self.scattering < 1.0
            && self.sigma.is_finite()
            && self.eps_r.is_finite()
    }
}

/// Fixed read-out vectors `w1, w2, w3` shared by all surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutWeights {
    w: [DVector<f64>; 3],
}

impl ReadoutWeights {
    pub fn new(w1: Vec<f64>, w2: Vec<f64>, w3: Vec<f64>) -> Result<Self> {
        let l = w1.len();
        if w2.len() != l || w3.len() != l || l == 0 {
            return Err(Error::InvalidInput("read-out weights must share a non-zero length".into()));
        }
        Ok(Self { w: [DVector::from_vec(w1), DVector::from_vec(w2), DVector::from_vec(w3)] })
    }

    /// The first three unit vectors of `R^dim`. Each physical parameter then
    /// owns one latent coordinate, so per-coordinate optimisers (Adam) scale
    /// steps per parameter instead of per mixture of parameters.
    pub fn canonical(dim: usize) -> Self {
        assert!(dim >= 3, "latent dimension must be at least 3");
        let e = |i: usize| DVector::from_fn(dim, |k, _| if k == i { 1.0 } else { 0.0 });
        Self { w: [e(0), e(1), e(2)] }
    }

    /// Random orthonormal read-out vectors of length `dim` (Gram-Schmidt on
    /// Gaussian draws).
    pub fn orthonormal(dim: usize, seed: u64) -> Self {
        assert!(dim >= 3, "latent dimension must be at least 3");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(3);
        while basis.len() < 3 {
            let mut v = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
            for b in &basis {
                let proj = v.dot(b);
                v -= b * proj;
            }
            let n = v.norm();
            if n > 1e-6 {
                basis.push(v / n);
            }
        }
        let [a, b, c]: [DVector<f64>; 3] = basis.try_into().expect("three vectors");
        Self { w: [a, b, c] }
    }

    pub fn dim(&self) -> usize {
        self.w[0].len()
    }

    pub fn vectors(&self) -> &[DVector<f64>; 3] {
        &self.w
    }

    fn gram(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.w[i].dot(&self.w[j]))
    }
}

/// Trainable latent vector of one surface region.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialEmbedding {
    pub v: DVector<f64>,
}

impl MaterialEmbedding {
    pub fn zeros(dim: usize) -> Self {
        Self { v: DVector::zeros(dim) }
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        Self { v: DVector::from_vec(v) }
    }

    /// The three pre-activation projections `v.w_i`.
    pub fn projections(&self, weights: &ReadoutWeights) -> [f64; 3] {
        let w = weights.vectors();
        [self.v.dot(&w[0]), self.v.dot(&w[1]), self.v.dot(&w[2])]
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `sigma = exp(v.w1)`, `eps_r = 1 + exp(v.w2)`, `S = sigmoid(v.w3)`.
pub fn params_from_embedding(embedding: &MaterialEmbedding, weights: &ReadoutWeights) -> Result<MaterialParams> {
    if embedding.v.len() != weights.dim() {
        return Err(Error::InvalidInput(format!(
            "embedding length {} does not match read-out length {}",
            embedding.v.len(),
            weights.dim()
        )));
    }
    let [a, b, c] = embedding.projections(weights);
    Ok(MaterialParams { sigma: a.exp(), eps_r: 1.0 + b.exp(), scattering: sigmoid(c) })
}

/// Jacobian of `(sigma, eps_r, S)` with respect to the three projections
/// (diagonal, so returned as a vector).
pub(crate) fn readout_derivatives(params: &MaterialParams) -> [f64; 3] {
    let s = params.scattering;
    [params.sigma, params.eps_r - 1.0, s * (1.0 - s)]
}

/// Minimum-norm embedding whose read-out reproduces `params`.
///
/// Boundary targets (`S` of exactly 0 or 1, `eps_r` of exactly 1) are pulled
/// inside by a small margin; the adjusted fields are listed in the second
/// return value.
pub fn embedding_from_params(params: MaterialParams, weights: &ReadoutWeights) -> Result<(MaterialEmbedding, Vec<String>)> {
    let MaterialParams { sigma, mut eps_r, mut scattering } = params;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("sigma must be positive and finite, got {sigma}")));
    }
    if !(eps_r >= 1.0 && eps_r.is_finite()) {
        return Err(Error::InvalidInput(format!("eps_r must be >= 1, got {eps_r}")));
    }
    if !(0.0..=1.0).contains(&scattering) {
        return Err(Error::InvalidInput(format!("scattering must lie in [0, 1], got {scattering}")));
    }
    let mut clamped = Vec::new();
    if eps_r - 1.0 < BOUNDARY_MARGIN {
        eps_r = 1.0 + BOUNDARY_MARGIN;
        clamped.push(format!("eps_r clamped to {eps_r}"));
    }
    if scattering < BOUNDARY_MARGIN {
        scattering = BOUNDARY_MARGIN;
        clamped.push(format!("scattering clamped to {scattering}"));
    } else if scattering > 1.0 - BOUNDARY_MARGIN {
        scattering = 1.0 - BOUNDARY_MARGIN;
        clamped.push(format!("scattering clamped to {scattering}"));
    }
    for c in &clamped {
        log::warn!("embedding initialisation: {c}");
    }

    let target = Vector3::new(sigma.ln(), (eps_r - 1.0).ln(), (scattering / (1.0 - scattering)).ln());
    let gram = weights.gram();
    if gram.determinant().abs() < 1e-12 {
        return Err(Error::InvalidInput("read-out weights are linearly dependent".into()));
    }
    // v = W^T (W W^T)^-1 u
    let coeff = gram.lu().solve(&target).ok_or_else(|| Error::InvalidInput("singular read-out Gram matrix".into()))?;
    let w = weights.vectors();
    let w_mat = DMatrix::from_columns(&[w[0].clone(), w[1].clone(), w[2].clone()]);
    let v = w_mat * DVector::from_column_slice(coeff.as_slice());
    Ok((MaterialEmbedding { v }, clamped))
}
