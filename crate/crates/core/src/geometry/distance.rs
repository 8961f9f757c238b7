use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Scene, Vec3};
use crate::error::{Error, Result};

/// Distances from surface samples of one mesh to another.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSummary {
    pub distances: Vec<f64>,
    pub thresholds: Vec<f64>,
    /// Fraction of samples with distance `<=` each threshold.
    pub fraction_within: Vec<f64>,
    /// Histogram bin edges (`bins + 1` values) and counts.
    pub histogram_edges: Vec<f64>,
    pub histogram_counts: Vec<usize>,
}

impl DistanceSummary {
    pub fn median(&self) -> f64 {
        let mut d = self.distances.clone();
        d.sort_by(f64::total_cmp);
        crate::util::median_sorted(&d)
    }
}

/// Draws `n` points uniformly by area over the scene surface.
pub fn sample_surface_points(scene: &Scene, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    if scene.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let tris: Vec<_> = scene.triangles().map(|(_, t)| t).collect();
    let mut cdf = Vec::with_capacity(tris.len());
    let mut acc = 0.0;
    for t in &tris {
        acc += t.area;
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let x = rng.gen::<f64>() * acc;
            let i = cdf.partition_point(|&c| c < x).min(tris.len() - 1);
            let (mut u, mut v): (f64, f64) = (rng.gen(), rng.gen());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            tris[i].v[0] + tris[i].e1 * u + tris[i].e2 * v
        })
        .collect())
}

/// Samples `n_samples` points on `a` and measures each one's distance to the
/// nearest point of `b`.
pub fn mesh_distance(a: &Scene, b: &Scene, n_samples: usize, thresholds: &[f64], bins: usize, seed: u64) -> Result<DistanceSummary> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be >= 1".into()));
    }
    let points = sample_surface_points(a, n_samples, seed)?;
    let distances: Vec<f64> =
        points.iter().map(|p| b.nearest_point(p, f64::INFINITY).map(|(d, _, _)| d).unwrap_or(f64::INFINITY)).collect();
    let fraction_within = thresholds.iter().map(|&th| distances.iter().filter(|&&d| d <= th).count() as f64 / n_samples as f64).collect();
    let bins = bins.max(1);
    let hi = distances.iter().cloned().fold(0.0, f64::max);
    let width = if hi > 0.0 { hi / bins as f64 } else { 1.0 };
    let histogram_edges = (0..=bins).map(|i| i as f64 * width).collect();
    let mut histogram_counts = vec![0; bins];
    for &d in &distances {
        histogram_counts[((d / width) as usize).min(bins - 1)] += 1;
    }
    Ok(DistanceSummary { distances, thresholds: thresholds.to_vec(), fraction_within, histogram_edges, histogram_counts })
}
