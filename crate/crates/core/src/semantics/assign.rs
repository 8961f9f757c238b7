use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{match_material, roughness_to_scattering, SemanticPoint, TextEmbeddingSet};
use crate::error::{Error, Result};
use crate::geometry::Scene;
use crate::materials::{embedding_from_params, MaterialDb, MaterialEmbedding, MaterialParams, ReadoutWeights};
use crate::util::csv_error;

#[derive(Debug, Clone, PartialEq)]
pub struct AssignConfig {
    /// Points farther than this from every triangle are discarded (m).
    pub association_radius: f64,
    /// Weight votes by the cosine score instead of plain counts.
    pub score_weighted: bool,
    /// Database label used for regions without any associated point.
    pub default_material: String,
    pub frequency_hz: f64,
}

impl Default for AssignConfig {
    fn default() -> Self {
        Self { association_radius: 0.05, score_weighted: false, default_material: "concrete".into(), frequency_hz: 60.5e9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialSource {
    /// Majority vote over matched semantic points.
    Vision,
    /// Configured fallback (no points, or a label missing from the database).
    Default,
    /// Output of a calibration run.
    Calibrated,
    /// Supplied directly by the user.
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMaterial {
    pub region: u32,
    pub region_label: String,
    pub material: String,
    pub sigma: f64,
    pub eps_r: f64,
    pub scattering: f64,
    pub source: MaterialSource,
    /// Number of semantic points associated with the region.
    pub points: usize,
}

impl RegionMaterial {
    pub fn params(&self) -> MaterialParams {
        MaterialParams::new(self.sigma, self.eps_r, self.scattering)
    }
}

/// Per-region materials plus the embeddings initialised from them.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionAssignment {
    pub regions: Vec<RegionMaterial>,
    pub embeddings: Vec<MaterialEmbedding>,
    pub discarded_points: usize,
    pub warnings: Vec<String>,
}

impl RegionAssignment {
    /// Builds an assignment from explicit per-region records, initialising
    /// embeddings by inversion. Records must cover regions `0..K` in order.
    pub fn from_records(regions: Vec<RegionMaterial>, weights: &ReadoutWeights) -> Result<Self> {
        let mut embeddings = Vec::with_capacity(regions.len());
        for (i, r) in regions.iter().enumerate() {
            if r.region as usize != i {
                return Err(Error::InvalidInput(format!("assignment row {i} has region {}, expected {i}", r.region)));
            }
            embeddings.push(embedding_from_params(r.params(), weights)?.0);
        }
        Ok(Self { regions, embeddings, discarded_points: 0, warnings: Vec::new() })
    }

    pub fn params(&self) -> Vec<MaterialParams> {
        self.regions.iter().map(RegionMaterial::params).collect()
    }

    /// CSV with a header row; one line per region.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for r in &self.regions {
            w.serialize(r).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>, weights: &ReadoutWeights) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut rows: Vec<RegionMaterial> = r.deserialize().collect::<std::result::Result<_, _>>().map_err(|e| csv_error(path, e))?;
        rows.sort_by_key(|r| r.region);
        for row in &rows {
            if !row.params().is_physical() {
                return Err(Error::parse(path.display().to_string(), format!("region {} has unphysical parameters", row.region)));
            }
        }
        Self::from_records(rows, weights)
    }
}

/// Assigns a database material to every surface region of `scene`.
///
/// Each point is associated with its nearest triangle (within the configured
/// radius) and matched against the text embeddings; each region takes the
/// majority label of its points, ties going to the earlier label of the
/// embedding set. Scattering comes from the majority roughness label when
/// available and otherwise from the midpoint of the database interval.
pub fn assign_regions(
    scene: &Scene,
    points: &[SemanticPoint],
    texts: &TextEmbeddingSet,
    db: &MaterialDb,
    weights: &ReadoutWeights,
    config: &AssignConfig,
) -> Result<RegionAssignment> {
    if points.is_empty() {
        return Err(Error::EmptySemanticExport);
    }
    let k = scene.region_count();
    let n_labels = texts.labels().len();
    let rough_table = super::roughness_table();
    let mut votes = vec![vec![0.0f64; n_labels]; k];
    let mut rough_votes = vec![vec![0usize; rough_table.len()]; k];
    let mut counts = vec![0usize; k];
    let mut discarded = 0;
    let mut warnings = Vec::new();

    for p in points {
        let Some((_, _, tri)) = scene.nearest_point(&p.position, config.association_radius) else {
            discarded += 1;
            continue;
        };
        let region = scene.triangle(tri).region as usize;
        let (label, score) = match_material(&p.fused_feature()?, texts)?;
        let li = texts.label_index(&label).expect("matched label belongs to the set");
        votes[region][li] += if config.score_weighted { score.max(0.0) } else { 1.0 };
        counts[region] += 1;
        if let Some(r) = &p.roughness {
            match rough_table.iter().position(|row| row.label.eq_ignore_ascii_case(r.trim())) {
                Some(ri) => rough_votes[region][ri] += 1,
                None => warnings.push(format!("unknown roughness label `{r}` ignored")),
            }
        }
    }
    if discarded > 0 {
        log::info!("{discarded} semantic point(s) farther than {} m from the mesh discarded", config.association_radius);
    }

    let default = db.lookup_at(&config.default_material, config.frequency_hz).or_else(|_| db.lookup(&config.default_material))?;
    let mut regions = Vec::with_capacity(k);
    let mut embeddings = Vec::with_capacity(k);
    for r in 0..k {
        let region_label = scene.region_label(r as u32).unwrap_or_default().to_string();
        let winner = argmax_first(&votes[r]).filter(|_| counts[r] > 0);
        let (entry, source) = match winner {
            None => {
                warnings.push(format!("region {r} ({region_label}) has no semantic points; using default `{}`", default.label));
                (default, MaterialSource::Default)
            }
            Some(li) => {
                let label = &texts.labels()[li];
                match db.lookup_at(label, config.frequency_hz).or_else(|_| db.lookup(label)) {
                    Ok(m) => (m, MaterialSource::Vision),
                    Err(_) => {
                        warnings.push(format!("region {r}: label `{label}` not in the database; using default `{}`", default.label));
                        (default, MaterialSource::Default)
                    }
                }
            }
        };
        let mut params = entry.nominal_params();
        let rough_total: usize = rough_votes[r].iter().sum();
        if rough_total > 0 {
            let ri = rough_votes[r].iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).unwrap().0;
            let s = roughness_to_scattering(rough_table[ri].label)?;
            params.scattering = 0.5 * (s[0] + s[1]);
        }
        embeddings.push(embedding_from_params(params, weights)?.0);
        regions.push(RegionMaterial {
            region: r as u32,
            region_label,
            material: entry.label.clone(),
            sigma: params.sigma,
            eps_r: params.eps_r,
            scattering: params.scattering,
            source,
            points: counts[r],
        });
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(RegionAssignment { regions, embeddings, discarded_points: discarded, warnings })
}

fn argmax_first(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in v.iter().enumerate() {
        if best.is_none_or(|b| x > v[b]) {
            best = Some(i);
        }
    }
    best
}
