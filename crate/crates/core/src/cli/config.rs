use std::path::Path;

use serde::{Deserialize, Serialize};

use mmtwin::beamsel::{BeamCodebook, LinkBudget};
use mmtwin::calibration::CalibrationConfig;
use mmtwin::metrics::ClusterGates;
use mmtwin::semantics::AssignConfig;
use mmtwin::tracer::TraceConfig;
use mmtwin::{Error, Result};

/// Everything a run can be configured with; one TOML file, every field
/// optional. Command-line flags override the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub frequency_hz: f64,
    /// Latent embedding length L.
    pub embedding_dim: usize,
    pub trace: TraceConfig,
    pub calibration: CalibrationConfig,
    pub assign: AssignSection,
    pub clusters: ClusterGates,
    pub codebook: BeamCodebook,
    pub link_budget: LinkBudget,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            frequency_hz: 60.5e9,
            embedding_dim: 8,
            trace: TraceConfig::default(),
            calibration: CalibrationConfig::default(),
            assign: AssignSection::default(),
            clusters: ClusterGates::default(),
            codebook: BeamCodebook::default(),
            link_budget: LinkBudget::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssignSection {
    pub association_radius: f64,
    pub score_weighted: bool,
    pub default_material: String,
}

impl Default for AssignSection {
    fn default() -> Self {
        let d = AssignConfig::default();
        Self { association_radius: d.association_radius, score_weighted: d.score_weighted, default_material: d.default_material }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
        toml::from_str(&text).map_err(|e| Error::Parse { context: path.display().to_string(), message: e.to_string() })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.trace.rng_seed = seed;
        self.calibration.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return Err(Error::InvalidInput("frequency_hz must be positive".into()));
        }
        if self.embedding_dim < 3 {
            return Err(Error::InvalidInput("embedding_dim must be at least 3".into()));
        }
        self.trace.validate()?;
        self.calibration.validate()?;
        self.codebook.validate()?;
        self.link_budget.validate()
    }

    pub fn assign_config(&self) -> AssignConfig {
        AssignConfig {
            association_radius: self.assign.association_radius,
            score_weighted: self.assign.score_weighted,
            default_material: self.assign.default_material.clone(),
            frequency_hz: self.frequency_hz,
        }
    }
}
