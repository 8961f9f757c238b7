use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the channel engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("mesh is empty")]
    EmptyMesh,
    #[error("missing surface-region mapping for face {0}")]
    MissingRegionMapping(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("duplicate material label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown material label `{0}`")]
    UnknownLabel(String),
    #[error("unknown surface region {0}")]
    UnknownRegion(u32),
    #[error("no visible views to fuse")]
    NoViews,
    #[error("empty text-embedding set")]
    EmptyEmbeddingSet,
    #[error("empty semantic export")]
    EmptySemanticExport,
    #[error("point lies on the camera plane (depth {0:.3e} m)")]
    OnCameraPlane(f64),
    #[error("grazing incidence (|d.n| = {0:.3e})")]
    Grazing(f64),
    #[error("zero power: {0}")]
    ZeroPower(&'static str),
    #[error("stale scene epoch: cache traced on epoch {cached}, dirty region is relative to epoch {expected}")]
    StaleEpoch { cached: u64, expected: u64 },
    #[error("surface region {0} is already in use")]
    RegionInUse(u32),
    #[error("calibration diverged at iteration {iteration}: loss = {loss}")]
    Diverged { iteration: usize, loss: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse { context: context.into(), message: message.into() }
    }

    /// Short machine-readable category, used in CLI error records and FFI codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::EmptyMesh => "empty_mesh",
            Error::MissingRegionMapping(_) => "missing_region_mapping",
            Error::InvalidInput(_) => "invalid_input",
            Error::DuplicateLabel(_) => "duplicate_label",
            Error::UnknownLabel(_) => "unknown_label",
            Error::UnknownRegion(_) => "unknown_region",
            Error::NoViews => "no_views",
            Error::EmptyEmbeddingSet => "empty_embedding_set",
            Error::EmptySemanticExport => "empty_semantic_export",
            Error::OnCameraPlane(_) => "on_camera_plane",
            Error::Grazing(_) => "grazing",
            Error::ZeroPower(_) => "zero_power",
            Error::StaleEpoch { .. } => "stale_epoch",
            Error::RegionInUse(_) => "region_in_use",
            Error::Diverged { .. } => "diverged",
        }
    }
}
