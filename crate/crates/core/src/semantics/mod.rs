//! Ingestion of exported vision features and text embeddings, and their
//! conversion into per-region material priors.

mod assign;
mod camera;
mod features;
mod io;
mod roughness;

pub use assign::{assign_regions, AssignConfig, MaterialSource, RegionAssignment, RegionMaterial};
pub use camera::{project_point, Camera, Projection};
pub use features::{cosine_similarity, fuse_views, match_material, TextEmbedding, TextEmbeddingSet};
pub use io::{
    read_semantic_export, read_text_embeddings, write_semantic_export_binary, write_semantic_export_text, write_text_embeddings_binary,
    write_text_embeddings_text,
};
pub use roughness::{roughness_table, roughness_to_scattering, RoughnessLevel};

use crate::geometry::Vec3;

/// Per-point feature payload of the semantic export.
#[derive(Debug, Clone, PartialEq)]
pub enum PointFeatures {
    /// Already fused across views.
    Fused(Vec<f64>),
    /// One feature per visible view, tagged with the view id.
    PerView(Vec<(u32, Vec<f64>)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticPoint {
    pub position: Vec3,
    pub features: PointFeatures,
    /// Roughness level label for the surface patch, when classified upstream.
    pub roughness: Option<String>,
}

impl SemanticPoint {
    pub fn fused(position: Vec3, feature: Vec<f64>) -> Self {
        Self { position, features: PointFeatures::Fused(feature), roughness: None }
    }

    pub fn dim(&self) -> usize {
        match &self.features {
            PointFeatures::Fused(f) => f.len(),
            PointFeatures::PerView(v) => v.first().map_or(0, |(_, f)| f.len()),
        }
    }

    /// The fused descriptor for this point.
    pub fn fused_feature(&self) -> crate::Result<Vec<f64>> {
        match &self.features {
            PointFeatures::Fused(f) => Ok(f.clone()),
            PointFeatures::PerView(v) => {
                let views: Vec<&[f64]> = v.iter().map(|(_, f)| f.as_slice()).collect();
                fuse_views(&views)
            }
        }
    }
}
