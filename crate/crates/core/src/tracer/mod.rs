//! Path discovery between a transmitter and a receiver.
//!
//! Shoot-and-bounce proposes reflection-plane sequences; the image method then
//! solves each sequence exactly. Single diffuse-scatter paths are kept with a
//! configurable probability at first hits.

mod launch;
mod record;
mod refine;
mod trace;

pub use launch::{launch_direction, sample_scatter_direction};
pub use record::{parse_path_record, path_record};
pub use refine::{refine_specular, verify_path};
pub use trace::{trace_link, trace_paths, DirectionRecord, LinkTrace, Segment};

pub(crate) use launch::tangent_frame;
pub(crate) use trace::{assemble, shoot_direction};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub n_rays: usize,
    pub max_depth: u32,
    pub scatter_keep_prob: f64,
    /// Lower bound of the discovery capture radius (m).
    pub rx_capture_radius: f64,
    /// Capture radius growth per metre of unfolded path length.
    pub rx_capture_fraction: f64,
    pub rng_seed: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self { n_rays: 100_000, max_depth: 5, scatter_keep_prob: 1e-3, rx_capture_radius: 0.1, rx_capture_fraction: 0.005, rng_seed: 0 }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("trace config: {m}")));
        if self.n_rays == 0 {
            return bad("n_rays must be >= 1");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be >= 1");
        }
        if !(self.scatter_keep_prob > 0.0 && self.scatter_keep_prob <= 1.0) {
            return bad("scatter_keep_prob must lie in (0, 1]");
        }
        if !(self.rx_capture_radius > 0.0) || !(self.rx_capture_fraction >= 0.0) {
            return bad("capture radius must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Los,
    Specular,
    Scattered,
}

impl PathKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PathKind::Los => "los",
            PathKind::Specular => "specular",
            PathKind::Scattered => "scattered",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionKind {
    Reflect,
    Scatter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub point: Vec3,
    /// Unit surface normal facing the incoming segment.
    pub normal: Vec3,
    pub triangle: u32,
    pub region: u32,
    /// Coplanar group of the surface (see [`crate::geometry::Triangle::group`]).
    pub group: u32,
    /// Area of the interacting triangle (m^2), used for diffuse patches.
    pub area: f64,
    pub kind: InteractionKind,
}

/// Deduplication key: the ordered surface sequence and interaction kinds.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathKey {
    pub kind: PathKind,
    pub groups: Vec<u32>,
    pub kinds: Vec<InteractionKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPath {
    pub kind: PathKind,
    pub tx: Vec3,
    pub rx: Vec3,
    pub interactions: Vec<Interaction>,
    /// Total geometric length (m).
    pub length: f64,
}

impl PropagationPath {
    pub fn los(tx: Vec3, rx: Vec3) -> Self {
        Self { kind: PathKind::Los, tx, rx, interactions: Vec::new(), length: (rx - tx).norm() }
    }

    pub fn key(&self) -> PathKey {
        PathKey {
            kind: self.kind,
            groups: self.interactions.iter().map(|i| i.group).collect(),
            kinds: self.interactions.iter().map(|i| i.kind).collect(),
        }
    }

    pub fn regions(&self) -> Vec<u32> {
        self.interactions.iter().map(|i| i.region).collect()
    }

    /// `tx`, interaction points, `rx`.
    pub fn vertices(&self) -> Vec<Vec3> {
        let mut v = Vec::with_capacity(self.interactions.len() + 2);
        v.push(self.tx);
        v.extend(self.interactions.iter().map(|i| i.point));
        v.push(self.rx);
        v
    }

    pub fn segments(&self) -> impl Iterator<Item = (Vec3, Vec3)> + '_ {
        let v = self.vertices();
        (0..v.len() - 1).map(move |i| (v[i], v[i + 1]))
    }

    /// Unit departure direction at the transmitter.
    pub fn departure(&self) -> Vec3 {
        let v = self.interactions.first().map_or(self.rx, |i| i.point);
        (v - self.tx).normalize()
    }

    /// Unit arrival direction, pointing from the receiver toward where the
    /// wave comes from.
    pub fn arrival(&self) -> Vec3 {
        let v = self.interactions.last().map_or(self.tx, |i| i.point);
        (v - self.rx).normalize()
    }

    pub fn touches(&self, bbox: &Aabb) -> bool {
        self.segments().any(|(a, b)| bbox.intersects_segment(&a, &b))
    }
}

/// Canonical ordering of a path set.
pub(crate) fn sort_paths(paths: &mut [PropagationPath]) {
    paths.sort_by_cached_key(|p| (p.kind, p.interactions.len(), p.key()));
}
