use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::refine::{refine_with, GroupIndex};
use super::{launch_direction, sort_paths, Interaction, InteractionKind, PathKey, PathKind, PropagationPath, TraceConfig};
use crate::error::{Error, Result};
use crate::geometry::{reflect_unchecked, Aabb, Ray, Scene, Vec3};

/// Ray start offset after a bounce, so a ray does not re-hit its own surface.
const BOUNCE_EPS: f64 = 1e-6;

/// One straight piece of a launched ray (`length` is infinite for escapes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub origin: Vec3,
    pub direction: Vec3,
    pub length: f64,
}

impl Segment {
    pub fn touches(&self, bbox: &Aabb) -> bool {
        if self.length.is_finite() {
            bbox.intersects_segment(&self.origin, &(self.origin + self.direction * self.length))
        } else {
            bbox.intersects_ray(&self.origin, &self.direction, f64::INFINITY)
        }
    }
}

/// Everything discovery learned from one launch direction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirectionRecord {
    /// Plane-group sequences whose unfolded ray passed within the capture radius.
    pub specular: Vec<Vec<u32>>,
    /// First-hit scatter point with a verified connection to the receiver.
    pub scatter: Option<Interaction>,
    /// Every segment whose outcome depended on scene geometry (only kept for
    /// incremental retracing).
    pub segments: Vec<Segment>,
}

impl DirectionRecord {
    pub fn touches(&self, bbox: &Aabb) -> bool {
        self.segments.iter().any(|s| s.touches(bbox))
    }
}

/// A traced link together with the per-direction discovery state needed to
/// retrace it incrementally after a local scene change.
#[derive(Debug, Clone)]
pub struct LinkTrace {
    pub epoch: u64,
    pub tx: Vec3,
    pub rx: Vec3,
    pub config: TraceConfig,
    pub records: Vec<DirectionRecord>,
    pub paths: Vec<PropagationPath>,
}

fn check_link(tx: &Vec3, rx: &Vec3, config: &TraceConfig) -> Result<()> {
    config.validate()?;
    if !(tx.iter().chain(rx.iter()).all(|x| x.is_finite())) {
        return Err(Error::InvalidInput("non-finite TX/RX position".into()));
    }
    if (tx - rx).norm() < 1e-9 {
        return Err(Error::InvalidInput("TX and RX coincide".into()));
    }
    Ok(())
}

/// Deterministic path set between `tx` and `rx`.
pub fn trace_paths(scene: &Scene, tx: Vec3, rx: Vec3, config: &TraceConfig) -> Result<Vec<PropagationPath>> {
    check_link(&tx, &rx, config)?;
    let records: Vec<DirectionRecord> =
        (0..config.n_rays as u64).into_par_iter().map(|i| shoot_direction(scene, &tx, &rx, config, i, false)).collect();
    Ok(assemble(scene, &tx, &rx, &records, None))
}

/// Like [`trace_paths`] but keeps the discovery records.
pub fn trace_link(scene: &Scene, tx: Vec3, rx: Vec3, config: &TraceConfig) -> Result<LinkTrace> {
    check_link(&tx, &rx, config)?;
    let records: Vec<DirectionRecord> =
        (0..config.n_rays as u64).into_par_iter().map(|i| shoot_direction(scene, &tx, &rx, config, i, true)).collect();
    let paths = assemble(scene, &tx, &rx, &records, None);
    Ok(LinkTrace { epoch: scene.epoch(), tx, rx, config: config.clone(), records, paths })
}

pub(crate) fn shoot_direction(
    scene: &Scene,
    tx: &Vec3,
    rx: &Vec3,
    config: &TraceConfig,
    index: u64,
    keep_segments: bool,
) -> DirectionRecord {
    let mut rec = DirectionRecord::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    rng.set_stream(index);

    let mut origin = *tx;
    let mut dir = launch_direction(index);
    let mut unfolded = 0.0;
    let mut groups: Vec<u32> = Vec::new();
    let max_depth = config.max_depth as usize;
    for depth in 0..=max_depth {
        let t_min = if depth == 0 { 0.0 } else { BOUNCE_EPS };
        let hit = scene.intersect(&Ray { origin, direction: dir, t_min, t_max: f64::INFINITY });
        let seg_len = hit.map_or(f64::INFINITY, |h| h.t);
        if keep_segments {
            rec.segments.push(Segment { origin, direction: dir, length: seg_len });
        }
        if depth > 0 {
            let t_star = (rx - origin).dot(&dir).clamp(0.0, seg_len);
            let miss = (origin + dir * t_star - rx).norm();
            let radius = config.rx_capture_radius.max(config.rx_capture_fraction * (unfolded + t_star));
            if miss <= radius {
                rec.specular.push(groups.clone());
            }
        }
        let Some(h) = hit else { break };
        if depth == 0 && rng.gen::<f64>() < config.scatter_keep_prob {
            let to_rx = rx - h.point;
            if to_rx.dot(&h.normal) > 1e-9 {
                if keep_segments {
                    let len = to_rx.norm();
                    rec.segments.push(Segment { origin: h.point, direction: to_rx / len, length: len });
                }
                if !scene.segment_blocked(&h.point, rx) {
                    let tri = scene.triangle(h.triangle);
                    rec.scatter = Some(Interaction {
                        point: h.point,
                        normal: h.normal,
                        triangle: h.triangle,
                        region: h.region,
                        group: tri.group,
                        area: tri.area,
                        kind: InteractionKind::Scatter,
                    });
                }
            }
        }
        if depth == max_depth {
            break;
        }
        groups.push(scene.triangle(h.triangle).group);
        unfolded += h.t;
        origin = h.point;
        dir = reflect_unchecked(&dir, &h.normal);
    }
    rec
}

/// Builds the final path set from discovery records (in direction order).
///
/// With `reuse = Some((cached, dirty))`, cached specular paths that do not
/// touch `dirty` are taken verbatim instead of being refined again; this is
/// exact because neither their geometry nor their visibility can change.
pub(crate) fn assemble(
    scene: &Scene,
    tx: &Vec3,
    rx: &Vec3,
    records: &[DirectionRecord],
    reuse: Option<(&[PropagationPath], &Aabb)>,
) -> Vec<PropagationPath> {
    let mut paths = Vec::new();
    if !scene.segment_blocked(tx, rx) {
        paths.push(PropagationPath::los(*tx, *rx));
    }

    let candidates: BTreeSet<&Vec<u32>> = records.iter().flat_map(|r| r.specular.iter()).filter(|g| !g.is_empty()).collect();
    let kept: HashMap<PathKey, &PropagationPath> = match reuse {
        Some((cached, dirty)) => {
            cached.iter().filter(|p| p.kind == PathKind::Specular && !p.touches(dirty)).map(|p| (p.key(), p)).collect()
        }
        None => HashMap::new(),
    };
    let index = GroupIndex::new(scene);
    let specular: Vec<PropagationPath> = candidates
        .into_par_iter()
        .filter_map(|groups| {
            let key = PathKey { kind: PathKind::Specular, groups: groups.clone(), kinds: vec![InteractionKind::Reflect; groups.len()] };
            match kept.get(&key) {
                Some(p) => Some((*p).clone()),
                None => refine_with(scene, &index, *tx, *rx, groups),
            }
        })
        .collect();
    paths.extend(specular);

    // one scatter path per surface group: the earliest direction wins
    let mut scatter: BTreeMap<u32, &Interaction> = BTreeMap::new();
    for it in records.iter().filter_map(|r| r.scatter.as_ref()) {
        scatter.entry(it.group).or_insert(it);
    }
    for it in scatter.into_values() {
        paths.push(PropagationPath {
            kind: PathKind::Scattered,
            tx: *tx,
            rx: *rx,
            interactions: vec![it.clone()],
            length: (it.point - tx).norm() + (rx - it.point).norm(),
        });
    }
    sort_paths(&mut paths);
    paths
}
