use rayon::prelude::*;

use super::DirtyRegion;
use crate::error::{Error, Result};
use crate::geometry::Scene;
use crate::tracer::{assemble, shoot_direction, LinkTrace, PropagationPath};

/// Indices of paths with a segment touching the dirty box.
pub fn invalidated_paths(paths: &[PropagationPath], dirty: &DirtyRegion) -> Vec<usize> {
    paths.iter().enumerate().filter(|(_, p)| p.touches(&dirty.bbox)).map(|(i, _)| i).collect()
}

#[derive(Debug, Clone)]
pub struct RetraceOutcome {
    pub trace: LinkTrace,
    /// Launch directions shot again.
    pub reshot: usize,
    /// Cached paths discarded because they touch the dirty box.
    pub invalidated: usize,
}

/// Updates a cached link trace after a local scene change. Launch directions
/// whose recorded segments avoid the dirty box keep their discovery record,
/// the rest are shot again; cached paths that avoid the box are reused
/// verbatim, which reproduces a full retrace of the new scene exactly.
pub fn invalidate_and_retrace(scene: &Scene, cached: &LinkTrace, dirty: &DirtyRegion) -> Result<RetraceOutcome> {
    if cached.epoch != dirty.from_epoch {
        return Err(Error::StaleEpoch { cached: cached.epoch, expected: dirty.from_epoch });
    }
    if scene.epoch() != dirty.to_epoch {
        return Err(Error::StaleEpoch { cached: scene.epoch(), expected: dirty.to_epoch });
    }
    if cached.records.len() != cached.config.n_rays {
        return Err(Error::InvalidInput("cached trace lacks discovery records".into()));
    }
    let bbox = &dirty.bbox;
    let records: Vec<_> = cached
        .records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            if r.touches(bbox) {
                (shoot_direction(scene, &cached.tx, &cached.rx, &cached.config, i as u64, true), true)
            } else {
                (r.clone(), false)
            }
        })
        .collect();
    let reshot = records.iter().filter(|(_, s)| *s).count();
    let records: Vec<_> = records.into_iter().map(|(r, _)| r).collect();
    let invalidated = invalidated_paths(&cached.paths, dirty).len();
    let paths = assemble(scene, &cached.tx, &cached.rx, &records, Some((&cached.paths, bbox)));
    Ok(RetraceOutcome {
        trace: LinkTrace { epoch: scene.epoch(), tx: cached.tx, rx: cached.rx, config: cached.config.clone(), records, paths },
        reshot,
        invalidated,
    })
}
