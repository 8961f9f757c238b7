//! One-line text records for paths:
//!
//! ```text
//! specular len=5.656854249492381 tx=0,0,2 rx=4,0,2 | reflect tri=1 region=0 group=0 p=2,0,0 n=0,0,1 area=2
//! ```
//!
//! Floats use shortest round-trip formatting, so parsing a record gives back
//! the identical path.

use super::{Interaction, InteractionKind, PathKind, PropagationPath};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

fn vec3(v: &Vec3) -> String {
    format!("{:?},{:?},{:?}", v.x, v.y, v.z)
}

pub fn path_record(path: &PropagationPath) -> String {
    let mut s = format!("{} len={:?} tx={} rx={}", path.kind.as_str(), path.length, vec3(&path.tx), vec3(&path.rx));
    for it in &path.interactions {
        let kind = match it.kind {
            InteractionKind::Reflect => "reflect",
            InteractionKind::Scatter => "scatter",
        };
        s.push_str(&format!(
            " | {kind} tri={} region={} group={} p={} n={} area={:?}",
            it.triangle,
            it.region,
            it.group,
            vec3(&it.point),
            vec3(&it.normal),
            it.area
        ));
    }
    s
}

pub fn parse_path_record(line: &str) -> Result<PropagationPath> {
    let err = |m: String| Error::parse("path record", m);
    let mut chunks = line.split(" | ");
    let head: Vec<&str> = chunks.next().unwrap_or("").split_whitespace().collect();
    let kind = match head.first().copied() {
        Some("los") => PathKind::Los,
        Some("specular") => PathKind::Specular,
        Some("scattered") => PathKind::Scattered,
        other => return Err(err(format!("unknown path kind {other:?}"))),
    };
    let field = |toks: &[&str], key: &str| -> Result<String> {
        toks.iter()
            .find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .map(str::to_string)
            .ok_or_else(|| err(format!("missing `{key}`")))
    };
    let num = |s: String| s.parse::<f64>().map_err(|e| err(format!("`{s}`: {e}")));
    let int = |s: String| s.parse::<u32>().map_err(|e| err(format!("`{s}`: {e}")));
    let point = |s: String| -> Result<Vec3> {
        let v: Vec<f64> = s.split(',').map(|x| x.parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|e| err(e.to_string()))?;
        if v.len() != 3 {
            return Err(err(format!("expected 3 coordinates in `{s}`")));
        }
        Ok(Vec3::new(v[0], v[1], v[2]))
    };
    let mut path = PropagationPath {
        kind,
        tx: point(field(&head, "tx")?)?,
        rx: point(field(&head, "rx")?)?,
        interactions: Vec::new(),
        length: num(field(&head, "len")?)?,
    };
    for chunk in chunks {
        let toks: Vec<&str> = chunk.split_whitespace().collect();
        let kind = match toks.first().copied() {
            Some("reflect") => InteractionKind::Reflect,
            Some("scatter") => InteractionKind::Scatter,
            other => return Err(err(format!("unknown interaction {other:?}"))),
        };
        path.interactions.push(Interaction {
            point: point(field(&toks, "p")?)?,
            normal: point(field(&toks, "n")?)?,
            triangle: int(field(&toks, "tri")?)?,
            region: int(field(&toks, "region")?)?,
            group: int(field(&toks, "group")?)?,
            area: num(field(&toks, "area")?)?,
            kind,
        });
    }
    Ok(path)
}
