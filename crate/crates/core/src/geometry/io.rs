//! Mesh ingestion: PLY (ASCII and binary) with an optional integer `region`
//! face property, or a companion region-mapping file.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use ply_rs::parser::Parser;
use ply_rs::ply::{DefaultElement, Property};

use super::{Scene, SceneBuilder, Vec3};
use crate::error::{Error, Result};

const REGION_KEYS: [&str; 3] = ["region", "region_id", "material_id"];

/// One line of the companion mapping file: faces `start..=end` belong to `region`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionRange {
    pub start: usize,
    pub end: usize,
    pub region: u32,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub faces_read: usize,
    pub triangles: usize,
    pub degenerate_dropped: usize,
    pub regions: usize,
}

/// Parses `start_face end_face region_id label` lines (`#` starts a comment).
pub fn parse_region_map(text: &str) -> Result<Vec<RegionRange>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let ctx = || format!("region map line {}", ln + 1);
        let mut num = |name: &str| -> Result<u64> {
            it.next()
                .ok_or_else(|| Error::parse(ctx(), format!("missing {name}")))?
                .parse::<u64>()
                .map_err(|e| Error::parse(ctx(), format!("{name}: {e}")))
        };
        let start = num("start_face")? as usize;
        let end = num("end_face")? as usize;
        let region = num("region_id")? as u32;
        let label = it.collect::<Vec<_>>().join(" ");
        if end < start {
            return Err(Error::parse(ctx(), "end_face < start_face"));
        }
        out.push(RegionRange { start, end, region, label: if label.is_empty() { format!("region_{region}") } else { label } });
    }
    Ok(out)
}

/// Loads a mesh. Regions come from the face property when present, otherwise
/// from `<mesh>.regions` next to the mesh file.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<(Scene, LoadReport)> {
    let path = path.as_ref();
    let companion = companion_path(path);
    let map = companion.exists().then_some(companion);
    load_impl(path, map.as_deref())
}

/// Loads a mesh with an explicit region-mapping file, which takes precedence
/// over any inline face attribute.
pub fn load_mesh_with_regions(path: impl AsRef<Path>, region_map: impl AsRef<Path>) -> Result<(Scene, LoadReport)> {
    load_impl(path.as_ref(), Some(region_map.as_ref()))
}

fn companion_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".regions");
    PathBuf::from(s)
}

fn load_impl(path: &Path, region_map: Option<&Path>) -> Result<(Scene, LoadReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let ply = Parser::<DefaultElement>::new().read_ply(&mut reader).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;

    let ctx = path.display().to_string();
    let verts = ply.payload.get("vertex").map(Vec::as_slice).unwrap_or(&[]);
    let faces = ply.payload.get("face").map(Vec::as_slice).unwrap_or(&[]);
    if verts.is_empty() || faces.is_empty() {
        return Err(Error::EmptyMesh);
    }

    let mut builder = SceneBuilder::new();
    for (i, v) in verts.iter().enumerate() {
        let coord = |k: &str| v.get(k).and_then(scalar).ok_or_else(|| Error::parse(&ctx, format!("vertex {i} lacks numeric `{k}`")));
        builder.add_vertex(Vec3::new(coord("x")?, coord("y")?, coord("z")?));
    }

    let ranges = match region_map {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Some(parse_region_map(&text)?)
        }
        None => None,
    };
    if let Some(ranges) = &ranges {
        for r in ranges {
            builder.label_region(r.region, r.label.clone());
        }
    }

    let mut triangles = 0;
    for (fi, f) in faces.iter().enumerate() {
        let idx = ["vertex_indices", "vertex_index"]
            .iter()
            .find_map(|k| f.get(*k))
            .and_then(index_list)
            .ok_or_else(|| Error::parse(&ctx, format!("face {fi} lacks a vertex index list")))?;
        if idx.len() < 3 {
            return Err(Error::parse(&ctx, format!("face {fi} has fewer than 3 vertices")));
        }
        let region = match &ranges {
            Some(r) => r.iter().find(|r| r.start <= fi && fi <= r.end).map(|r| r.region).ok_or(Error::MissingRegionMapping(fi))?,
            None => REGION_KEYS.iter().find_map(|k| f.get(*k)).and_then(scalar).map(|r| r as u32).ok_or(Error::MissingRegionMapping(fi))?,
        };
        // fan triangulation for polygons
        for k in 1..idx.len() - 1 {
            builder.add_face([idx[0], idx[k], idx[k + 1]], region);
            triangles += 1;
        }
    }
    let (scene, dropped) = builder.build()?;
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} degenerate triangle(s)", path.display());
    }
    let report =
        LoadReport { faces_read: faces.len(), triangles: triangles - dropped, degenerate_dropped: dropped, regions: scene.region_count() };
    Ok((scene, report))
}

fn scalar(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Char(v) => v as f64,
        Property::UChar(v) => v as f64,
        Property::Short(v) => v as f64,
        Property::UShort(v) => v as f64,
        Property::Int(v) => v as f64,
        Property::UInt(v) => v as f64,
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        _ => return None,
    })
}

fn index_list(p: &Property) -> Option<Vec<u32>> {
    fn conv<T: Copy + TryInto<u32>>(v: &[T]) -> Option<Vec<u32>> {
        v.iter().map(|&x| x.try_into().ok()).collect()
    }
    match p {
        Property::ListChar(v) => conv(v),
        Property::ListUChar(v) => conv(v),
        Property::ListShort(v) => conv(v),
        Property::ListUShort(v) => conv(v),
        Property::ListInt(v) => conv(v),
        Property::ListUInt(v) => Some(v.clone()),
        _ => None,
    }
}

/// Writes an ASCII PLY with a `region` face property.
pub fn write_ascii_ply(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    use std::fmt::Write as _;
    let n = scene.triangle_count();
    let mut s = String::new();
    let _ = writeln!(s, "ply\nformat ascii 1.0\nelement vertex {}", 3 * n);
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    let _ = writeln!(s, "element face {n}");
    s.push_str("property list uchar int vertex_indices\nproperty int region\nend_header\n");
    for (_, t) in scene.triangles() {
        for v in &t.v {
            let _ = writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.z);
        }
    }
    for (i, (_, t)) in scene.triangles().enumerate() {
        let _ = writeln!(s, "3 {} {} {} {}", 3 * i, 3 * i + 1, 3 * i + 2, t.region);
    }
    let path = path.as_ref();
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
