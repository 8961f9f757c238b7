//! Semantic export and text-embedding files.
//!
//! Binary layout (little-endian): a 4-byte magic, `u32` version, `u32`
//! feature dimension `C`, `u32` record count, then length-prefixed records
//! (`u32` byte length followed by the payload). Feature values are `f32`.
//!
//! Semantic record: `f32 x, y, z`, `u8 kind` (0 fused, 1 per-view),
//! `u16` roughness label length + UTF-8 bytes, then either `f32[C]` or
//! `u32 n_views` followed by `n_views x (u32 view_id, f32[C])`.
//!
//! Text-embedding record: `u16` label length + bytes, `u16` synonym length +
//! bytes, `f32[C]`.
//!
//! Text variants are line based (`#` comments):
//!
//! ```text
//! dim 3
//! point 1.0 2.0 0.0
//! rough Brick
//! fused 0.1 0.2 0.3
//! point 0.0 0.0 1.0
//! view 4 0.1 0.2 0.3
//! view 7 0.2 0.1 0.3
//! ```
//!
//! and `label | synonym | v1 v2 ... vC` for text embeddings.

use std::path::Path;

use super::{PointFeatures, SemanticPoint, TextEmbedding, TextEmbeddingSet};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

const SEM_MAGIC: &[u8; 4] = b"MTSX";
const TXT_MAGIC: &[u8; 4] = b"MTTE";
const VERSION: u32 = 1;

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    ctx: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::parse(self.ctx, format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f64> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()) as f64)
    }
    fn string(&mut self) -> Result<String> {
        let n = self.u16()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::parse(self.ctx, e.to_string()))
    }
    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f32()).collect()
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u16).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_floats(out: &mut Vec<u8>, v: &[f64]) {
    for &x in v {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
}

fn header(magic: &[u8; 4], dim: usize, count: usize) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(count as u32).to_le_bytes());
    out
}

fn read_header(cur: &mut Cursor) -> Result<(usize, usize)> {
    cur.take(4)?;
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::parse(cur.ctx, format!("unsupported version {version}")));
    }
    Ok((cur.u32()? as usize, cur.u32()? as usize))
}

fn finite_check(v: &[f64], ctx: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::parse(ctx, "non-finite feature value"))
    }
}

pub fn write_semantic_export_binary(points: &[SemanticPoint], path: impl AsRef<Path>) -> Result<()> {
    let dim = points.first().map_or(0, SemanticPoint::dim);
    let mut out = header(SEM_MAGIC, dim, points.len());
    for p in points {
        let mut rec = Vec::new();
        put_floats(&mut rec, p.position.as_slice());
        match &p.features {
            PointFeatures::Fused(f) => {
                rec.push(0);
                put_str(&mut rec, p.roughness.as_deref().unwrap_or(""));
                put_floats(&mut rec, f);
            }
            PointFeatures::PerView(views) => {
                rec.push(1);
                put_str(&mut rec, p.roughness.as_deref().unwrap_or(""));
                rec.extend_from_slice(&(views.len() as u32).to_le_bytes());
                for (id, f) in views {
                    rec.extend_from_slice(&id.to_le_bytes());
                    put_floats(&mut rec, f);
                }
            }
        }
        out.extend_from_slice(&(rec.len() as u32).to_le_bytes());
        out.extend_from_slice(&rec);
    }
    let path = path.as_ref();
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_semantic_export_text(points: &[SemanticPoint], path: impl AsRef<Path>) -> Result<()> {
    use std::fmt::Write as _;
    let dim = points.first().map_or(0, SemanticPoint::dim);
    let mut s = format!("dim {dim}\n");
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
    for p in points {
        let _ = writeln!(s, "point {:?} {:?} {:?}", p.position.x, p.position.y, p.position.z);
        if let Some(r) = &p.roughness {
            let _ = writeln!(s, "rough {r}");
        }
        match &p.features {
            PointFeatures::Fused(f) => {
                let _ = writeln!(s, "fused {}", join(f));
            }
            PointFeatures::PerView(views) => {
                for (id, f) in views {
                    let _ = writeln!(s, "view {id} {}", join(f));
                }
            }
        }
    }
    let path = path.as_ref();
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Reads a semantic export in either encoding (detected from the magic).
pub fn read_semantic_export(path: impl AsRef<Path>) -> Result<Vec<SemanticPoint>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ctx = path.display().to_string();
    let points = if bytes.starts_with(SEM_MAGIC) {
        parse_semantic_binary(&bytes, &ctx)?
    } else {
        let text = String::from_utf8(bytes).map_err(|e| Error::parse(&ctx, e.to_string()))?;
        parse_semantic_text(&text, &ctx)?
    };
    if points.is_empty() {
        return Err(Error::EmptySemanticExport);
    }
    Ok(points)
}

fn parse_semantic_binary(bytes: &[u8], ctx: &str) -> Result<Vec<SemanticPoint>> {
    let mut cur = Cursor { buf: bytes, pos: 0, ctx };
    let (dim, count) = read_header(&mut cur)?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = cur.u32()? as usize;
        let end = cur.pos + len;
        let position = Vec3::new(cur.f32()?, cur.f32()?, cur.f32()?);
        let kind = cur.u8()?;
        let rough = cur.string()?;
        let features = match kind {
            0 => PointFeatures::Fused(cur.floats(dim)?),
            1 => {
                let n = cur.u32()? as usize;
                let mut views = Vec::with_capacity(n);
                for _ in 0..n {
                    let id = cur.u32()?;
                    views.push((id, cur.floats(dim)?));
                }
                PointFeatures::PerView(views)
            }
            k => return Err(Error::parse(ctx, format!("unknown record kind {k}"))),
        };
        if cur.pos != end {
            return Err(Error::parse(ctx, "record length mismatch"));
        }
        match &features {
            PointFeatures::Fused(f) => finite_check(f, ctx)?,
            PointFeatures::PerView(v) => v.iter().try_for_each(|(_, f)| finite_check(f, ctx))?,
        }
        out.push(SemanticPoint { position, features, roughness: (!rough.is_empty()).then_some(rough) });
    }
    Ok(out)
}

fn parse_floats(tokens: &[&str], dim: Option<usize>, ctx: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> =
        tokens.iter().map(|t| t.parse::<f64>().map_err(|e| Error::parse(ctx, format!("`{t}`: {e}")))).collect::<Result<_>>()?;
    if let Some(d) = dim {
        if v.len() != d {
            return Err(Error::parse(ctx, format!("expected {d} values, got {}", v.len())));
        }
    }
    finite_check(&v, ctx)?;
    Ok(v)
}

fn parse_semantic_text(text: &str, ctx: &str) -> Result<Vec<SemanticPoint>> {
    let mut dim: Option<usize> = None;
    let mut out: Vec<SemanticPoint> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lctx = format!("{ctx}:{}", ln + 1);
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "dim" => {
                dim = Some(toks.get(1).and_then(|t| t.parse().ok()).ok_or_else(|| Error::parse(&lctx, "bad dim"))?);
            }
            "point" => {
                let p = parse_floats(&toks[1..], Some(3), &lctx)?;
                out.push(SemanticPoint {
                    position: Vec3::new(p[0], p[1], p[2]),
                    features: PointFeatures::PerView(Vec::new()),
                    roughness: None,
                });
            }
            "rough" => {
                let p = out.last_mut().ok_or_else(|| Error::parse(&lctx, "`rough` before `point`"))?;
                p.roughness = Some(toks[1..].join(" "));
            }
            "fused" => {
                let p = out.last_mut().ok_or_else(|| Error::parse(&lctx, "`fused` before `point`"))?;
                p.features = PointFeatures::Fused(parse_floats(&toks[1..], dim, &lctx)?);
            }
            "view" => {
                let p = out.last_mut().ok_or_else(|| Error::parse(&lctx, "`view` before `point`"))?;
                let id: u32 = toks.get(1).and_then(|t| t.parse().ok()).ok_or_else(|| Error::parse(&lctx, "bad view id"))?;
                let f = parse_floats(&toks[2..], dim, &lctx)?;
                match &mut p.features {
                    PointFeatures::PerView(v) => v.push((id, f)),
                    PointFeatures::Fused(_) => return Err(Error::parse(&lctx, "point mixes fused and per-view features")),
                }
            }
            other => return Err(Error::parse(&lctx, format!("unknown directive `{other}`"))),
        }
    }
    for (i, p) in out.iter().enumerate() {
        if matches!(&p.features, PointFeatures::PerView(v) if v.is_empty()) {
            return Err(Error::parse(ctx, format!("point {i} has no features")));
        }
    }
    Ok(out)
}

pub fn write_text_embeddings_binary(set: &TextEmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let mut out = header(TXT_MAGIC, set.dim(), set.entries().len());
    for e in set.entries() {
        let mut rec = Vec::new();
        put_str(&mut rec, &e.label);
        put_str(&mut rec, &e.synonym);
        put_floats(&mut rec, &e.vector);
        out.extend_from_slice(&(rec.len() as u32).to_le_bytes());
        out.extend_from_slice(&rec);
    }
    let path = path.as_ref();
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_text_embeddings_text(set: &TextEmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::new();
    for e in set.entries() {
        let v = e.vector.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        s.push_str(&format!("{} | {} | {v}\n", e.label, e.synonym));
    }
    let path = path.as_ref();
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Reads text embeddings in either encoding. Vectors are renormalised after
/// `f32` decoding.
pub fn read_text_embeddings(path: impl AsRef<Path>) -> Result<TextEmbeddingSet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ctx = path.display().to_string();
    let mut entries = Vec::new();
    if bytes.starts_with(TXT_MAGIC) {
        let mut cur = Cursor { buf: &bytes, pos: 0, ctx: &ctx };
        let (dim, count) = read_header(&mut cur)?;
        for _ in 0..count {
            let len = cur.u32()? as usize;
            let end = cur.pos + len;
            let label = cur.string()?;
            let synonym = cur.string()?;
            let vector = cur.floats(dim)?;
            if cur.pos != end {
                return Err(Error::parse(&ctx, "record length mismatch"));
            }
            entries.push(TextEmbedding { label, synonym, vector });
        }
    } else {
        let text = String::from_utf8(bytes).map_err(|e| Error::parse(&ctx, e.to_string()))?;
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lctx = format!("{ctx}:{}", ln + 1);
            let parts: Vec<&str> = line.split('|').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(Error::parse(&lctx, "expected `label | synonym | values`"));
            }
            let toks: Vec<&str> = parts[2].split_whitespace().collect();
            entries.push(TextEmbedding {
                label: parts[0].to_string(),
                synonym: parts[1].to_string(),
                vector: parse_floats(&toks, None, &lctx)?,
            });
        }
    }
    for e in &mut entries {
        let n = e.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 && (n - 1.0).abs() < 1e-5 {
            e.vector.iter_mut().for_each(|x| *x /= n);
        }
    }
    TextEmbeddingSet::new(entries)
}
