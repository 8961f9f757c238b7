use crate::error::{Error, Result};

/// Arithmetic mean of per-view features.
pub fn fuse_views(views: &[&[f64]]) -> Result<Vec<f64>> {
    let first = views.first().ok_or(Error::NoViews)?;
    let dim = first.len();
    if views.iter().any(|v| v.len() != dim) {
        return Err(Error::InvalidInput("per-view features differ in length".into()));
    }
    let n = views.len() as f64;
    Ok((0..dim).map(|k| views.iter().map(|v| v[k]).sum::<f64>() / n).collect())
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// One text vector; several may share a label (its synonyms).
#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbedding {
    pub label: String,
    pub synonym: String,
    pub vector: Vec<f64>,
}

/// Candidate material vocabulary. Label order is the order of first
/// appearance and decides ties.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbeddingSet {
    entries: Vec<TextEmbedding>,
    labels: Vec<String>,
}

impl TextEmbeddingSet {
    pub fn new(entries: Vec<TextEmbedding>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyEmbeddingSet);
        }
        let dim = entries[0].vector.len();
        let mut labels: Vec<String> = Vec::new();
        for e in &entries {
            if e.vector.len() != dim {
                return Err(Error::InvalidInput(format!("text embedding `{}` has length {}, expected {dim}", e.synonym, e.vector.len())));
            }
            let norm = e.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!("text embedding `{}` is not unit-norm ({norm})", e.synonym)));
            }
            if !labels.contains(&e.label) {
                labels.push(e.label.clone());
            }
        }
        Ok(Self { entries, labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn entries(&self) -> &[TextEmbedding] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries[0].vector.len()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Best-matching label: per label the maximum cosine similarity over its
/// synonym vectors, then the argmax over labels (first label wins ties).
pub fn match_material(feature: &[f64], texts: &TextEmbeddingSet) -> Result<(String, f64)> {
    if feature.len() != texts.dim() {
        return Err(Error::InvalidInput(format!("feature length {} does not match text embeddings ({})", feature.len(), texts.dim())));
    }
    if feature.iter().all(|&x| x == 0.0) {
        return Err(Error::InvalidInput("zero feature vector".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    for (li, label) in texts.labels.iter().enumerate() {
        let score = texts
            .entries
            .iter()
            .filter(|e| &e.label == label)
            .map(|e| cosine_similarity(feature, &e.vector))
            .fold(f64::NEG_INFINITY, f64::max);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((li, score));
        }
    }
    let (li, score) = best.ok_or(Error::EmptyEmbeddingSet)?;
    Ok((texts.labels[li].clone(), score))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(v: Vec<f64>) -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    fn set(rows: &[(&str, &str, Vec<f64>)]) -> TextEmbeddingSet {
        TextEmbeddingSet::new(
            rows.iter().map(|(l, s, v)| TextEmbedding { label: l.to_string(), synonym: s.to_string(), vector: v.clone() }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn fuse_identical_views() {
        let v = [0.3, -1.0, 2.0];
        assert_eq!(fuse_views(&[&v, &v, &v]).unwrap(), v.to_vec());
    }

    #[test]
    fn fuse_two_axes() {
        assert_eq!(fuse_views(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn fuse_empty_is_error() {
        assert!(matches!(fuse_views(&[]), Err(Error::NoViews)));
        assert!(fuse_views(&[&[1.0], &[1.0, 2.0]]).is_err());
    }

    #[test]
    fn self_similarity() {
        let wood = unit(vec![0.2, 0.9, 0.1, 0.0]);
        let s = set(&[("metal", "metal", unit(vec![1.0, 0.0, 0.0, 0.0])), ("wood", "wood", wood.clone())]);
        let (l, score) = match_material(&wood, &s).unwrap();
        assert_eq!(l, "wood");
        assert!((score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_query_takes_first_label() {
        let s = set(&[("a", "a", vec![1.0, 0.0, 0.0]), ("b", "b", vec![0.0, 1.0, 0.0])]);
        let (l, score) = match_material(&[0.0, 0.0, 3.0], &s).unwrap();
        assert_eq!(l, "a");
        assert_eq!(score, 0.0);
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(matches!(TextEmbeddingSet::new(vec![]), Err(Error::EmptyEmbeddingSet)));
        assert!(TextEmbeddingSet::new(vec![TextEmbedding { label: "a".into(), synonym: "a".into(), vector: vec![2.0, 0.0] }]).is_err());
        let s = set(&[("a", "a", vec![1.0, 0.0])]);
        assert!(match_material(&[0.0, 0.0], &s).is_err());
    }

    #[test]
    fn matches_brute_force_over_synonyms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dim = 16;
        for _trial in 0..200 {
            let mut rows = Vec::new();
            for l in 0..5 {
                for s in 0..3 {
                    let v = unit((0..dim).map(|_| rng.gen::<f64>() - 0.5).collect());
                    rows.push((format!("label{l}"), format!("syn{l}_{s}"), v));
                }
            }
            let texts = TextEmbeddingSet::new(
                rows.iter().map(|(l, s, v)| TextEmbedding { label: l.clone(), synonym: s.clone(), vector: v.clone() }).collect(),
            )
            .unwrap();
            let q: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
            // brute force: every (label, synonym) pair, independent dot products
            let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut best = (String::new(), f64::NEG_INFINITY);
            for (l, _, v) in &rows {
                let c = q.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / qn;
                if c > best.1 + 1e-15 {
                    best = (l.clone(), c);
                }
            }
            let (label, score) = match_material(&q, &texts).unwrap();
            assert_eq!(label, best.0);
            assert!((score - best.1).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn fuse_is_permutation_invariant_and_scale_equivariant(
            rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 1..6),
            c in -5.0f64..5.0,
        ) {
            let views: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            let f = fuse_views(&views).unwrap();
            let mut rev = views.clone();
            rev.reverse();
            let fr = fuse_views(&rev).unwrap();
            for (a, b) in f.iter().zip(&fr) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| c * x).collect()).collect();
            let sv: Vec<&[f64]> = scaled.iter().map(Vec::as_slice).collect();
            let fs = fuse_views(&sv).unwrap();
            for (a, b) in fs.iter().zip(&f) {
                prop_assert!((a - c * b).abs() < 1e-9);
            }
        }

        #[test]
        fn match_is_scale_invariant(q in prop::collection::vec(-1.0f64..1.0, 3), c in 0.01f64..100.0) {
            prop_assume!(q.iter().any(|x| x.abs() > 1e-3));
            let s = set(&[
                ("a", "a", unit(vec![1.0, 0.2, 0.0])),
                ("b", "b", unit(vec![0.0, 1.0, 0.3])),
                ("b", "b2", unit(vec![-0.5, 0.0, 1.0])),
            ]);
            let scaled: Vec<f64> = q.iter().map(|x| c * x).collect();
            let (l1, s1) = match_material(&q, &s).unwrap();
            let (l2, s2) = match_material(&scaled, &s).unwrap();
            prop_assert_eq!(l1, l2);
            prop_assert!((s1 - s2).abs() < 1e-12);
        }
    }
}
