//! Cosine-retrieval database: text embeddings paired with their captions
//! and action labels, queried by image embedding at navigation time.

use super::{Embedding, SocialContextModel};
use crate::nn::{read_container, write_container, Entry, Mat, ParamStore};
use crate::sim::{Action, CaptionPair};
use crate::text::Tokenizer;
use crate::{Error, Result};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct DbEntry {
    pub embedding: Embedding,
    pub caption: CaptionPair,
}

/// Text-embedding store with linear cosine retrieval.
#[derive(Debug, Clone, Default)]
pub struct ContextDatabase {
    pub entries: Vec<DbEntry>,
}

impl ContextDatabase {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry with maximum cosine similarity to the query; ties break to the
    /// lowest index. The result is invariant to positive rescaling of the
    /// query.
    pub fn retrieve(&self, query: &[f64]) -> Result<(usize, f64, &DbEntry)> {
        if self.entries.is_empty() {
            return Err(Error::EmptyDatabase);
        }
        let qnorm: f64 = query.iter().map(|v| v * v).sum::<f64>().sqrt();
        if qnorm == 0.0 {
            return Err(Error::ZeroNorm("retrieval query"));
        }
        let mut best_idx = 0;
        let mut best_sim = f64::NEG_INFINITY;
        for (i, e) in self.entries.iter().enumerate() {
            let dot: f64 = e
                .embedding
                .values
                .iter()
                .zip(query)
                .map(|(a, b)| a * b)
                .sum();
            let sim = dot / qnorm;
            if sim > best_sim {
                best_sim = sim;
                best_idx = i;
            }
        }
        Ok((best_idx, best_sim, &self.entries[best_idx]))
    }

    /// Encode one entry per caption with the current text encoder.
    pub fn build(
        model: &SocialContextModel,
        store: &ParamStore,
        tok: &Tokenizer,
        captions: &[CaptionPair],
    ) -> Result<Self> {
        if captions.is_empty() {
            return Err(Error::EmptyCaptions);
        }
        let mut entries = Vec::with_capacity(captions.len());
        for cap in captions {
            let embedding = model.encode_text(store, tok, &cap.long)?;
            entries.push(DbEntry {
                embedding,
                caption: cap.clone(),
            });
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let dim = self.entries.first().map(|e| e.embedding.dim()).unwrap_or(0);
        let mut mat = Mat::zeros(self.entries.len(), dim);
        let mut caption_lines = String::new();
        for (i, e) in self.entries.iter().enumerate() {
            for (j, v) in e.embedding.values.iter().enumerate() {
                *mat.at_mut(i, j) = *v;
            }
            caption_lines.push_str(&format!(
                "{}\t{}\t{}\n",
                e.caption.long, e.caption.short, e.caption.action.name()
            ));
        }
        write_container(
            path,
            &[
                ("embeddings".to_string(), Entry::Matrix(mat)),
                ("captions".to_string(), Entry::Text(caption_lines)),
            ],
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let entries = read_container(path)?;
        let mut mat = None;
        let mut text = None;
        for (name, entry) in entries {
            match (name.as_str(), entry) {
                ("embeddings", Entry::Matrix(m)) => mat = Some(m),
                ("captions", Entry::Text(t)) => text = Some(t),
                _ => {}
            }
        }
        let mat = mat.ok_or_else(|| Error::CheckpointCorrupt("missing embeddings".into()))?;
        let text = text.ok_or_else(|| Error::CheckpointCorrupt("missing captions".into()))?;
        let mut db = ContextDatabase::default();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::CheckpointCorrupt(format!(
                    "bad caption line {i}: expected 3 fields"
                )));
            }
            let action = Action::parse(fields[2])
                .ok_or_else(|| Error::CheckpointCorrupt(format!("bad action {:?}", fields[2])))?;
            db.entries.push(DbEntry {
                embedding: Embedding::normalized(mat.row(i).to_vec())?,
                caption: CaptionPair {
                    long: fields[0].to_string(),
                    short: fields[1].to_string(),
                    action,
                },
            });
        }
        if db.entries.len() != mat.rows {
            return Err(Error::CheckpointCorrupt(
                "caption count does not match embedding rows".into(),
            ));
        }
        Ok(db)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::ScConfig;
    use rand::{Rng, RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fake_caption(i: usize) -> CaptionPair {
        CaptionPair {
            long: format!("scene {i} keep to the right side while passing"),
            short: format!("caption {i}"),
            action: Action::KeepRight,
        }
    }

    fn random_db(n: usize, dim: usize, rng: &mut impl Rng) -> ContextDatabase {
        let mut db = ContextDatabase::default();
        for i in 0..n {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            db.entries.push(DbEntry {
                embedding: Embedding::normalized(v).unwrap(),
                caption: fake_caption(i),
            });
        }
        db
    }

    #[test]
    fn retrieve_self_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let db = random_db(32, 16, &mut rng);
        let (idx, sim, _) = db.retrieve(&db.entries[7].embedding.values).unwrap();
        assert_eq!(idx, 7);
        assert!((sim - 1.0).abs() < 1e-9);
    }

    #[test]
    fn retrieve_matches_linear_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let db = random_db(64, 16, &mut rng);
        for _ in 0..1000 {
            let q: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
            if q.iter().all(|&v| v == 0.0) {
                continue;
            }
            let (idx, _, _) = db.retrieve(&q).unwrap();
            // Independent argmax by cosine.
            let mut best = 0;
            let mut best_sim = f64::NEG_INFINITY;
            for (i, e) in db.entries.iter().enumerate() {
                let sim = crate::nn::cosine_similarity(&q, &e.embedding.values).unwrap();
                if sim > best_sim {
                    best_sim = sim;
                    best = i;
                }
            }
            assert_eq!(idx, best);
        }
    }

    #[test]
    fn retrieve_scale_invariant_and_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let db = random_db(16, 8, &mut rng);
        let q: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let q2: Vec<f64> = q.iter().map(|v| 3.7 * v).collect();
        assert_eq!(db.retrieve(&q).unwrap().0, db.retrieve(&q2).unwrap().0);
        assert!(db.retrieve(&vec![0.0; 8]).is_err());
        let empty = ContextDatabase::default();
        assert!(matches!(empty.retrieve(&q), Err(Error::EmptyDatabase)));
    }

    #[test]
    fn build_is_pure_function_of_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let model = SocialContextModel::init(ScConfig::tiny(), &mut store, &mut rng);
        let tok = Tokenizer::new();
        let captions: Vec<CaptionPair> = (0..3).map(fake_caption).collect();
        let a = ContextDatabase::build(&model, &store, &tok, &captions).unwrap();
        let b = ContextDatabase::build(&model, &store, &tok, &captions).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert_eq!(x.embedding, y.embedding);
        }
        assert!(ContextDatabase::build(&model, &store, &tok, &[]).is_err());
    }

    #[test]
    fn save_load_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let db = random_db(8, 8, &mut rng);
        let dir = std::env::temp_dir().join("socnav_db_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("db.ckpt");
        db.save(&path).unwrap();
        let back = ContextDatabase::load(&path).unwrap();
        assert_eq!(back.len(), db.len());
        for (a, b) in db.entries.iter().zip(&back.entries) {
            assert_eq!(a.embedding.values, b.embedding.values);
            assert_eq!(a.caption, b.caption);
        }
        std::fs::remove_file(&path).unwrap();
    }
}
