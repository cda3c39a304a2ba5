//! Seeded synthetic corpora with matching embedding tables.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedDocument, Corpus};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};

const POS_TAGS: [&str; 8] = ["NNG", "JKS", "VV", "EP", "EF", "NNP", "JKO", "MAG"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub docs_per_class: usize,
    pub vocab_per_class: usize,
    /// Probability that a morpheme is drawn from the pooled vocabulary of all
    /// classes instead of the document's own block.
    pub overlap: f64,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability of each of the two entity slots per document being filled.
    pub entity_density: f64,
    pub entities_per_class: usize,
    /// Same as `overlap`, for entity mentions.
    pub entity_overlap: f64,
    pub embedding_dim: usize,
    pub entity_dim: usize,
    /// Weight of the per-class mean direction added to each random unit vector.
    pub class_offset: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 3,
            docs_per_class: 40,
            vocab_per_class: 20,
            overlap: 0.0,
            min_len: 5,
            max_len: 10,
            entity_density: 0.5,
            entities_per_class: 6,
            entity_overlap: 0.0,
            embedding_dim: 16,
            entity_dim: 16,
            class_offset: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub morpheme_embeddings: EmbeddingTable,
    pub entity_embeddings: EmbeddingTable,
}

impl SyntheticCorpus {
    /// Writes `corpus.jsonl`, `morphemes.lgem` and `entities.lgem` (plus token
    /// files) into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.corpus.write_jsonl(&dir.join("corpus.jsonl"))?;
        self.morpheme_embeddings.write(&dir.join("morphemes.lgem"))?;
        self.entity_embeddings.write(&dir.join("entities.lgem"))?;
        Ok(())
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn class_embedding(rng: &mut ChaCha8Rng, mean: &[f64], offset: f64) -> Vec<f32> {
    let noise = random_unit(rng, mean.len());
    let v: Vec<f64> = noise.iter().zip(mean).map(|(n, m)| n + offset * m).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.iter().map(|x| (x / norm) as f32).collect()
}

pub fn generate_synthetic_corpus(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticCorpus> {
    if spec.classes == 0 || spec.docs_per_class == 0 {
        return Err(Error::InvalidSynthSpec("need at least one class and one document".into()));
    }
    if spec.vocab_per_class == 0 || spec.embedding_dim == 0 || spec.entity_dim == 0 {
        return Err(Error::InvalidSynthSpec("vocabulary and dimensions must be positive".into()));
    }
    if spec.min_len > spec.max_len {
        return Err(Error::InvalidSynthSpec("min_len exceeds max_len".into()));
    }
    for (name, p) in [
        ("overlap", spec.overlap),
        ("entity_overlap", spec.entity_overlap),
        ("entity_density", spec.entity_density),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidSynthSpec(format!("{name} must lie in [0, 1]")));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let morph = |c: usize, k: usize| format!("m{c}_{k}");
    let ent = |c: usize, k: usize| format!("e{c}_{k}");
    let pos_of = |c: usize, k: usize| POS_TAGS[(c * spec.vocab_per_class + k) % POS_TAGS.len()];

    let mut documents = Vec::with_capacity(spec.classes * spec.docs_per_class);
    for _ in 0..spec.docs_per_class {
        for c in 0..spec.classes {
            let len = rng.gen_range(spec.min_len..=spec.max_len);
            let mut morphemes = Vec::with_capacity(len);
            let mut pos_tags = Vec::with_capacity(len);
            for _ in 0..len {
                let block = if rng.gen::<f64>() < spec.overlap {
                    rng.gen_range(0..spec.classes)
                } else {
                    c
                };
                let t = rng.gen_range(0..spec.vocab_per_class);
                morphemes.push(morph(block, t));
                pos_tags.push(pos_of(block, t).to_string());
            }
            let mut entities = Vec::new();
            if spec.entities_per_class > 0 {
                for _ in 0..2 {
                    if rng.gen::<f64>() < spec.entity_density {
                        let block = if rng.gen::<f64>() < spec.entity_overlap {
                            rng.gen_range(0..spec.classes)
                        } else {
                            c
                        };
                        let e = ent(block, rng.gen_range(0..spec.entities_per_class));
                        if !entities.contains(&e) {
                            entities.push(e);
                        }
                    }
                }
            }
            documents.push(AnnotatedDocument {
                id: format!("doc{:05}", documents.len()),
                morphemes,
                pos_tags,
                entities,
                label: Some(format!("class{c}")),
                split: None,
            });
        }
    }

    let mut morpheme_embeddings = EmbeddingTable::new(spec.embedding_dim);
    let mut entity_embeddings = EmbeddingTable::new(spec.entity_dim);
    let means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| random_unit(&mut rng, spec.embedding_dim))
        .collect();
    let entity_means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| random_unit(&mut rng, spec.entity_dim))
        .collect();
    for c in 0..spec.classes {
        for k in 0..spec.vocab_per_class {
            let row = class_embedding(&mut rng, &means[c], spec.class_offset);
            morpheme_embeddings.insert(&morph(c, k), &row)?;
        }
        for k in 0..spec.entities_per_class {
            let row = class_embedding(&mut rng, &entity_means[c], spec.class_offset);
            entity_embeddings.insert(&ent(c, k), &row)?;
        }
    }

    // Shuffle document order so classes are not trivially interleaved.
    documents.shuffle(&mut rng);
    for (i, d) in documents.iter_mut().enumerate() {
        d.id = format!("doc{i:05}");
    }

    Ok(SyntheticCorpus {
        corpus: Corpus::new(documents),
        morpheme_embeddings,
        entity_embeddings,
    })
}
