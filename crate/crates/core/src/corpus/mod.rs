//! Annotated corpora: loading, cleaning, vocabulary indexing and splits.

mod synth;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use synth::{generate_synthetic_corpus, SyntheticCorpus, SyntheticSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    Unlabeled,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unlabeled => "unlabeled",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "unlabeled" => Ok(Split::Unlabeled),
            other => Err(other.to_string()),
        }
    }
}

/// One short text with aligned morpheme and POS sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedDocument {
    pub id: String,
    pub morphemes: Vec<String>,
    pub pos_tags: Vec<String>,
    /// Distinct entity mentions in first-seen order.
    pub entities: Vec<String>,
    pub label: Option<String>,
    /// `None` until splits are assigned.
    pub split: Option<Split>,
}

/// Token to dense index association in first-occurrence order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index of `token`, inserting it at the end if unseen.
    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let i = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), i);
        i
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub documents: Vec<AnnotatedDocument>,
    pub class_names: Vec<String>,
    pub morpheme_vocab: Vocabulary,
    pub pos_vocab: Vocabulary,
    pub entity_vocab: Vocabulary,
}

/// Wire form of one corpus line.
#[derive(Debug, Serialize, Deserialize)]
struct CorpusRecord {
    id: String,
    morphemes: Vec<String>,
    pos: Vec<String>,
    #[serde(default)]
    entities: Vec<String>,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    split: Option<String>,
}

/// Table-1-style corpus statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub texts: usize,
    pub avg_length: f64,
    pub classes: usize,
    pub train: usize,
    pub morphemes: usize,
    pub entities: usize,
    pub pos: usize,
}

impl Corpus {
    pub fn new(documents: Vec<AnnotatedDocument>) -> Self {
        Self {
            documents,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    /// Class index of every document, `None` when unlabeled.
    pub fn labels(&self) -> Vec<Option<usize>> {
        self.documents
            .iter()
            .map(|d| d.label.as_deref().and_then(|l| self.class_index(l)))
            .collect()
    }

    pub fn indices_in(&self, split: Split) -> Vec<usize> {
        self.documents
            .iter()
            .enumerate()
            .filter(|(_, d)| d.split == Some(split))
            .map(|(i, _)| i)
            .collect()
    }

    /// Morpheme ids per document; tokens outside the vocabulary are skipped.
    pub fn morpheme_ids(&self) -> Vec<Vec<usize>> {
        self.documents
            .iter()
            .map(|d| d.morphemes.iter().filter_map(|m| self.morpheme_vocab.get(m)).collect())
            .collect()
    }

    pub fn pos_ids(&self) -> Vec<Vec<usize>> {
        self.documents
            .iter()
            .map(|d| d.pos_tags.iter().filter_map(|p| self.pos_vocab.get(p)).collect())
            .collect()
    }

    pub fn entity_ids(&self) -> Vec<Vec<usize>> {
        self.documents
            .iter()
            .map(|d| d.entities.iter().filter_map(|e| self.entity_vocab.get(e)).collect())
            .collect()
    }

    /// Reorders documents so that document `i` moves to position `perm[i]`.
    /// Vocabularies and class names are left untouched.
    pub fn permute_documents(&self, perm: &[usize]) -> Corpus {
        assert_eq!(perm.len(), self.len(), "permutation length");
        let mut slots: Vec<Option<AnnotatedDocument>> = vec![None; self.len()];
        for (i, doc) in self.documents.iter().enumerate() {
            slots[perm[i]] = Some(doc.clone());
        }
        Corpus {
            documents: slots.into_iter().map(|d| d.expect("perm is a bijection")).collect(),
            ..self.clone()
        }
    }

    pub fn stats(&self) -> CorpusStats {
        let total: usize = self.documents.iter().map(|d| d.morphemes.len()).sum();
        let classes: HashSet<&str> = self.documents.iter().filter_map(|d| d.label.as_deref()).collect();
        let entities: HashSet<&str> = self
            .documents
            .iter()
            .flat_map(|d| d.entities.iter().map(String::as_str))
            .collect();
        let morphemes: HashSet<&str> = self
            .documents
            .iter()
            .flat_map(|d| d.morphemes.iter().map(String::as_str))
            .collect();
        let pos: HashSet<&str> = self
            .documents
            .iter()
            .flat_map(|d| d.pos_tags.iter().map(String::as_str))
            .collect();
        CorpusStats {
            texts: self.len(),
            avg_length: if self.is_empty() {
                0.0
            } else {
                total as f64 / self.len() as f64
            },
            classes: classes.len(),
            train: self.indices_in(Split::Train).len(),
            morphemes: morphemes.len(),
            entities: entities.len(),
            pos: pos.len(),
        }
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for doc in &self.documents {
            let record = CorpusRecord {
                id: doc.id.clone(),
                morphemes: doc.morphemes.clone(),
                pos: doc.pos_tags.clone(),
                entities: doc.entities.clone(),
                label: doc.label.clone(),
                split: doc.split.map(|s| s.as_str().to_string()),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let reader = BufReader::new(File::open(path)?);
    parse_corpus(reader, path)
}

/// Parses line-delimited JSON records. Blank lines are ignored.
pub fn parse_corpus<R: BufRead>(reader: R, path: &Path) -> Result<Corpus> {
    let mut documents = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if record.morphemes.len() != record.pos.len() {
            return Err(Error::AlignmentMismatch {
                line: line_no,
                morphemes: record.morphemes.len(),
                pos: record.pos.len(),
            });
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId {
                id: record.id,
                line: line_no,
            });
        }
        let split = match record.split.as_deref() {
            None => None,
            Some(tag) => Some(tag.parse::<Split>().map_err(|tag| Error::UnknownSplit {
                line: line_no,
                tag,
            })?),
        };
        if matches!(split, Some(Split::Train | Split::Val)) && record.label.is_none() {
            return Err(Error::MissingLabel {
                id: record.id,
                split: split.unwrap().to_string(),
            });
        }
        let mut entities = Vec::with_capacity(record.entities.len());
        for e in record.entities {
            if !entities.contains(&e) {
                entities.push(e);
            }
        }
        documents.push(AnnotatedDocument {
            id: record.id,
            morphemes: record.morphemes,
            pos_tags: record.pos,
            entities,
            label: record.label,
            split,
        });
    }
    Ok(Corpus::new(documents))
}

/// Collapses documents with identical morpheme sequences onto the first one.
pub fn deduplicate(corpus: Corpus) -> Corpus {
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let documents = corpus
        .documents
        .into_iter()
        .filter(|d| seen.insert(d.morphemes.clone()))
        .collect();
    Corpus {
        documents,
        ..corpus_shell(corpus.class_names)
    }
}

fn corpus_shell(class_names: Vec<String>) -> Corpus {
    Corpus {
        class_names,
        ..Corpus::default()
    }
}

/// Drops morphemes occurring fewer than `min_freq` times in the whole corpus,
/// together with the POS tag at the same position.
pub fn filter_low_frequency(corpus: Corpus, min_freq: usize) -> Corpus {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for doc in &corpus.documents {
        for m in &doc.morphemes {
            *counts.entry(m.as_str()).or_default() += 1;
        }
    }
    let rare: HashSet<String> = counts
        .into_iter()
        .filter(|&(_, c)| c < min_freq)
        .map(|(m, _)| m.to_string())
        .collect();
    if rare.is_empty() {
        return corpus;
    }
    let documents = corpus
        .documents
        .into_iter()
        .map(|mut doc| {
            let (morphemes, pos_tags) = doc
                .morphemes
                .into_iter()
                .zip(doc.pos_tags)
                .filter(|(m, _)| !rare.contains(m))
                .unzip();
            doc.morphemes = morphemes;
            doc.pos_tags = pos_tags;
            doc
        })
        .collect();
    Corpus {
        documents,
        ..corpus_shell(corpus.class_names)
    }
}

/// Assigns dense first-occurrence indices to morphemes, POS tags, entities
/// and class names.
pub fn build_vocabularies(mut corpus: Corpus) -> Result<Corpus> {
    let mut morphemes = Vocabulary::new();
    let mut pos = Vocabulary::new();
    let mut entities = Vocabulary::new();
    let mut classes = Vocabulary::new();
    for doc in &corpus.documents {
        doc.morphemes.iter().for_each(|m| {
            morphemes.insert(m);
        });
        doc.pos_tags.iter().for_each(|p| {
            pos.insert(p);
        });
        doc.entities.iter().for_each(|e| {
            entities.insert(e);
        });
        if let Some(label) = &doc.label {
            classes.insert(label);
        }
    }
    if classes.is_empty() {
        return Err(Error::NoLabeledDocuments);
    }
    corpus.morpheme_vocab = morphemes;
    corpus.pos_vocab = pos;
    corpus.entity_vocab = entities;
    corpus.class_names = classes.tokens().to_vec();
    Ok(corpus)
}

/// Samples `per_class` labeled documents per class; the first half of each
/// sample becomes train, the rest val, and every other labeled document test.
/// Documents without a label are marked unlabeled.
pub fn assign_splits(mut corpus: Corpus, per_class: usize, seed: u64) -> Result<Corpus> {
    let class_names = if corpus.class_names.is_empty() {
        let mut classes = Vocabulary::new();
        for label in corpus.documents.iter().filter_map(|d| d.label.as_deref()) {
            classes.insert(label);
        }
        classes.tokens().to_vec()
    } else {
        corpus.class_names.clone()
    };
    if class_names.is_empty() {
        return Err(Error::NoLabeledDocuments);
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); class_names.len()];
    for (i, doc) in corpus.documents.iter().enumerate() {
        if let Some(label) = &doc.label {
            let c = class_names
                .iter()
                .position(|n| n == label)
                .ok_or(Error::NoLabeledDocuments)?;
            by_class[c].push(i);
        }
    }
    for (name, members) in class_names.iter().zip(&by_class) {
        if members.len() < per_class {
            return Err(Error::InsufficientClass {
                class: name.clone(),
                available: members.len(),
                required: per_class,
            });
        }
    }

    for doc in &mut corpus.documents {
        doc.split = Some(if doc.label.is_some() {
            Split::Test
        } else {
            Split::Unlabeled
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_train = per_class / 2;
    for members in &by_class {
        let picked = sample(&mut rng, members.len(), per_class);
        for (k, pos) in picked.iter().enumerate() {
            corpus.documents[members[pos]].split =
                Some(if k < n_train { Split::Train } else { Split::Val });
        }
    }
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareOptions {
    pub deduplicate: bool,
    pub min_freq: usize,
    /// Labeled documents sampled per class when the file carries no splits.
    pub per_class: usize,
    pub seed: u64,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            deduplicate: true,
            min_freq: 5,
            per_class: 40,
            seed: 0,
        }
    }
}

/// Deduplicate, filter, index, and assign splits unless every document
/// already has one.
pub fn prepare_corpus(corpus: Corpus, options: &PrepareOptions) -> Result<Corpus> {
    let corpus = if options.deduplicate {
        deduplicate(corpus)
    } else {
        corpus
    };
    let corpus = build_vocabularies(filter_low_frequency(corpus, options.min_freq.max(1)))?;
    let assigned = corpus.documents.iter().filter(|d| d.split.is_some()).count();
    if assigned == corpus.len() && assigned > 0 {
        Ok(corpus)
    } else if assigned == 0 {
        assign_splits(corpus, options.per_class, options.seed)
    } else {
        Err(Error::PartialSplits)
    }
}
