//! Deterministic synthetic grounded captions.
//!
//! A scene holds two entities (adjective + noun) and a relation. Its image
//! feature vector is the sum of one fixed unit vector per (role, class) pair
//! plus Gaussian noise; the unit vectors are random but mutually orthonormal,
//! so every scene attribute is linearly recoverable from the features.
//!
//! Captions follow one of two templates:
//!
//! ```text
//! a ADJ NOUN is ADP a ADJ NOUN     (relations 1..=5, 8 words + END)
//! a ADJ NOUN stands                (relation 0,      4 words + END)
//! ```

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::captioner::{END, START, UNK};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const UNK_WORD: &str = "<unk>";
pub const START_WORD: &str = "<start>";
pub const END_WORD: &str = "<end>";

pub const NOUNS: [&str; 10] = [
    "dog", "cat", "horse", "bird", "car", "boat", "tree", "chair", "table", "ball",
];
pub const ADJECTIVES: [&str; 8] = ["red", "blue", "green", "white", "big", "small", "old", "young"];
/// Relation 0 has no preposition: it selects the short template.
pub const RELATIONS: [Option<&str>; 6] = [
    None,
    Some("on"),
    Some("under"),
    Some("near"),
    Some("behind"),
    Some("beside"),
];
const DET: &str = "a";
const COPULA: &str = "is";
const INTRANSITIVE: &str = "stands";

/// Number of distinct (role, class) unit vectors; `D` must be at least this.
pub const ENCODING_WIDTH: usize = 2 * (NOUNS.len() + ADJECTIVES.len()) + RELATIONS.len();

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum WordClass {
    Det,
    Adj,
    Noun,
    Adp,
    Verb,
    Num,
    Conj,
    Pron,
    Prt,
    Adv,
    End,
    Start,
    Unk,
}

impl WordClass {
    pub const ALL: [WordClass; 13] = [
        WordClass::Det,
        WordClass::Adj,
        WordClass::Noun,
        WordClass::Adp,
        WordClass::Verb,
        WordClass::Num,
        WordClass::Conj,
        WordClass::Pron,
        WordClass::Prt,
        WordClass::Adv,
        WordClass::End,
        WordClass::Start,
        WordClass::Unk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WordClass::Det => "DET",
            WordClass::Adj => "ADJ",
            WordClass::Noun => "NOUN",
            WordClass::Adp => "ADP",
            WordClass::Verb => "VERB",
            WordClass::Num => "NUM",
            WordClass::Conj => "CONJ",
            WordClass::Pron => "PRON",
            WordClass::Prt => "PRT",
            WordClass::Adv => "ADV",
            WordClass::End => "END",
            WordClass::Start => "START",
            WordClass::Unk => "UNK",
        }
    }
}

impl fmt::Display for WordClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Word class of a grammar word, `None` for words outside the grammar.
pub fn classify(word: &str) -> Option<WordClass> {
    match word {
        START_WORD => Some(WordClass::Start),
        END_WORD => Some(WordClass::End),
        DET => Some(WordClass::Det),
        COPULA | INTRANSITIVE => Some(WordClass::Verb),
        w if NOUNS.contains(&w) => Some(WordClass::Noun),
        w if ADJECTIVES.contains(&w) => Some(WordClass::Adj),
        w if RELATIONS.contains(&Some(w)) => Some(WordClass::Adp),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Entity {
    pub noun: usize,
    pub adjective: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Scene {
    pub id: u64,
    pub first: Entity,
    pub second: Entity,
    pub relation: usize,
    pub noise_seed: u64,
}

impl Scene {
    /// Rendered caption, START and END included.
    pub fn caption(&self) -> Vec<String> {
        let mut words = vec![
            START_WORD,
            DET,
            ADJECTIVES[self.first.adjective],
            NOUNS[self.first.noun],
        ];
        match RELATIONS[self.relation] {
            None => words.push(INTRANSITIVE),
            Some(prep) => words.extend([
                COPULA,
                prep,
                DET,
                ADJECTIVES[self.second.adjective],
                NOUNS[self.second.noun],
            ]),
        }
        words.push(END_WORD);
        words.into_iter().map(String::from).collect()
    }
}

/// True when `words` (START..END) is a rendering of either template.
pub fn matches_template(words: &[String]) -> bool {
    let classes: Option<Vec<WordClass>> = words.iter().map(|w| classify(w)).collect();
    let Some(classes) = classes else { return false };
    use WordClass::*;
    let long = [Start, Det, Adj, Noun, Verb, Adp, Det, Adj, Noun, End];
    let short = [Start, Det, Adj, Noun, Verb, End];
    if classes == long {
        words[4] == COPULA && words[6] == DET
    } else if classes == short {
        words[4] == INTRANSITIVE
    } else {
        false
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Feature width `D`.
    pub dim: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_train: 5000,
            n_val: 500,
            n_test: 500,
            dim: 64,
            noise_std: 0.1,
            seed: 7,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_val == 0 || self.n_test == 0 {
            return Err(Error::Config("every split needs at least one example".into()));
        }
        if self.dim < ENCODING_WIDTH {
            return Err(Error::Config(format!(
                "feature width {} below the inventory encoding width {ENCODING_WIDTH}",
                self.dim
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!("invalid noise_std {}", self.noise_std)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundedExample {
    pub id: u64,
    pub features: Tensor,
    /// Caption words from START to END.
    pub tokens: Vec<String>,
    pub word_classes: Vec<WordClass>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Vec<GroundedExample>,
    pub val: Vec<GroundedExample>,
    pub test: Vec<GroundedExample>,
}

fn mix(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Orthonormal unit vectors, one per (role, class) pair.
pub struct FeatureBasis {
    vectors: Vec<Vec<f64>>,
}

impl FeatureBasis {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < ENCODING_WIDTH {
            return Err(Error::Config(format!(
                "feature width {dim} below the inventory encoding width {ENCODING_WIDTH}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, u64::MAX));
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(ENCODING_WIDTH);
        while vectors.len() < ENCODING_WIDTH {
            let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            for u in &vectors {
                let proj: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (a, b) in v.iter_mut().zip(u) {
                    *a -= proj * b;
                }
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-6 {
                vectors.push(v.into_iter().map(|a| a / norm).collect());
            }
        }
        Ok(Self { vectors })
    }

    fn index(scene: &Scene) -> [usize; 5] {
        let n = NOUNS.len();
        let a = ADJECTIVES.len();
        [
            scene.first.noun,
            n + scene.first.adjective,
            n + a + scene.second.noun,
            2 * n + a + scene.second.adjective,
            2 * (n + a) + scene.relation,
        ]
    }

    pub fn features(&self, scene: &Scene, noise_std: f64) -> Tensor {
        let dim = self.vectors[0].len();
        let mut out = vec![0.0; dim];
        for i in Self::index(scene) {
            for (o, v) in out.iter_mut().zip(&self.vectors[i]) {
                *o += v;
            }
        }
        if noise_std > 0.0 {
            let normal = Normal::new(0.0, noise_std).expect("validated noise_std");
            let mut rng = ChaCha8Rng::seed_from_u64(scene.noise_seed);
            for o in out.iter_mut() {
                *o += normal.sample(&mut rng);
            }
        }
        Tensor::vector(out)
    }
}

pub fn sample_scene(seed: u64, id: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, id));
    let entity = |rng: &mut ChaCha8Rng| Entity {
        noun: rng.random_range(0..NOUNS.len()),
        adjective: rng.random_range(0..ADJECTIVES.len()),
    };
    let first = entity(&mut rng);
    let second = entity(&mut rng);
    let relation = rng.random_range(0..RELATIONS.len());
    Scene {
        id,
        first,
        second,
        relation,
        noise_seed: rng.random(),
    }
}

pub fn tag_words(words: &[String]) -> Vec<WordClass> {
    words
        .iter()
        .map(|w| classify(w).unwrap_or(WordClass::Unk))
        .collect()
}

fn make_example(basis: &FeatureBasis, scene: &Scene, noise_std: f64) -> GroundedExample {
    let tokens = scene.caption();
    GroundedExample {
        id: scene.id,
        features: basis.features(scene, noise_std),
        word_classes: tag_words(&tokens),
        tokens,
    }
}

/// Train/val/test splits with consecutive, disjoint scene ids.
pub fn generate_dataset(config: &DatasetConfig) -> Result<Dataset> {
    config.validate()?;
    let basis = FeatureBasis::new(config.dim, config.seed)?;
    let split = |from: usize, n: usize| -> Vec<GroundedExample> {
        (from..from + n)
            .map(|id| make_example(&basis, &sample_scene(config.seed, id as u64), config.noise_std))
            .collect()
    };
    Ok(Dataset {
        train: split(0, config.n_train),
        val: split(config.n_train, config.n_val),
        test: split(config.n_train + config.n_val, config.n_test),
    })
}

/// Bijective token/id map. Ids 0, 1, 2 are UNK, START and END.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_words(words: Vec<String>) -> Result<Self> {
        if words.len() < 3 || words[UNK] != UNK_WORD || words[START] != START_WORD || words[END] != END_WORD {
            return Err(Error::Config("vocabulary must begin with <unk>, <start>, <end>".into()));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary entry {w:?}")));
            }
        }
        Ok(Self { words, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn word(&self, id: usize) -> &str {
        self.words.get(id).map(String::as_str).unwrap_or(UNK_WORD)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> Vec<usize> {
        words.iter().map(|w| self.id(w.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.word(i).to_string()).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(f, &self.words)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let words: Vec<String> = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        Self::from_words(words)
    }
}

/// Keeps words occurring at least `min_count` times, ordered by count
/// (descending) then lexicographically. Reserved words are not counted.
pub fn build_vocabulary<'a, C, S>(captions: C, min_count: usize) -> Vocabulary
where
    C: IntoIterator<Item = &'a [S]>,
    S: AsRef<str> + 'a,
{
    let min_count = min_count.max(1);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for caption in captions {
        for w in caption {
            let w = w.as_ref();
            if w != UNK_WORD && w != START_WORD && w != END_WORD {
                *counts.entry(w).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let words = [UNK_WORD, START_WORD, END_WORD]
        .into_iter()
        .chain(kept.into_iter().map(|(w, _)| w))
        .map(String::from)
        .collect();
    Vocabulary::from_words(words).expect("reserved prefix and unique words")
}

#[derive(Serialize, Deserialize)]
struct ExampleLine {
    id: u64,
    features: Vec<f64>,
    tokens: Vec<String>,
    classes: Vec<WordClass>,
}

pub fn write_dataset(path: impl AsRef<Path>, examples: &[GroundedExample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for ex in examples {
        let line = ExampleLine {
            id: ex.id,
            features: ex.features.data().to_vec(),
            tokens: ex.tokens.clone(),
            classes: ex.word_classes.clone(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<GroundedExample>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Dataset {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: ExampleLine = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if rec.tokens.len() != rec.classes.len() {
            return Err(err(format!(
                "{} tokens but {} classes",
                rec.tokens.len(),
                rec.classes.len()
            )));
        }
        if rec.features.is_empty() {
            return Err(err("empty feature vector".into()));
        }
        out.push(GroundedExample {
            id: rec.id,
            features: Tensor::vector(rec.features),
            tokens: rec.tokens,
            word_classes: rec.classes,
        });
    }
    Ok(out)
}

pub const SPLITS: [&str; 3] = ["train", "val", "test"];

pub fn split_path(dir: impl AsRef<Path>, split: &str) -> std::path::PathBuf {
    dir.as_ref().join(format!("{split}.jsonl"))
}
