//! The four end-to-end commands (`synth`, `train`, `generate`, `analyze`).
//! Every command reads and writes explicit paths only and leaves a manifest
//! next to its outputs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    aggregate, omission_scoring, select_foils, sensitivity_analysis, word_class_table, AggregateCurve,
    CaptionSample, Metric, OmissionRecord, SensitivityRecord,
};
use crate::captioner::{generate, load_params, save_params, ArchitectureKind, ModelDims, ModelParams, END, START};
use crate::error::{Error, Result};
use crate::report::{self, Manifest, Series};
use crate::synthworld::{
    build_vocabulary, generate_dataset, read_dataset, split_path, tag_words, write_dataset, DatasetConfig,
    GroundedExample, Vocabulary,
};
use crate::trainer::{encode_all, train_from, EpochRecord, Hyperparams, TrainingLog};

pub const MODEL_FILE: &str = "model.gprb";
pub const VOCAB_FILE: &str = "vocab.json";
pub const LOG_FILE: &str = "train_log.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CAPTIONS_FILE: &str = "captions.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub out: PathBuf,
    pub dataset: DatasetConfig,
}

pub fn cmd_synth(cfg: &SynthConfig) -> Result<()> {
    let ds = generate_dataset(&cfg.dataset)?;
    fs::create_dir_all(&cfg.out)?;
    for (split, examples) in [("train", &ds.train), ("val", &ds.val), ("test", &ds.test)] {
        write_dataset(split_path(&cfg.out, split), examples)?;
    }
    Manifest::new("synth", Some(cfg.dataset.seed), cfg)?.write(cfg.out.join(MANIFEST_FILE))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub data: PathBuf,
    pub out: PathBuf,
    pub arch: ArchitectureKind,
    pub min_count: usize,
    pub resume: Option<PathBuf>,
    pub hyper: Hyperparams,
}

impl TrainConfig {
    pub fn new(data: impl Into<PathBuf>, out: impl Into<PathBuf>, arch: ArchitectureKind) -> Self {
        Self {
            data: data.into(),
            out: out.into(),
            arch,
            min_count: 5,
            resume: None,
            hyper: Hyperparams::default(),
        }
    }
}

pub fn cmd_train(cfg: &TrainConfig, progress: impl FnMut(&EpochRecord)) -> Result<(ModelParams, TrainingLog)> {
    let train_ex = read_dataset(split_path(&cfg.data, "train"))?;
    let val_ex = read_dataset(split_path(&cfg.data, "val"))?;
    let first = train_ex.first().ok_or(Error::Empty("training split"))?;
    let vocab = build_vocabulary(train_ex.iter().map(|e| e.tokens.as_slice()), cfg.min_count);
    let dims = ModelDims {
        vocab: vocab.len(),
        embed: cfg.hyper.embed,
        hidden: cfg.hyper.hidden,
        image: first.features.len(),
    };
    let params = match &cfg.resume {
        Some(path) => {
            let p = load_params(path)?;
            if p.kind != cfg.arch {
                return Err(Error::Config(format!(
                    "checkpoint {} is a {} model, not {}",
                    path.display(),
                    p.kind,
                    cfg.arch
                )));
            }
            if p.dims != dims {
                return Err(Error::Config(format!(
                    "checkpoint dimensions {:?} differ from requested {dims:?}",
                    p.dims
                )));
            }
            p
        }
        None => ModelParams::init(cfg.arch, dims, cfg.hyper.seed, cfg.hyper.init_scale)?,
    };
    let train_set = encode_all(&train_ex, &vocab);
    let val_set = encode_all(&val_ex, &vocab);
    let (best, log) = train_from(params, &train_set, &val_set, &cfg.hyper, progress)?;
    fs::create_dir_all(&cfg.out)?;
    save_params(&best, cfg.out.join(MODEL_FILE))?;
    vocab.save(cfg.out.join(VOCAB_FILE))?;
    log.write_csv(cfg.out.join(LOG_FILE))?;
    Manifest::new("train", Some(cfg.hyper.seed), cfg)?.write(cfg.out.join(MANIFEST_FILE))?;
    Ok((best, log))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    /// Directory written by `train`.
    pub model: PathBuf,
    pub data: PathBuf,
    pub split: String,
    pub max_len: usize,
    /// Defaults to `<model>/captions.jsonl`.
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCaption {
    pub id: u64,
    pub image_id: u64,
    /// Generated words; START excluded, END included when produced.
    pub tokens: Vec<String>,
}

pub fn load_model(dir: &Path) -> Result<(ModelParams, Vocabulary)> {
    let params = load_params(dir.join(MODEL_FILE))?;
    let vocab = Vocabulary::load(dir.join(VOCAB_FILE))?;
    if vocab.len() != params.dims.vocab {
        return Err(Error::Config(format!(
            "vocabulary has {} entries but the model expects {}",
            vocab.len(),
            params.dims.vocab
        )));
    }
    Ok((params, vocab))
}

fn read_split(data: &Path, split: &str) -> Result<Vec<GroundedExample>> {
    let path = split_path(data, split);
    if !path.exists() {
        return Err(Error::Config(format!("missing dataset split {}", path.display())));
    }
    read_dataset(path)
}

pub fn cmd_generate(cfg: &GenerateConfig) -> Result<Vec<GeneratedCaption>> {
    let (params, vocab) = load_model(&cfg.model)?;
    let examples = read_split(&cfg.data, &cfg.split)?;
    let captions: Vec<GeneratedCaption> = {
        use rayon::prelude::*;
        examples
            .par_iter()
            .enumerate()
            .map(|(i, ex)| {
                let ids = generate(&params, &ex.features, cfg.max_len)?;
                Ok(GeneratedCaption {
                    id: i as u64,
                    image_id: ex.id,
                    tokens: vocab.decode(&ids),
                })
            })
            .collect::<Result<_>>()?
    };
    let out = cfg.out.clone().unwrap_or_else(|| cfg.model.join(CAPTIONS_FILE));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_captions(&out, &captions)?;
    let manifest = out.with_file_name(format!(
        "{}.manifest.json",
        out.file_stem().and_then(|s| s.to_str()).unwrap_or("captions")
    ));
    Manifest::new("generate", None, cfg)?.write(manifest)?;
    Ok(captions)
}

pub fn write_captions(path: &Path, captions: &[GeneratedCaption]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for c in captions {
        serde_json::to_writer(&mut w, c)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_captions(path: &Path) -> Result<Vec<GeneratedCaption>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Dataset {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoilMode {
    /// Farthest test image by cosine distance.
    Farthest,
    /// The image itself; every omission distance should be zero.
    #[serde(rename = "self")]
    SelfFoil,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeConfig {
    /// Model directories written by `train`.
    pub models: Vec<PathBuf>,
    /// Caption files, one per model; defaults to `<model>/captions.jsonl`.
    pub captions: Vec<PathBuf>,
    pub data: PathBuf,
    pub split: String,
    pub foil: FoilMode,
    pub out: PathBuf,
    pub svg: bool,
}

/// Everything computed for one model.
pub struct ModelAnalysis {
    pub label: String,
    pub kind: ArchitectureKind,
    pub sensitivity: Vec<SensitivityRecord>,
    pub omission: Vec<OmissionRecord>,
    /// Curves per caption length.
    pub curves: BTreeMap<usize, Vec<AggregateCurve>>,
    /// Generated captions that did not end with END and were skipped.
    pub skipped: usize,
}

fn labels(kinds: &[ArchitectureKind]) -> Vec<String> {
    let mut seen: HashMap<ArchitectureKind, usize> = HashMap::new();
    let total: HashMap<ArchitectureKind, usize> = kinds.iter().fold(HashMap::new(), |mut m, k| {
        *m.entry(*k).or_default() += 1;
        m
    });
    kinds
        .iter()
        .map(|k| {
            let n = seen.entry(*k).or_default();
            *n += 1;
            if total[k] > 1 {
                format!("{}-{}", k.name(), n)
            } else {
                k.name().to_string()
            }
        })
        .collect()
}

pub fn cmd_analyze(cfg: &AnalyzeConfig) -> Result<Vec<ModelAnalysis>> {
    if cfg.models.is_empty() {
        return Err(Error::Config("at least one model directory is required".into()));
    }
    if !cfg.captions.is_empty() && cfg.captions.len() != cfg.models.len() {
        return Err(Error::Config("give one caption file per model, or none".into()));
    }
    let examples = read_split(&cfg.data, &cfg.split)?;
    let features: HashMap<u64, &GroundedExample> = examples.iter().map(|e| (e.id, e)).collect();
    let foils: HashMap<u64, crate::tensor::Tensor> = match cfg.foil {
        FoilMode::SelfFoil => examples.iter().map(|e| (e.id, e.features.clone())).collect(),
        FoilMode::Farthest => {
            let images: Vec<(u64, &crate::tensor::Tensor)> = examples.iter().map(|e| (e.id, &e.features)).collect();
            select_foils(&images)?
                .into_iter()
                .map(|(id, foil)| (id, features[&foil].features.clone()))
                .collect()
        }
    };

    let models: Vec<(ModelParams, Vocabulary)> = cfg.models.iter().map(|m| load_model(m)).collect::<Result<_>>()?;
    let names = labels(&models.iter().map(|(p, _)| p.kind).collect::<Vec<_>>());
    fs::create_dir_all(&cfg.out)?;
    let mut results = Vec::new();
    for (i, ((params, vocab), label)) in models.iter().zip(names).enumerate() {
        let caption_path = cfg
            .captions
            .get(i)
            .cloned()
            .unwrap_or_else(|| cfg.models[i].join(CAPTIONS_FILE));
        let captions = read_captions(&caption_path)?;
        let mut samples = Vec::new();
        let mut class_seqs: BTreeMap<usize, Vec<_>> = BTreeMap::new();
        let mut skipped = 0;
        for c in &captions {
            if c.tokens.last().map(String::as_str) != Some(vocab.word(END)) {
                skipped += 1;
                continue;
            }
            let ex = features.get(&c.image_id).ok_or_else(|| {
                Error::Config(format!("caption {} refers to unknown image {}", c.id, c.image_id))
            })?;
            let mut tokens = vec![START];
            tokens.extend(vocab.encode(&c.tokens));
            let sample = CaptionSample {
                caption_id: c.id,
                image_id: c.image_id,
                image: ex.features.clone(),
                tokens,
            };
            class_seqs.entry(sample.caption_len()).or_default().push(tag_words(&c.tokens));
            samples.push(sample);
        }
        if samples.is_empty() {
            return Err(Error::Empty("captions ending with END"));
        }
        let sensitivity = sensitivity_analysis(params, &samples)?;
        let omission = omission_scoring(params, &samples, &foils)?;

        let dir = cfg.out.join(&label);
        fs::create_dir_all(&dir)?;
        report::write_sensitivity_csv(dir.join("sensitivity.csv"), &sensitivity)?;
        report::write_omission_csv(dir.join("omission.csv"), &omission)?;
        let lengths: BTreeSet<usize> = samples.iter().map(CaptionSample::caption_len).collect();
        let mut curves = BTreeMap::new();
        for &len in &lengths {
            let mut per_len = Vec::new();
            for m in Metric::SENSITIVITY {
                per_len.push(aggregate(&sensitivity, len, m)?);
            }
            for m in Metric::OMISSION {
                per_len.push(aggregate(&omission, len, m)?);
            }
            report::write_curves_csv(dir.join(format!("curves_L{len}.csv")), &per_len)?;
            curves.insert(len, per_len);
        }
        let tables = class_seqs
            .iter()
            .map(|(&len, seqs)| Ok((len, word_class_table(seqs)?)))
            .collect::<Result<Vec<_>>>()?;
        report::write_classes_csv(dir.join("classes.csv"), &tables)?;
        results.push(ModelAnalysis {
            label,
            kind: params.kind,
            sensitivity,
            omission,
            curves,
            skipped,
        });
    }

    if cfg.svg {
        write_charts(&cfg.out, &results)?;
    }
    Manifest::new("analyze", None, cfg)?.write(cfg.out.join(MANIFEST_FILE))?;
    Ok(results)
}

/// Most frequent caption length over all models; ties go to the shorter one.
pub fn dominant_length(results: &[ModelAnalysis]) -> Option<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for r in results {
        for rec in r.sensitivity.iter().filter(|s| s.position == 0) {
            *counts.entry(rec.caption_len).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(len, _)| len)
}

fn write_charts(out: &Path, results: &[ModelAnalysis]) -> Result<()> {
    let Some(len) = dominant_length(results) else { return Ok(()) };
    for metric in Metric::all() {
        let series: Vec<Series> = results
            .iter()
            .filter_map(|r| {
                let curve = r.curves.get(&len)?.iter().find(|c| c.metric == metric)?;
                Some(Series {
                    name: r.label.clone(),
                    points: curve.points.iter().map(|p| (p.position as f64, p.mean)).collect(),
                })
            })
            .collect();
        let svg = report::line_chart_svg(
            &format!("{} ({len}-word captions)", metric.name()),
            "position",
            metric.name(),
            &series,
        );
        fs::write(out.join(format!("{}_L{len}.svg", metric.name())), svg)?;
    }
    Ok(())
}
