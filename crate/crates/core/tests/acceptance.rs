//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- 1 4`.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::*;
use gprb_core::analysis::{next_word_gradients, CaptionSample};
use gprb_core::autodiff::{finite_diff, ExprGraph};
use gprb_core::captioner::{forward_replay, ArchitectureKind, ModelParams};
use gprb_core::pipeline::{
    cmd_analyze, cmd_generate, cmd_synth, cmd_train, load_model, read_captions, AnalyzeConfig, FoilMode,
    GenerateConfig, SynthConfig, TrainConfig,
};
use gprb_core::synthworld::{classify, split_path, END_WORD};
use gprb_core::trainer::{caption_nll, encode_all, train_from, EncodedCaption};
use gprb_core::{
    cosine_distance, generate_dataset, js_divergence, omission_scoring, perplexity, read_dataset, select_foil,
    train, DatasetConfig, Hyperparams, Tensor, WordClass,
};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

// ---- 1 ----------------------------------------------------------------------

fn gradient_oracle() -> Outcome {
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut coords = 0usize;
    for (k, kind) in ArchitectureKind::ALL.into_iter().enumerate() {
        for inst in 0..20u64 {
            let seed = 100 * k as u64 + inst;
            let params = random_params(kind, micro_dims(), seed);
            let mut r = rng(seed);
            let image = Tensor::vector(random_vec(&mut r, 10, 1.0));
            let tokens = random_caption(&mut r, 12, 5);
            let grads = next_word_gradients(&params, &image, &tokens).map_err(|e| e.to_string())?;
            for (t, g) in grads.iter().enumerate() {
                let fd_img = finite_diff(|x| prob_with_image(&params, x, &tokens, t), &image, 1e-5);
                let word = Tensor::vector(params.embedding.row(tokens[t]).to_vec());
                let fd_word = finite_diff(|w| prob_with_word(&params, &image, &tokens, t, w), &word, 1e-5);
                for (what, analytic, numeric) in [("image", &g.image, &fd_img), ("word", &g.prev_word, &fd_word)] {
                    for (i, (a, n)) in analytic.data().iter().zip(numeric.data()).enumerate() {
                        coords += 1;
                        if !close(*a, *n, 1e-4, 1e-7) {
                            return Err(format!(
                                "{kind} instance {inst} step {t} {what}[{i}]: backward {a:e} vs finite diff {n:e}"
                            ));
                        }
                        if a.abs().max(n.abs()) > 1e-6 {
                            worst = worst.max(rel_err(*a, *n));
                        }
                    }
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    check(secs < 120.0, format!("took {secs:.1}s, budget 120s"))?;
    Ok(format!("80 instances, {coords} coordinates, worst relative error {worst:.2e}, {secs:.1}s"))
}

// ---- 2 ----------------------------------------------------------------------

fn metric_identities() -> Outcome {
    let mut r = rng(22);
    for case in 0..1000 {
        let n = r.random_range(2..40);
        let scale = 10f64.powi(r.random_range(-3..4));
        let a = random_vec(&mut r, n, scale);
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let self_d = cosine_distance(&a, &a).map_err(|e| e.to_string())?;
        check(self_d <= 1e-12, format!("case {case}: cos(a,a) = {self_d:e}"))?;
        let anti = cosine_distance(&a, &neg).map_err(|e| e.to_string())?;
        check((anti - 2.0).abs() <= 1e-12, format!("case {case}: cos(a,-a) = {anti}"))?;

        let dist = |r: &mut rand_chacha::ChaCha8Rng| {
            let v: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0f64).powi(3)).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let p = dist(&mut r);
        let q = dist(&mut r);
        let pp = js_divergence(&p, &p).map_err(|e| e.to_string())?;
        check(pp <= 1e-12, format!("case {case}: jsd(p,p) = {pp:e}"))?;
        let pq = js_divergence(&p, &q).map_err(|e| e.to_string())?;
        let qp = js_divergence(&q, &p).map_err(|e| e.to_string())?;
        check((pq - qp).abs() <= 1e-12, format!("case {case}: jsd asymmetry {:e}", (pq - qp).abs()))?;

        // disjoint supports, including the two-point case [1,0] vs [0,1]
        let split = if case == 0 { 1 } else { r.random_range(1..n) };
        let m = if case == 0 { 2 } else { n };
        let left: Vec<f64> = (0..m).map(|i| if i < split { 1.0 / split as f64 } else { 0.0 }).collect();
        let right: Vec<f64> = (0..m).map(|i| if i >= split { 1.0 / (m - split) as f64 } else { 0.0 }).collect();
        let disjoint = js_divergence(&left, &right).map_err(|e| e.to_string())?;
        check((disjoint - 1.0).abs() <= 1e-12, format!("case {case}: disjoint jsd = {disjoint}"))?;

        let mut g = ExprGraph::new();
        let logits = g.leaf(Tensor::vector(random_vec(&mut r, n, 50.0 * scale)));
        let sm = g.softmax(logits).map_err(|e| e.to_string())?;
        let total: f64 = g.value(sm).data().iter().sum();
        check((total - 1.0).abs() <= 1e-9, format!("case {case}: softmax sums to {total}"))?;
    }
    let two_point = js_divergence(&[1.0, 0.0], &[0.0, 1.0]).map_err(|e| e.to_string())?;
    check((two_point - 1.0).abs() <= 1e-12, format!("jsd([1,0],[0,1]) = {two_point}"))?;
    Ok("1000 random cases per identity".into())
}

// ---- 3 ----------------------------------------------------------------------

/// Small models trained for a few epochs on a small synthetic set.
fn briefly_trained(kind: ArchitectureKind) -> (ModelParams, Vec<EncodedCaption>) {
    let data = generate_dataset(&DatasetConfig {
        n_train: 200,
        n_val: 20,
        n_test: 20,
        ..DatasetConfig::default()
    })
    .unwrap();
    let vocab = gprb_core::build_vocabulary(data.train.iter().map(|e| e.tokens.as_slice()), 1);
    let hyper = Hyperparams {
        embed: 8,
        hidden: 16,
        max_epochs: 3,
        patience: 3,
        ..Hyperparams::default()
    };
    let tr = encode_all(&data.train, &vocab);
    let (p, _) = train(kind, &tr, &encode_all(&data.val, &vocab), vocab.len(), &hyper).unwrap();
    (p, encode_all(&data.test, &vocab))
}

fn architectural_invariants() -> Outcome {
    let mut min_inject_diff = f64::INFINITY;
    let mut max_self = 0.0f64;
    for (k, kind) in ArchitectureKind::ALL.into_iter().enumerate() {
        let (params, test) = briefly_trained(kind);
        let h = params.dims.hidden;
        let mut r = rng(3 + k as u64);
        for (k, cap) in test.iter().enumerate() {
            let inputs = &cap.tokens[..cap.tokens.len() - 1];
            let other = &test[(k + 7) % test.len()].image;
            let orig = forward_replay(&params, &cap.image, inputs).map_err(|e| e.to_string())?;
            if kind == ArchitectureKind::Merge {
                let swapped = forward_replay(&params, other, inputs).map_err(|e| e.to_string())?;
                for (t, (a, b)) in orig.iter().zip(&swapped).enumerate() {
                    let bitwise = a.hidden.data().iter().zip(b.hidden.data()).all(|(x, y)| x.to_bits() == y.to_bits());
                    check(bitwise, format!("merge hidden state differs at step {t} under image swap"))?;
                    let prefix = a.multimodal.data()[..h]
                        .iter()
                        .zip(&b.multimodal.data()[..h])
                        .all(|(x, y)| x.to_bits() == y.to_bits());
                    check(prefix, format!("merge multimodal prefix differs at step {t}"))?;
                }
            } else {
                let dir = random_vec(&mut r, cap.image.len(), 1.0);
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                let moved: Vec<f64> = cap.image.data().iter().zip(&dir).map(|(x, d)| x + d / norm).collect();
                let pert = forward_replay(&params, &Tensor::vector(moved), inputs).map_err(|e| e.to_string())?;
                for (t, (a, b)) in orig.iter().zip(&pert).enumerate() {
                    let diff = a.hidden.sub(&b.hidden).norm();
                    min_inject_diff = min_inject_diff.min(diff);
                    check(diff > 1e-9, format!("{kind} hidden change {diff:e} at step {t}"))?;
                }
            }
        }
        let samples: Vec<CaptionSample> = test
            .iter()
            .map(|c| CaptionSample {
                caption_id: c.id,
                image_id: c.id,
                image: c.image.clone(),
                tokens: c.tokens.clone(),
            })
            .collect();
        let foils = test.iter().map(|c| (c.id, c.image.clone())).collect();
        for rec in omission_scoring(&params, &samples, &foils).map_err(|e| e.to_string())? {
            for d in [rec.cos_dist_multimodal, rec.cos_dist_softmax, rec.jsd_softmax, rec.cos_dist_logits] {
                max_self = max_self.max(d);
            }
        }
    }
    check(max_self <= 1e-12, format!("self-foil distance {max_self:e}"))?;
    Ok(format!(
        "merge bitwise invariant holds; min inject hidden change {min_inject_diff:.2e}; max self-foil distance {max_self:.1e}"
    ))
}

// ---- 4 ----------------------------------------------------------------------

fn foil_oracle() -> Outcome {
    let mut r = rng(44);
    let mut ties = 0;
    for trial in 0..100 {
        let mut feats: Vec<Vec<f64>> = (0..50).map(|_| random_vec(&mut r, 16, 1.0)).collect();
        let target = r.random_range(0..50usize);
        let plain = |a: &[f64], b: &[f64]| {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            1.0 - dot / (na * nb)
        };
        if trial % 3 != 0 {
            let far = (0..50)
                .filter(|&i| i != target)
                .max_by(|&a, &b| plain(&feats[target], &feats[a]).total_cmp(&plain(&feats[target], &feats[b])))
                .unwrap();
            for _ in 0..r.random_range(1..4) {
                let j = r.random_range(0..50);
                if j != target {
                    feats[j] = feats[far].clone();
                }
            }
        }
        let ids: Vec<u64> = (0..50u64).map(|i| (i * 37) % 101).collect();
        let tensors: Vec<Tensor> = feats.iter().map(|f| Tensor::vector(f.clone())).collect();
        let images: Vec<(u64, &Tensor)> = ids.iter().copied().zip(&tensors).collect();
        let mut best: Option<(f64, u64)> = None;
        let mut n_best = 0;
        for i in (0..50).filter(|&i| i != target) {
            let d = plain(&feats[target], &feats[i]);
            match best {
                Some((bd, _)) if d < bd => {}
                Some((bd, bid)) if d == bd => {
                    n_best += 1;
                    best = Some((bd, bid.min(ids[i])));
                }
                _ => {
                    n_best = 1;
                    best = Some((d, ids[i]));
                }
            }
        }
        if n_best > 1 {
            ties += 1;
        }
        let got = select_foil(ids[target], &images).map_err(|e| e.to_string())?;
        check(got == best.unwrap().1, format!("trial {trial}: selected {got}, scan found {}", best.unwrap().1))?;
    }
    check(ties > 0, "no tie cases exercised")?;
    Ok(format!("100 trials of 50 images, {ties} with ties"))
}

// ---- pipeline helpers ---------------------------------------------------------

fn run_pipeline(root: &Path, dataset: DatasetConfig, hyper: Hyperparams, svg: bool) -> Result<Vec<Duration>, String> {
    let e = |e: gprb_core::Error| e.to_string();
    let data = root.join("data");
    cmd_synth(&SynthConfig {
        out: data.clone(),
        dataset,
    })
    .map_err(e)?;
    let mut train_times = Vec::new();
    let mut models = Vec::new();
    for kind in ArchitectureKind::ALL {
        let out = root.join(kind.name());
        let mut cfg = TrainConfig::new(&data, &out, kind);
        cfg.hyper = hyper.clone();
        let started = Instant::now();
        cmd_train(&cfg, |_| {}).map_err(e)?;
        train_times.push(started.elapsed());
        cmd_generate(&GenerateConfig {
            model: out.clone(),
            data: data.clone(),
            split: "test".into(),
            max_len: 20,
            out: None,
        })
        .map_err(e)?;
        models.push(out);
    }
    cmd_analyze(&AnalyzeConfig {
        models,
        captions: vec![],
        data,
        split: "test".into(),
        foil: FoilMode::Farthest,
        out: root.join("analysis"),
        svg,
    })
    .map_err(e)?;
    Ok(train_times)
}

fn small_run(root: &Path) -> Result<(), String> {
    let _ = std::fs::remove_dir_all(root);
    run_pipeline(
        root,
        DatasetConfig {
            n_train: 300,
            n_val: 40,
            n_test: 40,
            ..DatasetConfig::default()
        },
        Hyperparams {
            embed: 16,
            hidden: 16,
            max_epochs: 3,
            patience: 3,
            ..Hyperparams::default()
        },
        true,
    )
    .map(|_| ())
}

fn scratch(name: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name)
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let head = rd.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    let rows = rd
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    Ok((head, rows))
}

// ---- 6 ----------------------------------------------------------------------

fn aggregation_correctness() -> Outcome {
    let root = scratch("aggregation");
    small_run(&root)?;
    let mut checked = 0;
    for kind in ArchitectureKind::ALL {
        let dir = root.join("analysis").join(kind.name());
        // word counts of every complete caption, from the captions file
        let lengths: HashMap<String, usize> = read_captions(&root.join(kind.name()).join("captions.jsonl"))
            .map_err(|e| e.to_string())?
            .into_iter()
            .filter(|c| c.tokens.last().map(String::as_str) == Some(END_WORD))
            .map(|c| (c.id.to_string(), c.tokens.len() - 1))
            .collect();
        // metric name -> (caption id, position, value)
        let mut values: BTreeMap<String, Vec<(String, usize, f64)>> = BTreeMap::new();
        for (file, cols) in [
            ("sensitivity.csv", vec![("grad_image", 2), ("grad_prevword", 3)]),
            (
                "omission.csv",
                vec![
                    ("cos_multimodal", 2),
                    ("cos_softmax", 3),
                    ("jsd_softmax", 4),
                    ("cos_logits", 5),
                    ("frac_neg_orig", 6),
                    ("frac_neg_foil", 7),
                ],
            ),
        ] {
            let (head, rows) = read_csv(&dir.join(file))?;
            for (name, col) in cols {
                check(head[col] == name, format!("{file} column {col} is {}", head[col]))?;
                for row in &rows {
                    let pos: usize = row[1].parse().map_err(|_| "bad position")?;
                    let v: f64 = row[col].parse().map_err(|_| "bad value")?;
                    values.entry(name.to_string()).or_default().push((row[0].clone(), pos, v));
                }
            }
        }
        let mut expected_lengths: Vec<usize> = lengths.values().copied().collect();
        expected_lengths.sort();
        expected_lengths.dedup();
        for &len in &expected_lengths {
            let path = dir.join(format!("curves_L{len}.csv"));
            let (_, rows) = read_csv(&path)?;
            let n_captions = lengths.values().filter(|&&l| l == len).count();
            for row in rows {
                let (metric, pos) = (&row[0], row[1].parse::<usize>().map_err(|_| "bad position")?);
                let (mean, std, count): (f64, f64, usize) = (
                    row[2].parse().map_err(|_| "bad mean")?,
                    row[3].parse().map_err(|_| "bad std")?,
                    row[4].parse().map_err(|_| "bad count")?,
                );
                let vals: Vec<f64> = values[metric]
                    .iter()
                    .filter(|(id, p, _)| *p == pos && lengths.get(id) == Some(&len))
                    .map(|x| x.2)
                    .collect();
                check(
                    count == vals.len() && count == n_captions,
                    format!("{kind} L{len} {metric}@{pos}: count {count}, records {}, captions {n_captions}", vals.len()),
                )?;
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                let s = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
                check(
                    (m - mean).abs() <= 1e-9 && (s - std).abs() <= 1e-9,
                    format!("{kind} L{len} {metric}@{pos}: csv ({mean}, {std}) vs recomputed ({m}, {s})"),
                )?;
                checked += 1;
            }
        }
        let present = std::fs::read_dir(&dir)
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().starts_with("curves_L"))
            .count();
        check(present == expected_lengths.len(), format!("{kind}: {present} curve files for {expected_lengths:?}"))?;
    }
    Ok(format!("{checked} curve points recomputed from record CSVs"))
}

// ---- 7 ----------------------------------------------------------------------

fn strip_seconds(csv_text: &str) -> String {
    csv_text
        .lines()
        .map(|l| l.rsplit_once(',').map(|(head, _)| head).unwrap_or(l))
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Outcome {
    let (a, b) = (scratch("determinism_a"), scratch("determinism_b"));
    small_run(&a)?;
    small_run(&b)?;
    let mut files: Vec<PathBuf> = ["train", "val", "test"]
        .iter()
        .map(|s| split_path("data", s))
        .collect();
    for kind in ArchitectureKind::ALL {
        files.push(Path::new(kind.name()).join("model.gprb"));
        files.push(Path::new(kind.name()).join("captions.jsonl"));
        let dir = a.join("analysis").join(kind.name());
        for e in std::fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let name = e.map_err(|e| e.to_string())?.file_name();
            files.push(Path::new("analysis").join(kind.name()).join(name));
        }
    }
    let mut compared = 0;
    for f in &files {
        let (x, y) = (std::fs::read(a.join(f)), std::fs::read(b.join(f)));
        let (x, y) = (x.map_err(|e| format!("{}: {e}", f.display()))?, y.map_err(|e| format!("{}: {e}", f.display()))?);
        check(x == y, format!("{} differs between runs", f.display()))?;
        compared += 1;
    }
    for kind in ArchitectureKind::ALL {
        let f = Path::new(kind.name()).join("train_log.csv");
        let x = std::fs::read_to_string(a.join(&f)).map_err(|e| e.to_string())?;
        let y = std::fs::read_to_string(b.join(&f)).map_err(|e| e.to_string())?;
        check(x.lines().next() == Some("epoch,train_loss,val_loss,seconds"), "unexpected log header")?;
        check(strip_seconds(&x) == strip_seconds(&y), format!("{} differs between runs", f.display()))?;
        compared += 1;
    }
    Ok(format!(
        "{compared} files byte-identical across two runs (training logs compared without the wall-clock column)"
    ))
}

// ---- 5 and 8 ------------------------------------------------------------------

struct Desk {
    root: PathBuf,
    elapsed: Duration,
}

fn desk_run() -> Result<Desk, String> {
    let root = scratch("desk");
    let _ = std::fs::remove_dir_all(&root);
    let started = Instant::now();
    let times = run_pipeline(&root, DatasetConfig::default(), Hyperparams::default(), true)?;
    let elapsed = started.elapsed();
    for (kind, t) in ArchitectureKind::ALL.iter().zip(times) {
        eprintln!("  trained {kind} in {:.0}s", t.as_secs_f64());
    }
    Ok(Desk { root, elapsed })
}

fn desk_patterns(desk: &Result<Desk, String>) -> Outcome {
    let desk = desk.as_ref().map_err(|e| format!("pipeline failed: {e}"))?;
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for kind in ArchitectureKind::ALL {
        let words: HashMap<String, Vec<String>> = read_captions(&desk.root.join(kind.name()).join("captions.jsonl"))
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|c| (c.id.to_string(), c.tokens))
            .collect();
        let (_, rows) = read_csv(&desk.root.join("analysis").join(kind.name()).join("sensitivity.csv"))?;
        let (mut noun, mut det) = ((0.0, 0usize), (0.0, 0usize));
        let (mut img, mut prev) = (0.0, 0.0);
        for row in &rows {
            let pos: usize = row[1].parse().map_err(|_| "bad position")?;
            let gi: f64 = row[2].parse().map_err(|_| "bad value")?;
            let gp: f64 = row[3].parse().map_err(|_| "bad value")?;
            img += gi;
            prev += gp;
            match words[&row[0]].get(pos).and_then(|w| classify(w)) {
                Some(WordClass::Noun) => noun = (noun.0 + gi, noun.1 + 1),
                Some(WordClass::Det) => det = (det.0 + gi, det.1 + 1),
                _ => {}
            }
        }
        let n = rows.len() as f64;
        let (noun_m, det_m) = (noun.0 / noun.1 as f64, det.0 / det.1 as f64);
        let (img_m, prev_m) = (img / n, prev / n);
        parts.push(format!(
            "{kind}: noun {noun_m:.2e} vs det {det_m:.2e}, prevword {prev_m:.2e} vs image {img_m:.2e} (log10 gap {:+.2})",
            (prev_m / img_m).log10()
        ));
        if noun_m.is_nan() || det_m.is_nan() || noun_m <= det_m {
            failures.push(format!("{kind}: noun image sensitivity not above det"));
        }
        if prev_m.is_nan() || img_m.is_nan() || prev_m <= img_m {
            failures.push(format!("{kind}: prevword not above image"));
        }
    }
    let secs = desk.elapsed.as_secs_f64();
    if secs >= 1800.0 {
        failures.push(format!("pipeline took {secs:.0}s, budget 1800s"));
    }
    let summary = format!("{}; pipeline {secs:.0}s", parts.join("; "));
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}. {summary}", failures.join("; ")))
    }
}

fn training_sanity(desk: &Result<Desk, String>) -> Outcome {
    let desk = desk.as_ref().map_err(|e| format!("pipeline failed: {e}"))?;
    let data = desk.root.join("data");
    let train_ex = read_dataset(split_path(&data, "train")).map_err(|e| e.to_string())?;
    let val_ex = read_dataset(split_path(&data, "val")).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for kind in ArchitectureKind::ALL {
        let (trained, vocab) = load_model(&desk.root.join(kind.name())).map_err(|e| e.to_string())?;
        let val = encode_all(&val_ex, &vocab);
        let fresh = ModelParams::init(kind, trained.dims, Hyperparams::default().seed, 0.1).map_err(|e| e.to_string())?;
        let before = perplexity(&fresh, &val).map_err(|e| e.to_string())?;
        let after = perplexity(&trained, &val).map_err(|e| e.to_string())?;
        check(before >= 5.0 * after, format!("{kind}: perplexity {before:.2} -> {after:.3}"))?;

        let one = vec![EncodedCaption::from_example(&train_ex[0], &vocab)];
        let hyper = Hyperparams {
            learning_rate: 1e-2,
            max_epochs: 300,
            patience: 300,
            ..Hyperparams::default()
        };
        let (p, _) = train_from(fresh, &one, &one, &hyper, |_| {}).map_err(|e| e.to_string())?;
        let (loss, _) = caption_nll(&p, &one[0]).map_err(|e| e.to_string())?;
        check(loss < 0.01, format!("{kind}: single-example loss {loss:.4}"))?;
        parts.push(format!("{kind}: ppl {before:.1} -> {after:.3}, overfit loss {loss:.1e}"));
    }
    Ok(parts.join("; "))
}

// ---- driver -------------------------------------------------------------------

fn run(n: u32, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let secs = started.elapsed().as_secs_f64();
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("criterion {n} {tag}: {name} ({secs:.1}s) {detail}");
    outcome.is_ok()
}

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |n: u32| selected.is_empty() || selected.contains(&n);
    let mut ok = true;
    if want(1) {
        ok &= run(1, "gradient oracle", gradient_oracle);
    }
    if want(2) {
        ok &= run(2, "metric identities", metric_identities);
    }
    if want(3) {
        ok &= run(3, "architectural invariants", architectural_invariants);
    }
    if want(4) {
        ok &= run(4, "foil selection oracle", foil_oracle);
    }
    if want(6) {
        ok &= run(6, "aggregation correctness", aggregation_correctness);
    }
    if want(7) {
        ok &= run(7, "determinism", determinism);
    }
    if want(5) || want(8) {
        let desk = desk_run();
        if want(5) {
            ok &= run(5, "desk-scale sensitivity patterns", || desk_patterns(&desk));
        }
        if want(8) {
            ok &= run(8, "training sanity", || training_sanity(&desk));
        }
    }
    if !ok {
        std::process::exit(1);
    }
}
