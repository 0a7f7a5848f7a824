//! Next-token cross-entropy training with per-example Adam updates and
//! early stopping on validation loss.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{backward, ExprGraph, NodeId};
use crate::captioner::{build_replay, ArchitectureKind, ModelDims, ModelParams, ReplayGraph};
use crate::error::{Error, Result};
use crate::synthworld::{GroundedExample, Vocabulary};
use crate::tensor::Tensor;

/// A caption already mapped to token ids, START..END.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedCaption {
    pub id: u64,
    pub image: Tensor,
    pub tokens: Vec<usize>,
}

impl EncodedCaption {
    pub fn from_example(ex: &GroundedExample, vocab: &Vocabulary) -> Self {
        Self {
            id: ex.id,
            image: ex.features.clone(),
            tokens: vocab.encode(&ex.tokens),
        }
    }
}

pub fn encode_all(examples: &[GroundedExample], vocab: &Vocabulary) -> Vec<EncodedCaption> {
    examples.iter().map(|e| EncodedCaption::from_example(e, vocab)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Word embedding width `m`.
    pub embed: usize,
    /// GRU hidden width `h`.
    pub hidden: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub clip_norm: f64,
    /// Half-width of the uniform weight initialisation.
    pub init_scale: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            embed: 64,
            hidden: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 40,
            patience: 5,
            seed: 1,
            clip_norm: 5.0,
            init_scale: 0.1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("embed", self.embed as f64),
            ("hidden", self.hidden as f64),
            ("max_epochs", self.max_epochs as f64),
            ("patience", self.patience as f64),
            ("clip_norm", self.clip_norm),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in positive {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.learning_rate.is_nan() || self.learning_rate < 0.0 || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("invalid optimizer settings".into()));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config("patience exceeds max_epochs".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned (0 = initial parameters).
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainingLog {
    /// CSV: `epoch,train_loss,val_loss,seconds`, one row per epoch.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        for e in &self.epochs {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loss graph for one caption: `-Σ_t log p(tokens[t+1] | tokens[..=t], image)`.
pub struct LossGraph {
    pub replay: ReplayGraph,
    pub loss: NodeId,
}

pub fn caption_loss_graph(params: &ModelParams, caption: &EncodedCaption) -> Result<LossGraph> {
    let n = caption.tokens.len();
    if n < 2 {
        return Err(Error::Config(format!("caption {} has no targets", caption.id)));
    }
    let mut replay = build_replay(params, &caption.image, &caption.tokens[..n - 1])?;
    let g: &mut ExprGraph = &mut replay.graph;
    let mut log_probs = Vec::with_capacity(n - 1);
    for (step, &target) in replay.steps.iter().zip(&caption.tokens[1..]) {
        let p = g.pick(step.softmax, target)?;
        log_probs.push(g.log(p)?);
    }
    let all = g.concat(&log_probs)?;
    let total = g.sum(all)?;
    let loss = g.neg(total)?;
    Ok(LossGraph { replay, loss })
}

/// Summed negative log-likelihood of one caption and its number of targets.
pub fn caption_nll(params: &ModelParams, caption: &EncodedCaption) -> Result<(f64, usize)> {
    let lg = caption_loss_graph(params, caption)?;
    Ok((lg.replay.graph.value(lg.loss).data()[0], caption.tokens.len() - 1))
}

fn mean_loss(params: &ModelParams, set: &[EncodedCaption]) -> Result<f64> {
    let losses: Vec<f64> = set
        .par_iter()
        .map(|c| caption_nll(params, c).map(|(l, _)| l))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / set.len() as f64)
}

/// `exp` of the mean per-token negative log-probability, END included.
pub fn perplexity(params: &ModelParams, set: &[EncodedCaption]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Empty("perplexity example set"));
    }
    let parts: Vec<(f64, usize)> = set.par_iter().map(|c| caption_nll(params, c)).collect::<Result<_>>()?;
    let (nll, count) = parts
        .iter()
        .fold((0.0, 0usize), |(a, n), (l, k)| (a + l, n + k));
    Ok((nll / count as f64).exp())
}

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .map(|g| g.data().iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= k;
            }
        }
    }
    norm
}

/// Adam optimizer state over the 14 parameter tensors.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &ModelParams, hyper: &Hyperparams) -> Self {
        let zeros: Vec<Tensor> = params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        Self {
            lr: hyper.learning_rate,
            beta1: hyper.beta1,
            beta2: hyper.beta2,
            epsilon: hyper.epsilon,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn update(&mut self, params: &mut ModelParams, grads: &[Tensor]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for (((p, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

/// Loss and per-tensor gradients for one caption.
pub fn loss_and_gradients(params: &ModelParams, caption: &EncodedCaption) -> Result<(f64, Vec<Tensor>)> {
    let lg = caption_loss_graph(params, caption)?;
    let g = &lg.replay.graph;
    let loss = g.value(lg.loss).data()[0];
    let mut grads = backward(g, lg.loss)?;
    let per_tensor = lg
        .replay
        .params
        .all()
        .iter()
        .zip(params.tensors())
        .map(|(&id, t)| grads.take(id).unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    Ok((loss, per_tensor))
}

/// Trains a fresh model of `kind`.
pub fn train(
    kind: ArchitectureKind,
    train_set: &[EncodedCaption],
    val_set: &[EncodedCaption],
    vocab_size: usize,
    hyper: &Hyperparams,
) -> Result<(ModelParams, TrainingLog)> {
    let image = train_set.first().ok_or(Error::Empty("training set"))?.image.len();
    let dims = ModelDims {
        vocab: vocab_size,
        embed: hyper.embed,
        hidden: hyper.hidden,
        image,
    };
    hyper.validate()?;
    let params = ModelParams::init(kind, dims, hyper.seed, hyper.init_scale)?;
    train_from(params, train_set, val_set, hyper, |_| {})
}

/// Continues training `params`, calling `on_epoch` after each epoch. Returns
/// the parameters with the lowest validation loss seen.
pub fn train_from(
    mut params: ModelParams,
    train_set: &[EncodedCaption],
    val_set: &[EncodedCaption],
    hyper: &Hyperparams,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ModelParams, TrainingLog)> {
    hyper.validate()?;
    params.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if val_set.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let mut adam = Adam::new(&params, hyper);
    let mut best = params.clone();
    let mut best_val = mean_loss(&params, val_set)?;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=hyper.max_epochs {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9));
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let caption = &train_set[i];
            let (loss, mut grads) = loss_and_gradients(&params, caption)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    example: caption.id,
                });
            }
            total += loss;
            clip_global_norm(&mut grads, hyper.clip_norm);
            adam.update(&mut params, &grads);
        }
        let val_loss = mean_loss(&params, val_set)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                example: val_set[0].id,
            });
        }
        let record = EpochRecord {
            epoch,
            train_loss: total / train_set.len() as f64,
            val_loss,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        epochs.push(record);
        if val_loss < best_val {
            best_val = val_loss;
            best = params.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= hyper.patience {
                break;
            }
        }
    }
    Ok((
        best,
        TrainingLog {
            epochs,
            best_epoch,
            best_val_loss: best_val,
        },
    ))
}
