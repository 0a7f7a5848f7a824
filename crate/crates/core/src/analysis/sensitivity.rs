use rayon::prelude::*;

use super::{CaptionSample, SensitivityRecord};
use crate::autodiff::backward;
use crate::captioner::{build_replay, ModelParams, END};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Gradient of one next-word probability.
#[derive(Clone, Debug)]
pub struct NextWordGradient {
    /// Probability of `tokens[t + 1]` at step `t`.
    pub prob: f64,
    /// With respect to the raw image feature vector.
    pub image: Tensor,
    /// With respect to the embedding of the input token at step `t`.
    pub prev_word: Tensor,
}

fn mean_abs(t: &Tensor) -> f64 {
    t.data().iter().map(|v| v.abs()).sum::<f64>() / t.len() as f64
}

/// Gradients of `p(tokens[t+1])` for every step `t` of the replay of `tokens`.
pub fn next_word_gradients(params: &ModelParams, image: &Tensor, tokens: &[usize]) -> Result<Vec<NextWordGradient>> {
    let n = tokens.len();
    if n < 2 {
        return Err(Error::Config("need at least one prediction target".into()));
    }
    let mut replay = build_replay(params, image, &tokens[..n - 1])?;
    let targets: Vec<_> = replay
        .steps
        .iter()
        .zip(&tokens[1..])
        .map(|(s, &tok)| replay.graph.pick(s.softmax, tok))
        .collect::<Result<_>>()?;
    let m = params.dims.embed;
    targets
        .iter()
        .zip(&replay.steps)
        .map(|(&target, step)| {
            let grads = backward(&replay.graph, target)?;
            Ok(NextWordGradient {
                prob: replay.graph.value(target).data()[0],
                image: grads.get_or_zeros(replay.image, image.shape()),
                prev_word: grads.get_or_zeros(step.word, &[m]),
            })
        })
        .collect()
}

/// Mean absolute next-word-probability gradients per caption position.
///
/// Captions are teacher-forced through the model that generated them; each
/// must end with END. Records come back ordered by input order, then position.
pub fn sensitivity_analysis(params: &ModelParams, samples: &[CaptionSample]) -> Result<Vec<SensitivityRecord>> {
    let per_caption: Vec<Vec<SensitivityRecord>> = samples
        .par_iter()
        .map(|s| {
            if s.tokens.last() != Some(&END) || s.tokens.len() < 2 {
                return Err(Error::MissingEnd(s.caption_id));
            }
            let len = s.caption_len();
            let grads = next_word_gradients(params, &s.image, &s.tokens)?;
            Ok(grads
                .iter()
                .enumerate()
                .map(|(position, g)| SensitivityRecord {
                    caption_id: s.caption_id,
                    caption_len: len,
                    position,
                    mean_abs_grad_image: mean_abs(&g.image),
                    mean_abs_grad_prevword: mean_abs(&g.prev_word),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_caption.into_iter().flatten().collect())
}
