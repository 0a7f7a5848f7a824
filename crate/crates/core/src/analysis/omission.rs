use std::collections::HashMap;

use rayon::prelude::*;

use super::metrics::{cosine_distance, fraction_negative, js_divergence};
use super::{CaptionSample, OmissionRecord};
use crate::captioner::{forward_replay, ModelParams, END};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Id of the image whose features are farthest in cosine distance from
/// `target`'s. Ties go to the lowest id; degenerate candidates are skipped.
pub fn select_foil(target: u64, images: &[(u64, &Tensor)]) -> Result<u64> {
    if images.len() < 2 {
        return Err(Error::NoFoil("need at least two images".into()));
    }
    let target_features = images
        .iter()
        .find(|(id, _)| *id == target)
        .map(|(_, f)| *f)
        .ok_or_else(|| Error::NoFoil(format!("image {target} not in candidate set")))?;
    let mut best: Option<(u64, f64)> = None;
    for &(id, features) in images {
        if id == target {
            continue;
        }
        let d = match cosine_distance(target_features.data(), features.data()) {
            Ok(d) => d,
            Err(Error::DegenerateVector(_)) if target_features.norm() >= 1e-12 => continue,
            Err(e) => return Err(e),
        };
        best = match best {
            Some((bid, bd)) if bd > d || (bd == d && bid < id) => Some((bid, bd)),
            _ => Some((id, d)),
        };
    }
    best.map(|(id, _)| id)
        .ok_or_else(|| Error::NoFoil(format!("every candidate for image {target} is degenerate")))
}

/// Farthest-cosine foil for every image in the set.
pub fn select_foils(images: &[(u64, &Tensor)]) -> Result<HashMap<u64, u64>> {
    images
        .par_iter()
        .map(|&(id, _)| Ok((id, select_foil(id, images)?)))
        .collect()
}

/// Replays each caption with its own image and with `foils[image_id]`, and
/// compares the two runs step by step.
pub fn omission_scoring(
    params: &ModelParams,
    samples: &[CaptionSample],
    foils: &HashMap<u64, Tensor>,
) -> Result<Vec<OmissionRecord>> {
    let per_caption: Vec<Vec<OmissionRecord>> = samples
        .par_iter()
        .map(|s| {
            if s.tokens.last() != Some(&END) || s.tokens.len() < 2 {
                return Err(Error::MissingEnd(s.caption_id));
            }
            let foil = foils
                .get(&s.image_id)
                .ok_or_else(|| Error::NoFoil(format!("no foil for image {}", s.image_id)))?;
            let inputs = &s.tokens[..s.tokens.len() - 1];
            let orig = forward_replay(params, &s.image, inputs)?;
            let alt = forward_replay(params, foil, inputs)?;
            orig.iter()
                .zip(&alt)
                .enumerate()
                .map(|(position, (a, b))| {
                    Ok(OmissionRecord {
                        caption_id: s.caption_id,
                        caption_len: s.caption_len(),
                        position,
                        cos_dist_multimodal: cosine_distance(a.multimodal.data(), b.multimodal.data())?,
                        cos_dist_softmax: cosine_distance(a.softmax.data(), b.softmax.data())?,
                        jsd_softmax: js_divergence(a.softmax.data(), b.softmax.data())?,
                        cos_dist_logits: cosine_distance(a.logits.data(), b.logits.data())?,
                        frac_neg_logits_orig: fraction_negative(a.logits.data()),
                        frac_neg_logits_foil: fraction_negative(b.logits.data()),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_caption.into_iter().flatten().collect())
}
