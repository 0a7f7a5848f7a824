//! Measurements of how much visual information a caption generator uses per
//! generated word.
//!
//! * sensitivity: mean |∂p(next word)/∂input| with respect to the raw image
//!   vector and to the previous word's embedding;
//! * omission: distances between replays with the true image and with a foil
//!   (the farthest test image by cosine distance), for the multimodal vector,
//!   the logits and the softmax output, plus the share of negative logits;
//! * aggregation of either per position over captions of one length, and a
//!   word-class-by-position table.
//!
//! Positions run `0..=L` for a caption of `L` words; position `L` predicts END.

mod aggregate;
mod metrics;
mod omission;
mod sensitivity;

use serde::{Deserialize, Serialize};

pub use aggregate::{aggregate, word_class_table, AggregateCurve, CurvePoint, WordClassTable};
pub use metrics::{cosine_distance, fraction_negative, js_divergence};
pub use omission::{omission_scoring, select_foil, select_foils};
pub use sensitivity::{next_word_gradients, sensitivity_analysis, NextWordGradient};

use crate::tensor::Tensor;

/// A generated caption paired with the image it was generated for.
#[derive(Clone, Debug, PartialEq)]
pub struct CaptionSample {
    pub caption_id: u64,
    pub image_id: u64,
    pub image: Tensor,
    /// START, the generated words, END.
    pub tokens: Vec<usize>,
}

impl CaptionSample {
    /// Number of words, START and END excluded.
    pub fn caption_len(&self) -> usize {
        self.tokens.len().saturating_sub(2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRecord {
    pub caption_id: u64,
    pub caption_len: usize,
    pub position: usize,
    pub mean_abs_grad_image: f64,
    pub mean_abs_grad_prevword: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmissionRecord {
    pub caption_id: u64,
    pub caption_len: usize,
    pub position: usize,
    pub cos_dist_multimodal: f64,
    pub cos_dist_softmax: f64,
    pub jsd_softmax: f64,
    pub cos_dist_logits: f64,
    pub frac_neg_logits_orig: f64,
    pub frac_neg_logits_foil: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    GradImage,
    GradPrevWord,
    CosMultimodal,
    CosSoftmax,
    JsdSoftmax,
    CosLogits,
    FracNegOrig,
    FracNegFoil,
}

impl Metric {
    pub const SENSITIVITY: [Metric; 2] = [Metric::GradImage, Metric::GradPrevWord];
    pub const OMISSION: [Metric; 6] = [
        Metric::CosMultimodal,
        Metric::CosSoftmax,
        Metric::JsdSoftmax,
        Metric::CosLogits,
        Metric::FracNegOrig,
        Metric::FracNegFoil,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::GradImage => "grad_image",
            Metric::GradPrevWord => "grad_prevword",
            Metric::CosMultimodal => "cos_multimodal",
            Metric::CosSoftmax => "cos_softmax",
            Metric::JsdSoftmax => "jsd_softmax",
            Metric::CosLogits => "cos_logits",
            Metric::FracNegOrig => "frac_neg_orig",
            Metric::FracNegFoil => "frac_neg_foil",
        }
    }

    pub fn all() -> impl Iterator<Item = Metric> {
        Self::SENSITIVITY.into_iter().chain(Self::OMISSION)
    }
}

/// Common view over per-position records for aggregation.
pub trait PositionRecord {
    fn caption_id(&self) -> u64;
    fn caption_len(&self) -> usize;
    fn position(&self) -> usize;
    /// `None` when this record type does not carry `metric`.
    fn metric(&self, metric: Metric) -> Option<f64>;
}

impl PositionRecord for SensitivityRecord {
    fn caption_id(&self) -> u64 {
        self.caption_id
    }
    fn caption_len(&self) -> usize {
        self.caption_len
    }
    fn position(&self) -> usize {
        self.position
    }
    fn metric(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::GradImage => Some(self.mean_abs_grad_image),
            Metric::GradPrevWord => Some(self.mean_abs_grad_prevword),
            _ => None,
        }
    }
}

impl PositionRecord for OmissionRecord {
    fn caption_id(&self) -> u64 {
        self.caption_id
    }
    fn caption_len(&self) -> usize {
        self.caption_len
    }
    fn position(&self) -> usize {
        self.position
    }
    fn metric(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::CosMultimodal => Some(self.cos_dist_multimodal),
            Metric::CosSoftmax => Some(self.cos_dist_softmax),
            Metric::JsdSoftmax => Some(self.jsd_softmax),
            Metric::CosLogits => Some(self.cos_dist_logits),
            Metric::FracNegOrig => Some(self.frac_neg_logits_orig),
            Metric::FracNegFoil => Some(self.frac_neg_logits_foil),
            _ => None,
        }
    }
}
