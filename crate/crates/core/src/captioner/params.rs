use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ArchitectureKind;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Vocabulary size `V`, reserved tokens included.
    pub vocab: usize,
    /// Word embedding width `m`.
    pub embed: usize,
    /// GRU hidden width `h`.
    pub hidden: usize,
    /// Image feature width `D`.
    pub image: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.vocab < 3 || self.embed == 0 || self.hidden == 0 || self.image == 0 {
            return Err(Error::Config(format!(
                "model dimensions must be positive with room for reserved tokens: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Every trainable tensor of one caption generator.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub kind: ArchitectureKind,
    pub dims: ModelDims,
    pub embedding: Tensor,
    pub image_w: Tensor,
    pub image_b: Tensor,
    pub update_w: Tensor,
    pub update_u: Tensor,
    pub update_b: Tensor,
    pub reset_w: Tensor,
    pub reset_u: Tensor,
    pub reset_b: Tensor,
    pub cand_w: Tensor,
    pub cand_u: Tensor,
    pub cand_b: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

pub(crate) const TENSOR_NAMES: [&str; 14] = [
    "embedding", "image_w", "image_b", "update_w", "update_u", "update_b", "reset_w", "reset_u",
    "reset_b", "cand_w", "cand_u", "cand_b", "out_w", "out_b",
];

impl ModelParams {
    /// Shapes of every tensor, in checkpoint order.
    pub fn shapes(kind: ArchitectureKind, dims: &ModelDims) -> [Vec<usize>; 14] {
        let ModelDims {
            vocab: v,
            embed: m,
            hidden: h,
            image: d,
        } = *dims;
        let p = kind.projection_width(dims);
        let x = kind.gru_input_width(dims);
        let q = kind.multimodal_width(dims);
        [
            vec![v, m],
            vec![p, d],
            vec![p],
            vec![h, x],
            vec![h, h],
            vec![h],
            vec![h, x],
            vec![h, h],
            vec![h],
            vec![h, x],
            vec![h, h],
            vec![h],
            vec![v, q],
            vec![v],
        ]
    }

    pub fn zeros(kind: ArchitectureKind, dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        let tensors = Self::shapes(kind, &dims).map(|s| Tensor::zeros(&s));
        Ok(Self::from_tensors(kind, dims, tensors.into()))
    }

    /// Weights uniform in `[-scale, scale]`, biases zero.
    pub fn init(kind: ArchitectureKind, dims: ModelDims, seed: u64, scale: f64) -> Result<Self> {
        let mut params = Self::zeros(kind, dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in params.tensors_mut() {
            if t.is_matrix() {
                for v in t.data_mut() {
                    *v = rng.random_range(-scale..=scale);
                }
            }
        }
        Ok(params)
    }

    pub(crate) fn from_tensors(kind: ArchitectureKind, dims: ModelDims, tensors: Vec<Tensor>) -> Self {
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("14 tensors");
        Self {
            kind,
            dims,
            embedding: next(),
            image_w: next(),
            image_b: next(),
            update_w: next(),
            update_u: next(),
            update_b: next(),
            reset_w: next(),
            reset_u: next(),
            reset_b: next(),
            cand_w: next(),
            cand_u: next(),
            cand_b: next(),
            out_w: next(),
            out_b: next(),
        }
    }

    pub fn tensors(&self) -> [&Tensor; 14] {
        [
            &self.embedding,
            &self.image_w,
            &self.image_b,
            &self.update_w,
            &self.update_u,
            &self.update_b,
            &self.reset_w,
            &self.reset_u,
            &self.reset_b,
            &self.cand_w,
            &self.cand_u,
            &self.cand_b,
            &self.out_w,
            &self.out_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 14] {
        [
            &mut self.embedding,
            &mut self.image_w,
            &mut self.image_b,
            &mut self.update_w,
            &mut self.update_u,
            &mut self.update_b,
            &mut self.reset_w,
            &mut self.reset_u,
            &mut self.reset_b,
            &mut self.cand_w,
            &mut self.cand_u,
            &mut self.cand_b,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Checks shapes against `kind`/`dims` and that every value is finite.
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        let shapes = Self::shapes(self.kind, &self.dims);
        for ((t, shape), name) in self.tensors().iter().zip(&shapes).zip(TENSOR_NAMES) {
            if t.shape() != shape.as_slice() {
                return Err(Error::Config(format!(
                    "{name} has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
            if !t.is_finite() {
                return Err(Error::Config(format!("{name} contains non-finite values")));
            }
        }
        Ok(())
    }
}
