//! Fixtures shared by the criterion benchmarks.

use gprb_core::captioner::{ArchitectureKind, ModelDims, ModelParams, END, START};
use gprb_core::trainer::EncodedCaption;
use gprb_core::Tensor;

/// Desk-scale model shape: D = m = h = 64 over a 30-word vocabulary.
pub fn desk_dims() -> ModelDims {
    ModelDims {
        vocab: 30,
        embed: 64,
        hidden: 64,
        image: 64,
    }
}

pub fn model(kind: ArchitectureKind) -> ModelParams {
    ModelParams::init(kind, desk_dims(), 1, 0.1).expect("valid dims")
}

/// A deterministic 8-word caption (10 tokens with START and END).
pub fn caption(id: u64) -> EncodedCaption {
    let image = (0..64).map(|i| ((i as f64 + id as f64) * 0.37).sin()).collect();
    let mut tokens = vec![START];
    tokens.extend((0..8).map(|i| 3 + ((id as usize + i * 7) % 27)));
    tokens.push(END);
    EncodedCaption {
        id,
        image: Tensor::vector(image),
        tokens,
    }
}
