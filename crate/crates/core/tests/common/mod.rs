#![allow(dead_code)]

use gprb_core::captioner::{ArchitectureKind, ModelDims, ModelParams, ReplayBuilder, START};
use gprb_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// `|a - b| <= max(rel * max(|a|, |b|), abs_floor)`
pub fn close(a: f64, b: f64, rel: f64, abs_floor: f64) -> bool {
    (a - b).abs() <= (rel * a.abs().max(b.abs())).max(abs_floor)
}

pub fn micro_dims() -> ModelDims {
    ModelDims {
        vocab: 12,
        embed: 6,
        hidden: 8,
        image: 10,
    }
}

/// Random parameters with non-zero biases, so every path is exercised.
pub fn random_params(kind: ArchitectureKind, dims: ModelDims, seed: u64) -> ModelParams {
    let mut p = ModelParams::init(kind, dims, seed, 0.6).unwrap();
    let mut r = rng(seed ^ 0xB1A5);
    for t in p.tensors_mut() {
        if t.is_vector() {
            for v in t.data_mut() {
                *v = r.random_range(-0.3..0.3);
            }
        }
    }
    p
}

/// START, `len` random non-reserved words, END.
pub fn random_caption(r: &mut ChaCha8Rng, vocab: usize, len: usize) -> Vec<usize> {
    let mut tokens = vec![START];
    tokens.extend((0..len).map(|_| r.random_range(3..vocab)));
    tokens.push(gprb_core::captioner::END);
    tokens
}

/// p(tokens[t+1]) at step t, with the embedding at step t replaced by `word`.
pub fn prob_with_word(params: &ModelParams, image: &Tensor, tokens: &[usize], t: usize, word: &Tensor) -> f64 {
    let mut b = ReplayBuilder::new(params, image).unwrap();
    for (i, &tok) in tokens[..=t].iter().enumerate() {
        if i == t {
            b.push_with_word(tok, word.clone()).unwrap();
        } else {
            b.push(tok).unwrap();
        }
    }
    let rg = b.finish();
    rg.prob(t, tokens[t + 1])
}

pub fn prob_with_image(params: &ModelParams, image: &Tensor, tokens: &[usize], t: usize) -> f64 {
    let traces = gprb_core::forward_replay(params, image, &tokens[..=t]).unwrap();
    traces[t].softmax.data()[tokens[t + 1]]
}
