use super::{ArchitectureKind, ModelParams, StepTrace, START};
use crate::autodiff::{ExprGraph, NodeId};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Leaf nodes holding a copy of every parameter tensor.
#[derive(Clone, Copy, Debug)]
pub struct ParamNodes {
    pub embedding: NodeId,
    pub image_w: NodeId,
    pub image_b: NodeId,
    pub update_w: NodeId,
    pub update_u: NodeId,
    pub update_b: NodeId,
    pub reset_w: NodeId,
    pub reset_u: NodeId,
    pub reset_b: NodeId,
    pub cand_w: NodeId,
    pub cand_u: NodeId,
    pub cand_b: NodeId,
    pub out_w: NodeId,
    pub out_b: NodeId,
}

impl ParamNodes {
    pub fn insert(graph: &mut ExprGraph, params: &ModelParams) -> Self {
        let mut leaf = |t: &Tensor| graph.leaf(t.clone());
        Self {
            embedding: leaf(&params.embedding),
            image_w: leaf(&params.image_w),
            image_b: leaf(&params.image_b),
            update_w: leaf(&params.update_w),
            update_u: leaf(&params.update_u),
            update_b: leaf(&params.update_b),
            reset_w: leaf(&params.reset_w),
            reset_u: leaf(&params.reset_u),
            reset_b: leaf(&params.reset_b),
            cand_w: leaf(&params.cand_w),
            cand_u: leaf(&params.cand_u),
            cand_b: leaf(&params.cand_b),
            out_w: leaf(&params.out_w),
            out_b: leaf(&params.out_b),
        }
    }

    /// Same order as [`ModelParams::tensors`].
    pub fn all(&self) -> [NodeId; 14] {
        [
            self.embedding,
            self.image_w,
            self.image_b,
            self.update_w,
            self.update_u,
            self.update_b,
            self.reset_w,
            self.reset_u,
            self.reset_b,
            self.cand_w,
            self.cand_u,
            self.cand_b,
            self.out_w,
            self.out_b,
        ]
    }
}

/// Graph nodes of one prediction step.
#[derive(Clone, Copy, Debug)]
pub struct StepNodes {
    pub input_token: usize,
    /// Embedding of the input token (or the leaf that replaced it).
    pub word: NodeId,
    pub hidden: NodeId,
    pub multimodal: NodeId,
    pub logits: NodeId,
    pub softmax: NodeId,
}

fn affine(g: &mut ExprGraph, w: NodeId, x: NodeId, b: NodeId) -> Result<NodeId> {
    let wx = g.matvec(w, x)?;
    g.add(wx, b)
}

/// z = σ(Wz x + Uz h + bz), r = σ(Wr x + Ur h + br),
/// c = tanh(Wc x + Uc (r ⊙ h) + bc), h' = (1 − z) ⊙ h + z ⊙ c
fn gru_cell(g: &mut ExprGraph, p: &ParamNodes, ones: NodeId, x: NodeId, h: NodeId) -> Result<NodeId> {
    let gate = |g: &mut ExprGraph, w, u, b, hin| -> Result<NodeId> {
        let wx = g.matvec(w, x)?;
        let uh = g.matvec(u, hin)?;
        let s = g.add(wx, uh)?;
        g.add(s, b)
    };
    let z_pre = gate(g, p.update_w, p.update_u, p.update_b, h)?;
    let z = g.sigmoid(z_pre)?;
    let r_pre = gate(g, p.reset_w, p.reset_u, p.reset_b, h)?;
    let r = g.sigmoid(r_pre)?;
    let rh = g.mul(r, h)?;
    let c_pre = gate(g, p.cand_w, p.cand_u, p.cand_b, rh)?;
    let c = g.tanh(c_pre)?;
    let neg_z = g.neg(z)?;
    let keep = g.add(ones, neg_z)?;
    let kept = g.mul(keep, h)?;
    let fresh = g.mul(z, c)?;
    g.add(kept, fresh)
}

/// One GRU update outside of any replay.
pub fn gru_step(params: &ModelParams, x: &Tensor, h_prev: &Tensor) -> Result<Tensor> {
    let width = params.kind.gru_input_width(&params.dims);
    let h = params.dims.hidden;
    if !x.is_vector() || x.len() != width {
        return Err(Error::Shape {
            op: "gru_step",
            left: x.shape().to_vec(),
            right: vec![width],
        });
    }
    if !h_prev.is_vector() || h_prev.len() != h {
        return Err(Error::Shape {
            op: "gru_step",
            left: h_prev.shape().to_vec(),
            right: vec![h],
        });
    }
    let mut g = ExprGraph::new();
    let p = ParamNodes::insert(&mut g, params);
    let ones = g.leaf(Tensor::filled(&[h], 1.0));
    let x = g.leaf(x.clone());
    let hp = g.leaf(h_prev.clone());
    let out = gru_cell(&mut g, &p, ones, x, hp)?;
    Ok(g.value(out).clone())
}

/// Incrementally extends a replay graph one input token at a time.
///
/// The image is conditioned in [`ReplayBuilder::new`]; each pushed token adds
/// one prediction step.
pub struct ReplayBuilder<'a> {
    params: &'a ModelParams,
    graph: ExprGraph,
    nodes: ParamNodes,
    image: NodeId,
    projected: NodeId,
    ones: NodeId,
    hidden: NodeId,
    steps: Vec<StepNodes>,
}

impl<'a> ReplayBuilder<'a> {
    pub fn new(params: &'a ModelParams, image: &Tensor) -> Result<Self> {
        let dims = &params.dims;
        if !image.is_vector() || image.len() != dims.image {
            return Err(Error::ImageDim {
                expected: dims.image,
                actual: image.len(),
            });
        }
        let mut graph = ExprGraph::new();
        let nodes = ParamNodes::insert(&mut graph, params);
        let ones = graph.leaf(Tensor::filled(&[dims.hidden], 1.0));
        let image = graph.leaf(image.clone());
        let pre = affine(&mut graph, nodes.image_w, image, nodes.image_b)?;
        let projected = graph.tanh(pre)?;
        let zero = graph.leaf(Tensor::zeros(&[dims.hidden]));
        let hidden = match params.kind {
            ArchitectureKind::InitInject => projected,
            ArchitectureKind::PreInject => gru_cell(&mut graph, &nodes, ones, projected, zero)?,
            ArchitectureKind::ParInject | ArchitectureKind::Merge => zero,
        };
        Ok(Self {
            params,
            graph,
            nodes,
            image,
            projected,
            ones,
            hidden,
            steps: Vec::new(),
        })
    }

    pub fn graph(&self) -> &ExprGraph {
        &self.graph
    }

    pub fn steps(&self) -> &[StepNodes] {
        &self.steps
    }

    pub fn push(&mut self, token: usize) -> Result<StepNodes> {
        let vocab = self.params.dims.vocab;
        if token >= vocab {
            return Err(Error::UnknownToken { token, vocab });
        }
        let word = self.graph.embedding_row(self.nodes.embedding, token)?;
        self.push_word(token, word)
    }

    /// Pushes `token` but feeds `word` in place of its embedding row.
    pub fn push_with_word(&mut self, token: usize, word: Tensor) -> Result<StepNodes> {
        let m = self.params.dims.embed;
        if !word.is_vector() || word.len() != m {
            return Err(Error::Shape {
                op: "push_with_word",
                left: word.shape().to_vec(),
                right: vec![m],
            });
        }
        let word = self.graph.leaf(word);
        self.push_word(token, word)
    }

    fn push_word(&mut self, token: usize, word: NodeId) -> Result<StepNodes> {
        let g = &mut self.graph;
        let p = &self.nodes;
        let input = match self.params.kind {
            ArchitectureKind::ParInject => g.concat(&[word, self.projected])?,
            _ => word,
        };
        let hidden = gru_cell(g, p, self.ones, input, self.hidden)?;
        let multimodal = match self.params.kind {
            ArchitectureKind::Merge => g.concat(&[hidden, self.projected])?,
            _ => hidden,
        };
        let logits = affine(g, p.out_w, multimodal, p.out_b)?;
        let softmax = g.softmax(logits)?;
        self.hidden = hidden;
        let step = StepNodes {
            input_token: token,
            word,
            hidden,
            multimodal,
            logits,
            softmax,
        };
        self.steps.push(step);
        Ok(step)
    }

    pub fn finish(self) -> ReplayGraph {
        ReplayGraph {
            graph: self.graph,
            params: self.nodes,
            image: self.image,
            projected: self.projected,
            steps: self.steps,
        }
    }
}

/// A finished teacher-forced replay.
pub struct ReplayGraph {
    pub graph: ExprGraph,
    pub params: ParamNodes,
    /// The raw image feature leaf.
    pub image: NodeId,
    pub projected: NodeId,
    pub steps: Vec<StepNodes>,
}

impl ReplayGraph {
    pub fn traces(&self) -> Vec<StepTrace> {
        self.steps
            .iter()
            .map(|s| StepTrace {
                input_token: s.input_token,
                hidden: self.graph.value(s.hidden).clone(),
                multimodal: self.graph.value(s.multimodal).clone(),
                logits: self.graph.value(s.logits).clone(),
                softmax: self.graph.value(s.softmax).clone(),
            })
            .collect()
    }

    /// Probability assigned to `token` at step `t`.
    pub fn prob(&self, t: usize, token: usize) -> f64 {
        self.graph.value(self.steps[t].softmax).data()[token]
    }
}

/// Builds the replay graph of `tokens`, which must start with START.
pub fn build_replay(params: &ModelParams, image: &Tensor, tokens: &[usize]) -> Result<ReplayGraph> {
    if tokens.first() != Some(&START) {
        return Err(Error::MissingStart);
    }
    let mut b = ReplayBuilder::new(params, image)?;
    for &tok in tokens {
        b.push(tok)?;
    }
    Ok(b.finish())
}

/// Teacher-forced replay: one [`StepTrace`] per input token.
pub fn forward_replay(params: &ModelParams, image: &Tensor, tokens: &[usize]) -> Result<Vec<StepTrace>> {
    Ok(build_replay(params, image, tokens)?.traces())
}
