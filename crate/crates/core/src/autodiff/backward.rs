use super::graph::{ExprGraph, NodeId, OpKind};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Gradients of one scalar target with respect to every node it depends on.
#[derive(Clone, Debug)]
pub struct GradientMap {
    grads: Vec<Option<Tensor>>,
}

impl GradientMap {
    /// `None` when the node does not influence the target.
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.get(id).is_some()
    }

    /// Gradient of `id`, or zeros of `shape` when the target ignores it.
    pub fn get_or_zeros(&self, id: NodeId, shape: &[usize]) -> Tensor {
        self.get(id).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor> {
        self.grads.get_mut(id.0).and_then(Option::take)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Tensor)> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (NodeId(i), g)))
    }
}

fn slot<'a>(grads: &'a mut [Option<Tensor>], graph: &ExprGraph, id: NodeId) -> &'a mut [f64] {
    grads[id.0]
        .get_or_insert_with(|| Tensor::zeros(graph.value(id).shape()))
        .data_mut()
}

/// Reverse-mode sweep from a single-element node.
pub fn backward(graph: &ExprGraph, target: NodeId) -> Result<GradientMap> {
    if target.0 >= graph.len() {
        return Err(Error::UnknownNode(target.0));
    }
    let tv = graph.value(target);
    if tv.len() != 1 {
        return Err(Error::NonScalarTarget(tv.shape().to_vec()));
    }
    let mut grads: Vec<Option<Tensor>> = vec![None; target.0 + 1];
    grads[target.0] = Some(Tensor::filled(tv.shape(), 1.0));

    for i in (0..=target.0).rev() {
        let Some(g) = grads[i].take() else { continue };
        let node = &graph.nodes[i];
        let y = node.value.data();
        let gd = g.data();
        match &node.op {
            OpKind::Leaf => {}
            OpKind::MatVec { matrix, vector } => {
                let w = graph.value(*matrix);
                let x = graph.value(*vector);
                let cols = w.shape()[1];
                {
                    let dw = slot(&mut grads, graph, *matrix);
                    for (r, &gr) in gd.iter().enumerate() {
                        if gr == 0.0 {
                            continue;
                        }
                        for (d, &xv) in dw[r * cols..(r + 1) * cols].iter_mut().zip(x.data()) {
                            *d += gr * xv;
                        }
                    }
                }
                let dx = slot(&mut grads, graph, *vector);
                for (r, &gr) in gd.iter().enumerate() {
                    for (d, &wv) in dx.iter_mut().zip(w.row(r)) {
                        *d += gr * wv;
                    }
                }
            }
            OpKind::MatMul { left, right } => {
                let a = graph.value(*left);
                let b = graph.value(*right);
                let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
                {
                    let da = slot(&mut grads, graph, *left);
                    for i in 0..m {
                        for p in 0..k {
                            let mut acc = 0.0;
                            for j in 0..n {
                                acc += gd[i * n + j] * b.data()[p * n + j];
                            }
                            da[i * k + p] += acc;
                        }
                    }
                }
                let db = slot(&mut grads, graph, *right);
                for p in 0..k {
                    for j in 0..n {
                        let mut acc = 0.0;
                        for i in 0..m {
                            acc += a.data()[i * k + p] * gd[i * n + j];
                        }
                        db[p * n + j] += acc;
                    }
                }
            }
            OpKind::Add(a, b) => {
                for id in [a, b] {
                    for (d, &gv) in slot(&mut grads, graph, *id).iter_mut().zip(gd) {
                        *d += gv;
                    }
                }
            }
            OpKind::Mul(a, b) => {
                let av = graph.value(*a).data().to_vec();
                let bv = graph.value(*b).data().to_vec();
                for (d, (&gv, &o)) in slot(&mut grads, graph, *a).iter_mut().zip(gd.iter().zip(&bv)) {
                    *d += gv * o;
                }
                for (d, (&gv, &o)) in slot(&mut grads, graph, *b).iter_mut().zip(gd.iter().zip(&av)) {
                    *d += gv * o;
                }
            }
            OpKind::Sigmoid(a) => {
                for (d, (&gv, &yv)) in slot(&mut grads, graph, *a).iter_mut().zip(gd.iter().zip(y)) {
                    *d += gv * yv * (1.0 - yv);
                }
            }
            OpKind::Tanh(a) => {
                for (d, (&gv, &yv)) in slot(&mut grads, graph, *a).iter_mut().zip(gd.iter().zip(y)) {
                    *d += gv * (1.0 - yv * yv);
                }
            }
            OpKind::Softmax(a) => {
                let gy: f64 = gd.iter().zip(y).map(|(g, y)| g * y).sum();
                for (d, (&gv, &yv)) in slot(&mut grads, graph, *a).iter_mut().zip(gd.iter().zip(y)) {
                    *d += yv * (gv - gy);
                }
            }
            OpKind::Log(a) => {
                let x = graph.value(*a).data();
                for (d, (&gv, &xv)) in slot(&mut grads, graph, *a).iter_mut().zip(gd.iter().zip(x)) {
                    *d += gv / xv;
                }
            }
            OpKind::Neg(a) => {
                for (d, &gv) in slot(&mut grads, graph, *a).iter_mut().zip(gd) {
                    *d -= gv;
                }
            }
            OpKind::Sum(a) => {
                for d in slot(&mut grads, graph, *a).iter_mut() {
                    *d += gd[0];
                }
            }
            OpKind::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = graph.value(*p).len();
                    for (d, &gv) in slot(&mut grads, graph, *p)
                        .iter_mut()
                        .zip(&gd[offset..offset + len])
                    {
                        *d += gv;
                    }
                    offset += len;
                }
            }
            OpKind::Slice { input, start, len } => {
                let dx = slot(&mut grads, graph, *input);
                for (d, &gv) in dx[*start..start + len].iter_mut().zip(gd) {
                    *d += gv;
                }
            }
            OpKind::EmbeddingRow { table, row } => {
                let cols = graph.value(*table).shape()[1];
                let dt = slot(&mut grads, graph, *table);
                for (d, &gv) in dt[row * cols..(row + 1) * cols].iter_mut().zip(gd) {
                    *d += gv;
                }
            }
            OpKind::Pick { input, index } => {
                slot(&mut grads, graph, *input)[*index] += gd[0];
            }
        }
        grads[i] = Some(g);
    }
    Ok(GradientMap { grads })
}
