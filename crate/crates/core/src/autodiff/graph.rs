use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation kinds, each carrying its parent ids and attributes.
#[derive(Clone, Debug, PartialEq)]
pub enum OpKind {
    /// Input value; has no parents.
    Leaf,
    /// `[m, n] x [n] -> [m]`
    MatVec { matrix: NodeId, vector: NodeId },
    /// `[m, k] x [k, n] -> [m, n]`
    MatMul { left: NodeId, right: NodeId },
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    /// Over a vector.
    Softmax(NodeId),
    /// Vectors joined end to end.
    Concat(Vec<NodeId>),
    Slice { input: NodeId, start: usize, len: usize },
    /// Row `row` of a `[rows, cols]` table, as a `[cols]` vector.
    EmbeddingRow { table: NodeId, row: usize },
    /// Flat element `index` as a `[1]` scalar.
    Pick { input: NodeId, index: usize },
    Log(NodeId),
    Neg(NodeId),
    /// Sum of all elements as a `[1]` scalar.
    Sum(NodeId),
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Leaf => "leaf",
            OpKind::MatVec { .. } => "matvec",
            OpKind::MatMul { .. } => "matmul",
            OpKind::Add(..) => "add",
            OpKind::Mul(..) => "mul",
            OpKind::Sigmoid(_) => "sigmoid",
            OpKind::Tanh(_) => "tanh",
            OpKind::Softmax(_) => "softmax",
            OpKind::Concat(_) => "concat",
            OpKind::Slice { .. } => "slice",
            OpKind::EmbeddingRow { .. } => "embedding_row",
            OpKind::Pick { .. } => "pick",
            OpKind::Log(_) => "log",
            OpKind::Neg(_) => "neg",
            OpKind::Sum(_) => "sum",
        }
    }

    pub fn parents(&self) -> Vec<NodeId> {
        match self {
            OpKind::Leaf => vec![],
            OpKind::MatVec { matrix, vector } => vec![*matrix, *vector],
            OpKind::MatMul { left, right } => vec![*left, *right],
            OpKind::Add(a, b) | OpKind::Mul(a, b) => vec![*a, *b],
            OpKind::Sigmoid(a)
            | OpKind::Tanh(a)
            | OpKind::Softmax(a)
            | OpKind::Log(a)
            | OpKind::Neg(a)
            | OpKind::Sum(a) => vec![*a],
            OpKind::Concat(parts) => parts.clone(),
            OpKind::Slice { input, .. } | OpKind::Pick { input, .. } => vec![*input],
            OpKind::EmbeddingRow { table, .. } => vec![*table],
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub(crate) op: OpKind,
    pub(crate) value: Tensor,
}

/// Append-only expression tape with eagerly computed forward values.
#[derive(Clone, Debug, Default)]
pub struct ExprGraph {
    pub(crate) nodes: Vec<Node>,
}

fn shape_err(op: &'static str, left: &Tensor, right: &Tensor) -> Error {
    Error::Shape {
        op,
        left: left.shape().to_vec(),
        right: right.shape().to_vec(),
    }
}

fn require_vector(op: &'static str, t: &Tensor) -> Result<()> {
    if t.is_vector() {
        Ok(())
    } else {
        Err(Error::Shape {
            op,
            left: t.shape().to_vec(),
            right: vec![t.len()],
        })
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl ExprGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn op(&self, id: NodeId) -> &OpKind {
        &self.nodes[id.0].op
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.nodes.push(Node {
            op: OpKind::Leaf,
            value,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Appends an operation, computing its forward value from its parents.
    pub fn build_op(&mut self, op: OpKind) -> Result<NodeId> {
        for p in op.parents() {
            if p.0 >= self.nodes.len() {
                return Err(Error::UnknownNode(p.0));
            }
        }
        let value = self.forward(&op)?;
        self.nodes.push(Node { op, value });
        Ok(NodeId(self.nodes.len() - 1))
    }

    fn forward(&self, op: &OpKind) -> Result<Tensor> {
        let name = op.name();
        let v = |id: &NodeId| &self.nodes[id.0].value;
        Ok(match op {
            OpKind::Leaf => return Err(Error::Config("use ExprGraph::leaf for inputs".into())),
            OpKind::MatVec { matrix, vector } => {
                let (w, x) = (v(matrix), v(vector));
                if !w.is_matrix() || !x.is_vector() || w.shape()[1] != x.len() {
                    return Err(shape_err(name, w, x));
                }
                let rows = w.shape()[0];
                let out = (0..rows)
                    .map(|r| w.row(r).iter().zip(x.data()).map(|(a, b)| a * b).sum())
                    .collect();
                Tensor::vector(out)
            }
            OpKind::MatMul { left, right } => {
                let (a, b) = (v(left), v(right));
                if !a.is_matrix() || !b.is_matrix() || a.shape()[1] != b.shape()[0] {
                    return Err(shape_err(name, a, b));
                }
                let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
                let mut out = vec![0.0; m * n];
                for i in 0..m {
                    for p in 0..k {
                        let aip = a.data()[i * k + p];
                        for j in 0..n {
                            out[i * n + j] += aip * b.data()[p * n + j];
                        }
                    }
                }
                Tensor::matrix(m, n, out)?
            }
            OpKind::Add(a, b) | OpKind::Mul(a, b) => {
                let (a, b) = (v(a), v(b));
                if a.shape() != b.shape() {
                    return Err(shape_err(name, a, b));
                }
                let data = a
                    .data()
                    .iter()
                    .zip(b.data())
                    .map(|(x, y)| if matches!(op, OpKind::Add(..)) { x + y } else { x * y })
                    .collect();
                Tensor::new(a.shape().to_vec(), data)?
            }
            OpKind::Sigmoid(a) => v(a).map(sigmoid),
            OpKind::Tanh(a) => v(a).map(f64::tanh),
            OpKind::Log(a) => v(a).map(f64::ln),
            OpKind::Neg(a) => v(a).map(|x| -x),
            OpKind::Softmax(a) => {
                let x = v(a);
                require_vector(name, x)?;
                Tensor::vector(softmax(x.data()))
            }
            OpKind::Sum(a) => Tensor::scalar(v(a).data().iter().sum()),
            OpKind::Concat(parts) => {
                if parts.is_empty() {
                    return Err(Error::Empty("concat parts"));
                }
                let mut out = Vec::new();
                for p in parts {
                    require_vector(name, v(p))?;
                    out.extend_from_slice(v(p).data());
                }
                Tensor::vector(out)
            }
            OpKind::Slice { input, start, len } => {
                let x = v(input);
                require_vector(name, x)?;
                if *len == 0 || start + len > x.len() {
                    return Err(Error::Index {
                        op: name,
                        index: start + len,
                        len: x.len(),
                    });
                }
                Tensor::vector(x.data()[*start..start + len].to_vec())
            }
            OpKind::EmbeddingRow { table, row } => {
                let t = v(table);
                if !t.is_matrix() {
                    return Err(Error::Shape {
                        op: name,
                        left: t.shape().to_vec(),
                        right: vec![*row],
                    });
                }
                if *row >= t.shape()[0] {
                    return Err(Error::Index {
                        op: name,
                        index: *row,
                        len: t.shape()[0],
                    });
                }
                Tensor::vector(t.row(*row).to_vec())
            }
            OpKind::Pick { input, index } => {
                let x = v(input);
                if *index >= x.len() {
                    return Err(Error::Index {
                        op: name,
                        index: *index,
                        len: x.len(),
                    });
                }
                Tensor::scalar(x.data()[*index])
            }
        })
    }

    pub fn matvec(&mut self, matrix: NodeId, vector: NodeId) -> Result<NodeId> {
        self.build_op(OpKind::MatVec { matrix, vector })
    }

    pub fn matmul(&mut self, left: NodeId, right: NodeId) -> Result<NodeId> {
        self.build_op(OpKind::MatMul { left, right })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.build_op(OpKind::Add(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.build_op(OpKind::Mul(a, b))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.build_op(OpKind::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.build_op(OpKind::Tanh(a))
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        self.build_op(OpKind::Softmax(a))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.build_op(OpKind::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, input: NodeId, start: usize, len: usize) -> Result<NodeId> {
        self.build_op(OpKind::Slice { input, start, len })
    }

    pub fn embedding_row(&mut self, table: NodeId, row: usize) -> Result<NodeId> {
        self.build_op(OpKind::EmbeddingRow { table, row })
    }

    pub fn pick(&mut self, input: NodeId, index: usize) -> Result<NodeId> {
        self.build_op(OpKind::Pick { input, index })
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        self.build_op(OpKind::Log(a))
    }

    pub fn neg(&mut self, a: NodeId) -> Result<NodeId> {
        self.build_op(OpKind::Neg(a))
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.build_op(OpKind::Sum(a))
    }
}
