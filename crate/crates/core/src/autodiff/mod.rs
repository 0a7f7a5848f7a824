//! Reverse-mode automatic differentiation over dense [`Tensor`]s.
//!
//! An [`ExprGraph`] is an append-only tape: every operation computes its
//! forward value eagerly when it is added, and parents always precede their
//! children, so the node order is a topological order. [`backward`] walks the
//! tape in reverse from a scalar node.

mod backward;
mod graph;

pub use backward::{backward, GradientMap};
pub use graph::{ExprGraph, NodeId, OpKind};

use crate::tensor::Tensor;

/// Central finite differences of a scalar function, one coordinate at a time.
///
/// Test oracle for [`backward`]; `step` must be positive.
pub fn finite_diff(mut f: impl FnMut(&Tensor) -> f64, x: &Tensor, step: f64) -> Tensor {
    assert!(step > 0.0, "finite difference step must be positive");
    let mut grad = Tensor::zeros(x.shape());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - step;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_diff_of_sum() {
        let g = finite_diff(|x| x.data().iter().sum(), &Tensor::vector(vec![1.0, 2.0]), 1e-5);
        for v in g.data() {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn finite_diff_of_square() {
        let g = finite_diff(|x| x.data()[0] * x.data()[0], &Tensor::vector(vec![3.0]), 1e-5);
        assert!((g.data()[0] - 6.0).abs() < 1e-6);
    }
}
