//! Minimal dense numerical kernel.
//!
//! Parameters and activations are stored as `f32`. Every kernel is generic
//! over [`Real`] so that a network can be cast to an `f64` shadow copy for
//! finite-difference gradient checking. Layers expose explicit
//! forward/backward passes; there is no autodiff graph.

mod gemm;
mod gradcheck;
mod linear;
mod ops;
mod optim;
mod tensor;

pub use gemm::{matmul_nn, matmul_nt, matmul_tn_acc, Real};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, Probe};
pub(crate) use gradcheck::fold_pattern;
pub use linear::{glorot_bound, Linear};
pub use ops::{
    cross_entropy_loss, log_softmax, mse_loss, relu, relu_backward, relu_in_place, softmax,
    softmax_rows,
};
pub use optim::{sgd_momentum_step, SgdMomentum};
pub use tensor::Tensor;

/// Anything owning named parameter tensors with matching gradient buffers.
///
/// Visiting order must be stable; optimizers, checkpoints and the gradient
/// checker all rely on it.
pub trait Module<T: Real> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor<T>, &Tensor<T>));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>, &mut Tensor<T>));

    fn zero_grad(&mut self) {
        self.visit_mut(&mut |_, _, g| g.fill(T::zero()));
    }

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, p, _| n += p.len());
        n
    }
}

/// Prefix every parameter name visited by `inner` with `prefix.`.
pub(crate) fn visit_prefixed<T: Real, M: Module<T>>(
    inner: &M,
    prefix: &str,
    f: &mut dyn FnMut(&str, &Tensor<T>, &Tensor<T>),
) {
    inner.visit(&mut |name, p, g| f(&format!("{prefix}.{name}"), p, g));
}

pub(crate) fn visit_prefixed_mut<T: Real, M: Module<T>>(
    inner: &mut M,
    prefix: &str,
    f: &mut dyn FnMut(&str, &mut Tensor<T>, &mut Tensor<T>),
) {
    inner.visit_mut(&mut |name, p, g| f(&format!("{prefix}.{name}"), p, g));
}
