use crate::error::{Error, Result};
use crate::numkit::{Real, Tensor};

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let mut y = x.clone();
    relu_in_place(&mut y);
    y
}

pub fn relu_in_place<T: Real>(x: &mut Tensor<T>) {
    for v in x.data_mut() {
        if !(*v > T::zero()) {
            *v = T::zero();
        }
    }
}

/// Gradient of ReLU; the derivative at exactly zero is taken as zero.
pub fn relu_backward<T: Real>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if x.dims() != grad_out.dims() {
        return Err(Error::shape(
            "relu_backward",
            format!("{:?}", x.dims()),
            format!("{:?}", grad_out.dims()),
        ));
    }
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&xi, &g)| if xi > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(x.dims(), data)
}

/// Numerically stable softmax of one logit vector (max-subtracted, f64 sum).
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v.to_f64()));
    let exps: Vec<f64> = logits.iter().map(|&v| (v.to_f64() - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| T::from_f64(e / sum)).collect()
}

/// `log softmax` in f64.
pub fn log_softmax<T: Real>(logits: &[T]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v.to_f64()));
    let lse = logits.iter().map(|&v| (v.to_f64() - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|&v| v.to_f64() - lse).collect()
}

pub fn softmax_rows<T: Real>(logits: &Tensor<T>) -> Tensor<T> {
    let mut out = logits.clone();
    for i in 0..logits.rows() {
        let p = softmax(logits.row(i));
        out.row_mut(i).copy_from_slice(&p);
    }
    out
}

/// Mean cross-entropy over the batch and its gradient `(softmax − onehot)/batch`.
pub fn cross_entropy_loss<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>)> {
    if logits.dims().len() != 2 || logits.rows() != labels.len() {
        return Err(Error::shape(
            "cross_entropy_loss",
            format!("[{}×C] logits", labels.len()),
            format!("{:?}", logits.dims()),
        ));
    }
    let classes = logits.cols();
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    let batch = labels.len() as f64;
    let mut grad = Tensor::zeros(logits.dims());
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let logp = log_softmax(logits.row(i));
        total -= logp[label];
        for (j, (g, lp)) in grad.row_mut(i).iter_mut().zip(&logp).enumerate() {
            let onehot = if j == label { 1.0 } else { 0.0 };
            *g = T::from_f64((lp.exp() - onehot) / batch);
        }
    }
    Ok((total / batch, grad))
}

/// Squared error `(pred − target)²` and its derivative w.r.t. `pred`.
pub fn mse_loss<T: Real>(pred: T, target: T) -> (T, T) {
    let d = pred - target;
    (d * d, d + d)
}
