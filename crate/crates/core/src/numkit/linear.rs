use rand::Rng;

use crate::error::{Error, Result};
use crate::numkit::{matmul_nn, matmul_nt, matmul_tn_acc, Module, Real, Tensor};

/// Fully connected layer computing `y = x·Wᵀ + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T = f32> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub grad_weight: Tensor<T>,
    pub grad_bias: Tensor<T>,
}

/// Half-width of the Glorot uniform initialization interval.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl<T: Real> Linear<T> {
    /// Zero-initialized layer.
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[output, input]),
            bias: Tensor::zeros(&[output]),
            grad_weight: Tensor::zeros(&[output, input]),
            grad_bias: Tensor::zeros(&[output]),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeros(input, output);
        let bound = glorot_bound(input, output);
        for w in layer.weight.data_mut() {
            *w = T::from_f64(rng.gen_range(-bound..bound));
        }
        layer
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weight.dims().len() != 2 || bias.dims() != [weight.rows()] {
            return Err(Error::shape(
                "Linear::from_parts",
                "weight [out×in] with bias [out]",
                format!("{:?} / {:?}", weight.dims(), bias.dims()),
            ));
        }
        Ok(Self {
            grad_weight: Tensor::zeros(weight.dims()),
            grad_bias: Tensor::zeros(bias.dims()),
            weight,
            bias,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.dims().len() != 2 || x.cols() != self.input_dim() {
            return Err(Error::shape(
                "linear_forward",
                format!("[batch×{}]", self.input_dim()),
                format!("{:?}", x.dims()),
            ));
        }
        let mut y = matmul_nt(x, &self.weight);
        let b = self.bias.data();
        for i in 0..y.rows() {
            for (v, &bj) in y.row_mut(i).iter_mut().zip(b) {
                *v = *v + bj;
            }
        }
        Ok(y)
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. `x`.
    pub fn backward(&mut self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        if x.dims().len() != 2
            || grad_out.dims().len() != 2
            || x.cols() != self.input_dim()
            || grad_out.cols() != self.output_dim()
            || x.rows() != grad_out.rows()
        {
            return Err(Error::shape(
                "linear_backward",
                format!("x [b×{}], grad_out [b×{}]", self.input_dim(), self.output_dim()),
                format!("{:?}, {:?}", x.dims(), grad_out.dims()),
            ));
        }
        matmul_tn_acc(&mut self.grad_weight, grad_out, x);
        let out = self.output_dim();
        let gb = self.grad_bias.data_mut();
        for j in 0..out {
            let col: f64 = (0..grad_out.rows())
                .map(|i| grad_out.data()[i * out + j].to_f64())
                .sum();
            gb[j] = gb[j] + T::from_f64(col);
        }
        Ok(matmul_nn(grad_out, &self.weight))
    }

    pub fn cast<U: Real>(&self) -> Linear<U> {
        Linear {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
            grad_weight: self.grad_weight.cast(),
            grad_bias: self.grad_bias.cast(),
        }
    }
}

impl<T: Real> Module<T> for Linear<T> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor<T>, &Tensor<T>)) {
        f("bias", &self.bias, &self.grad_bias);
        f("weight", &self.weight, &self.grad_weight);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>, &mut Tensor<T>)) {
        f("bias", &mut self.bias, &mut self.grad_bias);
        f("weight", &mut self.weight, &mut self.grad_weight);
    }
}
