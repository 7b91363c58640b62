use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numkit::{Module, Tensor};

/// One SGD-with-momentum update of a single tensor:
/// `v ← m·v + g + wd·p`, then `p ← p − lr·v`.
pub fn sgd_momentum_step(
    param: &mut Tensor,
    grad: &Tensor,
    velocity: &mut Tensor,
    learning_rate: f32,
    momentum: f32,
    weight_decay: f32,
) -> Result<()> {
    if param.dims() != grad.dims() || param.dims() != velocity.dims() {
        return Err(Error::shape(
            "sgd_momentum_step",
            format!("{:?}", param.dims()),
            format!("grad {:?}, velocity {:?}", grad.dims(), velocity.dims()),
        ));
    }
    for ((p, &g), v) in param
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(velocity.data_mut())
    {
        *v = momentum * *v + g + weight_decay * *p;
        if learning_rate != 0.0 {
            *p -= learning_rate * *v;
        }
    }
    Ok(())
}

/// Optimizer state: hyperparameters plus one zero-initialized velocity buffer
/// per parameter tensor, keyed by parameter name.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdMomentum {
    pub learning_rate: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    velocity: BTreeMap<String, Tensor>,
}

impl SgdMomentum {
    /// Creates velocity buffers for every parameter of `module` accepted by `filter`.
    pub fn new<M: Module<f32>>(
        module: &M,
        learning_rate: f32,
        momentum: f32,
        weight_decay: f32,
        filter: impl Fn(&str) -> bool,
    ) -> Self {
        let mut velocity = BTreeMap::new();
        module.visit(&mut |name, p, _| {
            if filter(name) {
                velocity.insert(name.to_string(), Tensor::zeros(p.dims()));
            }
        });
        Self {
            learning_rate,
            momentum,
            weight_decay,
            velocity,
        }
    }

    pub fn from_velocity(
        learning_rate: f32,
        momentum: f32,
        weight_decay: f32,
        velocity: BTreeMap<String, Tensor>,
    ) -> Self {
        Self {
            learning_rate,
            momentum,
            weight_decay,
            velocity,
        }
    }

    pub fn velocity(&self) -> &BTreeMap<String, Tensor> {
        &self.velocity
    }

    /// Applies one step to every tracked parameter of `module`; untracked
    /// parameters are left alone.
    pub fn step<M: Module<f32>>(&mut self, module: &mut M) -> Result<()> {
        let (lr, m, wd) = (self.learning_rate, self.momentum, self.weight_decay);
        let mut result = Ok(());
        let velocity = &mut self.velocity;
        module.visit_mut(&mut |name, p, g| {
            if result.is_err() {
                return;
            }
            if let Some(v) = velocity.get_mut(name) {
                result = sgd_momentum_step(p, g, v, lr, m, wd);
            }
        });
        result
    }
}
