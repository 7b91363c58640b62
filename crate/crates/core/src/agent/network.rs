use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::locenv::{Action, Encoder, Observation};
use crate::numkit::{
    relu, relu_backward, visit_prefixed, visit_prefixed_mut, Linear, Module, Real, Tensor,
};

/// Width of both trunk layers.
pub const TRUNK_WIDTH: usize = 1024;

/// Layer sizes of the agent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentDims {
    /// Crop side fed to the encoder; input width is `3·side²`.
    pub input_side: usize,
    pub feature_dim: usize,
    pub history_dim: usize,
    pub trunk_width: usize,
    pub num_classes: usize,
}

impl AgentDims {
    pub fn new(num_classes: usize) -> Self {
        Self {
            input_side: 32,
            feature_dim: 256,
            history_dim: 90,
            trunk_width: TRUNK_WIDTH,
            num_classes,
        }
    }

    pub fn pixel_dim(&self) -> usize {
        3 * self.input_side * self.input_side
    }

    pub fn obs_dim(&self) -> usize {
        self.feature_dim + self.history_dim
    }
}

/// Joint localization/classification network: a crop encoder, a two-layer
/// ReLU trunk over `[features, action history]`, a 9-way Q head and a
/// class head sharing the trunk output.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentNet<T = f32> {
    pub dims: AgentDims,
    pub encoder: Linear<T>,
    pub trunk1: Linear<T>,
    pub trunk2: Linear<T>,
    pub q_head: Linear<T>,
    pub class_head: Linear<T>,
}

/// Learned parameters of the agent.
pub type AgentParams = AgentNet<f32>;

/// Cached activations of one trunk pass, needed for backprop.
#[derive(Clone, Debug)]
pub struct TrunkPass<T = f32> {
    pub h1_pre: Tensor<T>,
    pub h1: Tensor<T>,
    pub h2_pre: Tensor<T>,
    pub h2: Tensor<T>,
    pub q: Tensor<T>,
    pub logits: Tensor<T>,
}

impl<T: Real> TrunkPass<T> {
    /// Fingerprint of the ReLU sign pattern, for gradient checking.
    pub(crate) fn pattern(&self, acc: u64) -> u64 {
        let acc = crate::numkit::fold_pattern(acc, &self.h1_pre);
        crate::numkit::fold_pattern(acc, &self.h2_pre)
    }
}

impl<T: Real> AgentNet<T> {
    pub fn init<R: Rng + ?Sized>(dims: AgentDims, rng: &mut R) -> Self {
        Self {
            encoder: Linear::init(dims.pixel_dim(), dims.feature_dim, rng),
            trunk1: Linear::init(dims.obs_dim(), dims.trunk_width, rng),
            trunk2: Linear::init(dims.trunk_width, dims.trunk_width, rng),
            q_head: Linear::init(dims.trunk_width, Action::COUNT, rng),
            class_head: Linear::init(dims.trunk_width, dims.num_classes, rng),
            dims,
        }
    }

    pub fn zeros(dims: AgentDims) -> Self {
        Self {
            encoder: Linear::zeros(dims.pixel_dim(), dims.feature_dim),
            trunk1: Linear::zeros(dims.obs_dim(), dims.trunk_width),
            trunk2: Linear::zeros(dims.trunk_width, dims.trunk_width),
            q_head: Linear::zeros(dims.trunk_width, Action::COUNT),
            class_head: Linear::zeros(dims.trunk_width, dims.num_classes),
            dims,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.dims.num_classes
    }

    /// Encoder pre-activations and ReLU features for a `[batch × pixels]` input.
    pub fn encode_batch(&self, pixels: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let pre = self.encoder.forward(pixels)?;
        let feat = relu(&pre);
        Ok((pre, feat))
    }

    /// Trunk and both heads for a `[batch × obs]` input.
    pub fn forward(&self, obs: &Tensor<T>) -> Result<TrunkPass<T>> {
        if obs.dims().len() != 2 || obs.cols() != self.dims.obs_dim() {
            return Err(Error::shape(
                "agent forward",
                format!("[batch×{}]", self.dims.obs_dim()),
                format!("{:?}", obs.dims()),
            ));
        }
        let h1_pre = self.trunk1.forward(obs)?;
        let h1 = relu(&h1_pre);
        let h2_pre = self.trunk2.forward(&h1)?;
        let h2 = relu(&h2_pre);
        let q = self.q_head.forward(&h2)?;
        let logits = self.class_head.forward(&h2)?;
        Ok(TrunkPass {
            h1_pre,
            h1,
            h2_pre,
            h2,
            q,
            logits,
        })
    }

    /// Backpropagates head gradients through the trunk, accumulating
    /// parameter gradients. Returns the gradient w.r.t. the observation.
    pub fn backward(
        &mut self,
        obs: &Tensor<T>,
        pass: &TrunkPass<T>,
        grad_q: Option<&Tensor<T>>,
        grad_logits: Option<&Tensor<T>>,
    ) -> Result<Tensor<T>> {
        let mut grad_h2 = Tensor::zeros(pass.h2.dims());
        if let Some(g) = grad_q {
            add_into(&mut grad_h2, &self.q_head.backward(&pass.h2, g)?);
        }
        if let Some(g) = grad_logits {
            add_into(&mut grad_h2, &self.class_head.backward(&pass.h2, g)?);
        }
        let grad_h2_pre = relu_backward(&pass.h2_pre, &grad_h2)?;
        let grad_h1 = self.trunk2.backward(&pass.h1, &grad_h2_pre)?;
        let grad_h1_pre = relu_backward(&pass.h1_pre, &grad_h1)?;
        self.trunk1.backward(obs, &grad_h1_pre)
    }

    /// Backpropagates a feature gradient into the encoder.
    pub fn backward_encoder(
        &mut self,
        pixels: &Tensor<T>,
        pre: &Tensor<T>,
        grad_features: &Tensor<T>,
    ) -> Result<()> {
        let g = relu_backward(pre, grad_features)?;
        self.encoder.backward(pixels, &g)?;
        Ok(())
    }

    /// `[features, zero history]` rows from a feature batch.
    pub fn with_zero_history(&self, features: &Tensor<T>) -> Tensor<T> {
        let (b, f, d) = (features.rows(), self.dims.feature_dim, self.dims.obs_dim());
        let mut obs = Tensor::zeros(&[b, d]);
        for i in 0..b {
            obs.row_mut(i)[..f].copy_from_slice(features.row(i));
        }
        obs
    }

    /// Whole-image classification path used by pre-training: returns the
    /// mean loss of `loss_grad` and accumulates gradients for encoder, trunk
    /// and class head.
    pub fn classify_backward(
        &mut self,
        pixels: &Tensor<T>,
        loss_grad: impl FnOnce(&Tensor<T>) -> Result<(f64, Tensor<T>)>,
    ) -> Result<f64> {
        let (pre, feat) = self.encode_batch(pixels)?;
        let obs = self.with_zero_history(&feat);
        let pass = self.forward(&obs)?;
        let (loss, grad_logits) = loss_grad(&pass.logits)?;
        let grad_obs = self.backward(&obs, &pass, None, Some(&grad_logits))?;
        let f = self.dims.feature_dim;
        let mut grad_feat = Tensor::zeros(feat.dims());
        for i in 0..grad_obs.rows() {
            grad_feat.row_mut(i).copy_from_slice(&grad_obs.row(i)[..f]);
        }
        self.backward_encoder(pixels, &pre, &grad_feat)?;
        Ok(loss)
    }

    pub fn cast<U: Real>(&self) -> AgentNet<U> {
        AgentNet {
            dims: self.dims.clone(),
            encoder: self.encoder.cast(),
            trunk1: self.trunk1.cast(),
            trunk2: self.trunk2.cast(),
            q_head: self.q_head.cast(),
            class_head: self.class_head.cast(),
        }
    }
}

fn add_into<T: Real>(acc: &mut Tensor<T>, x: &Tensor<T>) {
    for (a, &b) in acc.data_mut().iter_mut().zip(x.data()) {
        *a = *a + b;
    }
}

impl AgentNet<f32> {
    /// Q-values and class logits for a single observation.
    pub fn evaluate(&self, obs: &Observation) -> Result<(Vec<f32>, Vec<f32>)> {
        let x = Tensor::from_vec(&[1, obs.len()], obs.data.clone())?;
        let pass = self.forward(&x)?;
        Ok((pass.q.into_data(), pass.logits.into_data()))
    }
}

impl Encoder for AgentNet<f32> {
    fn input_side(&self) -> usize {
        self.dims.input_side
    }

    fn feature_dim(&self) -> usize {
        self.dims.feature_dim
    }

    fn encode(&self, pixels: &[f32]) -> Vec<f32> {
        let x = Tensor::from_vec(&[1, pixels.len()], pixels.to_vec()).expect("non-empty crop");
        let (_, feat) = self.encode_batch(&x).expect("crop size matches encoder input");
        feat.into_data()
    }
}

// Visiting order is lexicographic in the full parameter name.
impl<T: Real> Module<T> for AgentNet<T> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor<T>, &Tensor<T>)) {
        visit_prefixed(&self.class_head, "class_head", f);
        visit_prefixed(&self.encoder, "encoder", f);
        visit_prefixed(&self.q_head, "q_head", f);
        visit_prefixed(&self.trunk1, "trunk1", f);
        visit_prefixed(&self.trunk2, "trunk2", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>, &mut Tensor<T>)) {
        visit_prefixed_mut(&mut self.class_head, "class_head", f);
        visit_prefixed_mut(&mut self.encoder, "encoder", f);
        visit_prefixed_mut(&mut self.q_head, "q_head", f);
        visit_prefixed_mut(&mut self.trunk1, "trunk1", f);
        visit_prefixed_mut(&mut self.trunk2, "trunk2", f);
    }
}
