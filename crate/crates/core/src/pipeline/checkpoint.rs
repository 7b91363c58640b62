use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{bytes_to_tensor, tensor_to_bytes, AgentDims, AgentNet, RewardKind, TensorArchive};
use crate::error::{Error, Result};
use crate::numkit::{Module, SgdMomentum};
use crate::pipeline::TrainConfig;

const PARAMS: &str = "params.";
const VELOCITY: &str = "optim.velocity.";
const META_CONFIG: &str = "meta.config";
const META_STATE: &str = "meta.state";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Init,
    Pretrained,
    Joint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Progress {
    pub stage: Stage,
    pub pretrain_epochs: usize,
    pub joint_epochs: usize,
    /// Optimizer steps taken in the current stage.
    pub updates: u64,
    pub reward_kind: Option<RewardKind>,
    pub seed: u64,
}

/// Everything needed to resume or evaluate a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: AgentNet,
    pub optimizer: SgdMomentum,
    pub progress: Progress,
    pub config: TrainConfig,
    pub class_names: Vec<String>,
    pub rng_state: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaState {
    dims: AgentDims,
    class_names: Vec<String>,
    progress: Progress,
    learning_rate: f32,
    momentum: f32,
    weight_decay: f32,
}

impl Checkpoint {
    pub fn num_classes(&self) -> usize {
        self.params.num_classes()
    }

    pub fn class_name(&self, id: usize) -> &str {
        self.class_names.get(id).map(String::as_str).unwrap_or("?")
    }

    pub fn to_archive(&self) -> TensorArchive {
        let mut tensors = BTreeMap::new();
        self.params.visit(&mut |name, p, _| {
            tensors.insert(format!("{PARAMS}{name}"), p.clone());
        });
        for (name, v) in self.optimizer.velocity() {
            tensors.insert(format!("{VELOCITY}{name}"), v.clone());
        }
        tensors.insert(META_CONFIG.to_string(), bytes_to_tensor(self.config.to_json().as_bytes()));
        let meta = MetaState {
            dims: self.params.dims.clone(),
            class_names: self.class_names.clone(),
            progress: self.progress.clone(),
            learning_rate: self.optimizer.learning_rate,
            momentum: self.optimizer.momentum,
            weight_decay: self.optimizer.weight_decay,
        };
        let meta = serde_json::to_vec(&meta).expect("metadata serializes");
        tensors.insert(META_STATE.to_string(), bytes_to_tensor(&meta));
        TensorArchive {
            tensors,
            rng_state: self.rng_state,
        }
    }

    pub fn from_archive(mut archive: TensorArchive) -> Result<Self> {
        let malformed = |m: String| Error::CheckpointMalformed(m);
        let mut take_json = |key: &str| -> Result<Vec<u8>> {
            let t = archive.tensors.remove(key).ok_or_else(|| malformed(format!("missing {key}")))?;
            tensor_to_bytes(&t)
        };
        let config_text = take_json(META_CONFIG)?;
        let meta_bytes = take_json(META_STATE)?;
        let config: TrainConfig = serde_json::from_slice(&config_text).map_err(|e| malformed(format!("config: {e}")))?;
        let meta: MetaState = serde_json::from_slice(&meta_bytes).map_err(|e| malformed(format!("metadata: {e}")))?;
        if meta.class_names.len() != meta.dims.num_classes {
            return Err(malformed("class name count differs from the class head".into()));
        }

        let mut params = AgentNet::zeros(meta.dims.clone());
        let mut missing = None;
        params.visit_mut(&mut |name, p, _| {
            match archive.tensors.remove(&format!("{PARAMS}{name}")) {
                Some(t) if t.dims() == p.dims() => *p = t,
                Some(t) => missing = Some(format!("{name} has shape {:?}, expected {:?}", t.dims(), p.dims())),
                None => missing = Some(format!("missing parameter {name}")),
            }
        });
        if let Some(m) = missing {
            return Err(malformed(m));
        }

        let mut velocity = BTreeMap::new();
        let mut shapes = BTreeMap::new();
        params.visit(&mut |name, p, _| {
            shapes.insert(name.to_string(), p.dims().to_vec());
        });
        for (key, t) in std::mem::take(&mut archive.tensors) {
            let Some(name) = key.strip_prefix(VELOCITY) else {
                return Err(malformed(format!("unexpected tensor {key}")));
            };
            if shapes.get(name).map(Vec::as_slice) != Some(t.dims()) {
                return Err(malformed(format!("velocity {name} does not match a parameter")));
            }
            velocity.insert(name.to_string(), t);
        }

        Ok(Self {
            params,
            optimizer: SgdMomentum::from_velocity(meta.learning_rate, meta.momentum, meta.weight_decay, velocity),
            progress: meta.progress,
            config,
            class_names: meta.class_names,
            rng_state: archive.rng_state,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.to_archive().encode()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_archive(TensorArchive::decode(bytes)?)
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let bytes = ckpt.to_bytes()?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
