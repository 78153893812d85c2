//! Recurrent policy/value/collision network with hand-written gradients.
//!
//! All parameters live in one flat vector; named [`Linear`] blocks index into
//! it. The recurrent core is a single gated recurrent unit.

mod dist;
mod gradcheck;
mod net;
mod optim;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::actionspace::{ActionSpec, ActionVariant};
use crate::error::{Error, Result};
use crate::features::ObservationLayout;

pub use dist::{Categorical, PolicyDist};
pub use gradcheck::{gradcheck, GradcheckReport};
pub use net::{OutputGrad, StepOutput, Tape};
pub use optim::{clip_grad_norm, global_norm, Adam};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub layout: ObservationLayout,
    pub variant: ActionVariant,
    pub hidden: usize,
    pub encoder_dim: usize,
    pub action_embed: usize,
    pub stag_hidden: usize,
    pub d_stag: usize,
}

impl PolicyConfig {
    pub fn new(layout: ObservationLayout, variant: ActionVariant) -> Self {
        Self { layout, variant, hidden: 128, encoder_dim: 32, action_embed: 64, stag_hidden: 64, d_stag: 32 }
    }

    pub fn head_sizes(&self) -> Vec<usize> {
        ActionSpec::new(self.variant).head_sizes()
    }

    pub fn has_collision_head(&self) -> bool {
        self.layout.depth
    }

    /// Width of the concatenated encoder output fed to the recurrent core.
    pub fn core_input(&self) -> usize {
        let scan = if self.layout.depth { self.encoder_dim } else { 0 };
        scan + 2 * self.encoder_dim + self.action_embed + self.d_stag
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A dense layer `y = W x + b` stored row-major (`out x inp`) in the flat
/// parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub name: String,
    pub inp: usize,
    pub out: usize,
    pub w: usize,
    pub b: usize,
}

impl Linear {
    pub fn len(&self) -> usize {
        self.out * (self.inp + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Offsets of every block in the flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub scan: Option<Linear>,
    pub local: Linear,
    pub global: Linear,
    pub action: Linear,
    pub stag1: Linear,
    pub stag2: Linear,
    pub gru_x: Linear,
    pub gru_h: Linear,
    pub heads: Vec<Linear>,
    pub value: Linear,
    pub collision: Option<Linear>,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(cfg: &PolicyConfig) -> Self {
        let mut total = 0;
        let mut block = |name: &str, inp: usize, out: usize| {
            let l = Linear { name: name.to_string(), inp, out, w: total, b: total + inp * out };
            total += l.len();
            l
        };
        let lay = &cfg.layout;
        let e = cfg.encoder_dim;
        let h = cfg.hidden;
        let scan = lay.depth.then(|| block("scan_encoder", lay.rays, e));
        let local = block("local_encoder", lay.local_dim(), e);
        let global = block("global_encoder", lay.global_dim(), e);
        let action = block("action_embedding", lay.action_dim(), cfg.action_embed);
        let stag1 = block("stagnation_1", ObservationLayout::STAG_DIM, cfg.stag_hidden);
        let stag2 = block("stagnation_2", cfg.stag_hidden, cfg.d_stag);
        let gru_x = block("gru_input", cfg.core_input(), 3 * h);
        let gru_h = block("gru_hidden", h, 3 * h);
        let heads =
            cfg.head_sizes().iter().enumerate().map(|(k, &n)| block(&format!("policy_head_{k}"), h, n)).collect();
        let value = block("value_head", h, 1);
        let collision = lay.depth.then(|| block("collision_head", e, 1));
        Self { scan, local, global, action, stag1, stag2, gru_x, gru_h, heads, value, collision, total }
    }

    pub fn blocks(&self) -> Vec<&Linear> {
        let mut v: Vec<&Linear> = Vec::new();
        v.extend(self.scan.iter());
        v.extend([&self.local, &self.global, &self.action, &self.stag1, &self.stag2, &self.gru_x, &self.gru_h]);
        v.extend(self.heads.iter());
        v.push(&self.value);
        v.extend(self.collision.iter());
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub config: PolicyConfig,
    pub layout: ParamLayout,
    pub theta: Vec<f64>,
}

pub const POLICY_HEAD_GAIN: f64 = 0.01;
pub const VALUE_HEAD_GAIN: f64 = 1.0;

impl PolicyParams {
    pub fn zeros(config: PolicyConfig) -> Self {
        let layout = ParamLayout::new(&config);
        let theta = vec![0.0; layout.total];
        Self { config, layout, theta }
    }

    /// Scaled-uniform weights `U(-g/sqrt(inp), g/sqrt(inp))`, zero biases.
    pub fn init(config: PolicyConfig, seed: u64) -> Self {
        Self::init_with_gains(config, seed, POLICY_HEAD_GAIN, VALUE_HEAD_GAIN)
    }

    pub fn init_with_gains(config: PolicyConfig, seed: u64, policy_gain: f64, value_gain: f64) -> Self {
        let mut p = Self::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head_names: Vec<String> = p.layout.heads.iter().map(|l| l.name.clone()).collect();
        for l in p.layout.blocks() {
            let gain = if head_names.contains(&l.name) {
                policy_gain
            } else if l.name == "value_head" {
                value_gain
            } else {
                1.0
            };
            let bound = gain / (l.inp as f64).sqrt();
            for w in &mut p.theta[l.w..l.b] {
                *w = rng.gen_range(-1.0..=1.0) * bound;
            }
        }
        p
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn zero_grad(&self) -> Vec<f64> {
        vec![0.0; self.theta.len()]
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.theta.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::NonFinite(format!("parameter {i} is {}", self.theta[i]))),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let arrays = self
            .layout
            .blocks()
            .into_iter()
            .flat_map(|l| {
                [
                    NamedArray {
                        name: format!("{}.weight", l.name),
                        shape: vec![l.out, l.inp],
                        data: self.theta[l.w..l.b].to_vec(),
                    },
                    NamedArray {
                        name: format!("{}.bias", l.name),
                        shape: vec![l.out],
                        data: self.theta[l.b..l.b + l.out].to_vec(),
                    },
                ]
            })
            .collect();
        Checkpoint { config_hash: self.config.hash(), config: self.config.clone(), arrays }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.config.hash() != ck.config_hash {
            return Err(Error::Checkpoint("config hash does not match the stored config".into()));
        }
        let mut p = Self::zeros(ck.config.clone());
        let blocks: Vec<Linear> = p.layout.blocks().into_iter().cloned().collect();
        for l in &blocks {
            for (suffix, off, len) in [("weight", l.w, l.out * l.inp), ("bias", l.b, l.out)] {
                let name = format!("{}.{suffix}", l.name);
                let a = ck
                    .arrays
                    .iter()
                    .find(|a| a.name == name)
                    .ok_or_else(|| Error::Checkpoint(format!("missing array {name}")))?;
                if a.data.len() != len || a.shape.iter().product::<usize>() != len {
                    return Err(Error::Checkpoint(format!("array {name} has the wrong size")));
                }
                p.theta[off..off + len].copy_from_slice(&a.data);
            }
        }
        p.check_finite()?;
        Ok(p)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_checkpoint())?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_checkpoint(&ck)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Checkpoint file: named arrays plus the hash of the network config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config_hash: String,
    pub config: PolicyConfig,
    pub arrays: Vec<NamedArray>,
}
