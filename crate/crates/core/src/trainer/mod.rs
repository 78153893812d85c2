//! Rollout collection, advantage estimation, PPO / REINFORCE updates,
//! imitation pretraining, the curriculum controller and the block loop.

mod curriculum;
mod gae;
mod il;
mod losses;
mod ppo;
mod reinforce;
mod rollout;
mod run;

use serde::{Deserialize, Serialize};

use crate::actionspace::ActionVariant;
use crate::error::{Error, Result};

pub use curriculum::{CurriculumConfig, CurriculumState, Promotion};
pub use gae::{discounted_returns, gae, normalize};
pub use il::{
    il_pretrain, il_pretrain_sequences, replay_demonstration, transfer_shared, IlConfig, IlReport, IlSequence,
};
pub use losses::{bce_with_logits, collision_aux_loss, collision_aux_loss_grad};
pub use ppo::{ppo_update, run_epochs, PpoStats};
pub use reinforce::{reinforce_update, ReinforceStats};
pub use rollout::{collect_rollouts, BlockMetrics, RolloutBatch, Trajectory, VecEnv};
pub use run::{
    build_scenes, read_block_log, read_eval_log, scene_contexts, train, train_with_progress, BlockRow, EvalRow,
    RunConfig, RunOutput, CSV_HEADER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    Ppo,
    Reinforce,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ppo => "ppo",
            Algorithm::Reinforce => "reinforce",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ppo" => Ok(Algorithm::Ppo),
            "reinforce" => Ok(Algorithm::Reinforce),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub algorithm: Algorithm,
    pub lr: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub aux_coef: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub grad_clip: f64,
    pub kl_target: f64,
    pub value_clip: bool,
    pub envs: usize,
    pub rollout_len: usize,
    pub blocks: usize,
}

impl TrainerConfig {
    pub fn ppo(variant: ActionVariant) -> Self {
        let (gae_lambda, clip, aux_coef) = match variant {
            ActionVariant::Sh16 => (0.90, 0.25, 0.2),
            ActionVariant::Sh504 | ActionVariant::Mh => (0.97, 0.15, 0.3),
        };
        Self {
            algorithm: Algorithm::Ppo,
            lr: 1e-4,
            gamma: 0.99,
            gae_lambda,
            clip,
            value_coef: 0.5,
            entropy_coef: 0.05,
            aux_coef,
            epochs: 4,
            minibatches: 4,
            grad_clip: 0.5,
            kl_target: 0.01,
            value_clip: true,
            envs: 32,
            rollout_len: 60,
            blocks: 1000,
        }
    }

    pub fn reinforce() -> Self {
        Self {
            algorithm: Algorithm::Reinforce,
            lr: 5e-4,
            gamma: 0.97,
            entropy_coef: 0.05,
            aux_coef: 0.3,
            epochs: 1,
            ..Self::ppo(ActionVariant::Sh16)
        }
    }

    pub fn defaults(algorithm: Algorithm, variant: ActionVariant) -> Self {
        match algorithm {
            Algorithm::Ppo => Self::ppo(variant),
            Algorithm::Reinforce => Self::reinforce(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gamma and gae_lambda must lie in [0, 1]");
        }
        if !(self.clip > 0.0) || !(self.grad_clip > 0.0) {
            return bad("clip and grad_clip must be positive");
        }
        if self.epochs == 0 || self.envs == 0 || self.rollout_len == 0 {
            return bad("epochs, envs and rollout_len must be at least 1");
        }
        if self.minibatches == 0 || self.minibatches > self.envs {
            return bad("minibatches must lie in 1..=envs");
        }
        Ok(())
    }
}
