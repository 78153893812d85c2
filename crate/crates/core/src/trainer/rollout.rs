use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::actionspace::{ActionChoice, ActionSpec};
use crate::env::{Env, EnvConfig, EpisodeSummary, SceneContext};
use crate::error::{Error, Result};
use crate::policynet::{PolicyDist, PolicyParams};

/// B environments with per-environment RNG streams and recurrent states that
/// persist across rollout blocks.
#[derive(Debug, Clone)]
pub struct VecEnv {
    envs: Vec<Env>,
    rngs: Vec<ChaCha8Rng>,
    obs: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
    fresh: Vec<bool>,
}

impl VecEnv {
    /// Scenes are assigned round-robin; every environment starts an episode.
    pub fn new(scenes: &[Arc<SceneContext>], cfg: Arc<EnvConfig>, n: usize, hidden: usize, seed: u64) -> Result<Self> {
        if scenes.is_empty() {
            return Err(Error::Config("no training scenes".into()));
        }
        let mut envs = Vec::with_capacity(n);
        let mut rngs = Vec::with_capacity(n);
        let mut obs = Vec::with_capacity(n);
        for i in 0..n {
            let mut env = Env::new(scenes[i % scenes.len()].clone(), cfg.clone());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            obs.push(env.reset(&mut rng));
            envs.push(env);
            rngs.push(rng);
        }
        Ok(Self { envs, rngs, obs, hidden: vec![vec![0.0; hidden]; n], fresh: vec![true; n] })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn envs(&self) -> &[Env] {
        &self.envs
    }
}

/// One environment's slice of a rollout block.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub obs: Vec<Vec<f64>>,
    /// Step begins a new episode; the recurrent state is zeroed before it.
    pub resets: Vec<bool>,
    pub choices: Vec<ActionChoice>,
    pub logp: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    /// Step ended its episode (Stop or budget).
    pub dones: Vec<bool>,
    pub truncated: Vec<bool>,
    pub collision_labels: Vec<f64>,
    pub translation: Vec<bool>,
    /// Recurrent state before the first step.
    pub h0: Vec<f64>,
    /// V(s_T) when the segment ends mid-episode, else 0.
    pub bootstrap: f64,
}

impl Trajectory {
    fn with_capacity(t: usize, h0: Vec<f64>) -> Self {
        Self {
            obs: Vec::with_capacity(t),
            resets: Vec::with_capacity(t),
            choices: Vec::with_capacity(t),
            logp: Vec::with_capacity(t),
            values: Vec::with_capacity(t),
            rewards: Vec::with_capacity(t),
            dones: Vec::with_capacity(t),
            truncated: Vec::with_capacity(t),
            collision_labels: Vec::with_capacity(t),
            translation: Vec::with_capacity(t),
            h0,
            bootstrap: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub trajectories: Vec<Trajectory>,
    /// Head masks in force while collecting.
    pub masks: Vec<Vec<bool>>,
    pub spec: ActionSpec,
    /// Episodes that finished during the block.
    pub episodes: Vec<EpisodeSummary>,
}

impl RolloutBatch {
    pub fn n_steps(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }
}

/// Episode statistics of one block. Fields are NaN when no episode finished.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMetrics {
    pub episodes: usize,
    pub node_recall: f64,
    pub edge_recall: f64,
    pub episodic_return: f64,
    pub episode_length: f64,
    /// Pooled over all translations; None without translations.
    pub move_success_rate: Option<f64>,
    pub path_length: f64,
    pub truncation_rate: f64,
}

impl BlockMetrics {
    pub fn from_episodes(eps: &[EpisodeSummary]) -> Self {
        let n = eps.len() as f64;
        let mean = |f: &dyn Fn(&EpisodeSummary) -> f64| {
            if eps.is_empty() {
                f64::NAN
            } else {
                eps.iter().map(f).sum::<f64>() / n
            }
        };
        let translations: usize = eps.iter().map(|e| e.translations).sum();
        let successes: usize = eps.iter().map(|e| e.successful_translations).sum();
        Self {
            episodes: eps.len(),
            node_recall: mean(&|e| e.node_recall),
            edge_recall: mean(&|e| e.edge_recall),
            episodic_return: mean(&|e| e.episodic_return),
            episode_length: mean(&|e| e.length as f64),
            move_success_rate: (translations > 0).then(|| successes as f64 / translations as f64),
            path_length: mean(&|e| e.path_length),
            truncation_rate: mean(&|e| e.truncated as u8 as f64),
        }
    }
}

/// Advances every environment `t` steps with actions sampled from `policy`
/// under `masks`. Finished episodes reset immediately to a fresh start pose.
pub fn collect_rollouts(
    policy: &PolicyParams,
    venv: &mut VecEnv,
    masks: &[Vec<bool>],
    t: usize,
) -> Result<RolloutBatch> {
    let spec = ActionSpec::new(policy.config.variant);
    let mut trajectories = Vec::with_capacity(venv.len());
    let mut episodes = Vec::new();
    for i in 0..venv.len() {
        let env = &mut venv.envs[i];
        let rng = &mut venv.rngs[i];
        if venv.fresh[i] {
            venv.hidden[i].iter_mut().for_each(|v| *v = 0.0);
        }
        let mut h = venv.hidden[i].clone();
        let mut tr = Trajectory::with_capacity(t, h.clone());
        for _ in 0..t {
            if venv.fresh[i] {
                h.iter_mut().for_each(|v| *v = 0.0);
            }
            let obs = std::mem::take(&mut venv.obs[i]);
            let (out, h_next) = policy.step(&obs, &h)?;
            let dist = PolicyDist::new(&out, masks)?;
            let choice = dist.sample(rng, &spec)?;
            let logp = dist.log_prob(&choice, &spec)?;
            let step = env.step(&choice)?;
            tr.resets.push(venv.fresh[i]);
            tr.obs.push(obs);
            tr.choices.push(choice);
            tr.logp.push(logp);
            tr.values.push(out.value);
            tr.rewards.push(step.reward);
            tr.dones.push(step.done || step.truncated);
            tr.truncated.push(step.truncated);
            tr.collision_labels.push(if step.move_failed { 1.0 } else { 0.0 });
            tr.translation.push(step.is_translation);
            h = h_next;
            if let Some(summary) = step.summary {
                episodes.push(summary);
                venv.obs[i] = env.reset(rng);
                venv.fresh[i] = true;
            } else {
                venv.obs[i] = step.observation;
                venv.fresh[i] = false;
            }
        }
        if !venv.fresh[i] {
            tr.bootstrap = policy.step(&venv.obs[i], &h)?.0.value;
        }
        venv.hidden[i] = h;
        trajectories.push(tr);
    }
    Ok(RolloutBatch { trajectories, masks: masks.to_vec(), spec, episodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actionspace::{ActionVariant, StageMask};
    use crate::policynet::PolicyConfig;
    use crate::world::{generate_scene, SceneGenConfig};

    fn setup(n: usize, seed: u64) -> (PolicyParams, VecEnv, Vec<Vec<bool>>) {
        let cfg = Arc::new(EnvConfig { slots: 16, ..Default::default() });
        let scenes: Vec<Arc<SceneContext>> = (1..=2)
            .map(|s| {
                Arc::new(SceneContext::new(&generate_scene(s, &SceneGenConfig::default()).unwrap(), &cfg).unwrap())
            })
            .collect();
        let pc = PolicyConfig { hidden: 16, ..PolicyConfig::new(cfg.layout(), ActionVariant::Sh16) };
        let p = PolicyParams::init(pc, 1);
        let venv = VecEnv::new(&scenes, cfg.clone(), n, 16, seed).unwrap();
        let masks = StageMask::full(&cfg.actions()).head_masks(&cfg.actions());
        (p, venv, masks)
    }

    #[test]
    fn batch_shape_and_episode_accounting() {
        let (p, mut venv, masks) = setup(4, 3);
        let b = collect_rollouts(&p, &mut venv, &masks, 60).unwrap();
        assert_eq!(b.trajectories.len(), 4);
        assert!(b.trajectories.iter().all(|t| t.len() == 60));
        assert_eq!(b.n_steps(), 240);
        for tr in &b.trajectories {
            assert!(tr.resets[0]);
            let mut len = 0;
            for k in 0..tr.len() {
                if tr.resets[k] {
                    len = 0;
                }
                len += 1;
                assert!(len <= 40);
                if tr.truncated[k] {
                    assert_eq!(len, 40);
                    assert!(tr.dones[k]);
                }
                if tr.dones[k] && k + 1 < tr.len() {
                    assert!(tr.resets[k + 1]);
                }
                if !tr.translation[k] {
                    assert_eq!(tr.collision_labels[k], 0.0);
                }
            }
        }
        assert!(b.episodes.iter().all(|e| e.length <= 40));
    }

    #[test]
    fn identical_seeds_identical_batches() {
        let (p, mut a, masks) = setup(3, 11);
        let (_, mut b, _) = setup(3, 11);
        for _ in 0..2 {
            let ba = collect_rollouts(&p, &mut a, &masks, 25).unwrap();
            let bb = collect_rollouts(&p, &mut b, &masks, 25).unwrap();
            assert_eq!(ba, bb);
        }
        let (_, mut c, _) = setup(3, 12);
        let ba = collect_rollouts(&p, &mut a, &masks, 25).unwrap();
        let bc = collect_rollouts(&p, &mut c, &masks, 25).unwrap();
        assert_ne!(ba, bc);
    }

    #[test]
    fn hidden_state_carries_across_blocks() {
        let (p, mut venv, masks) = setup(2, 5);
        let first = collect_rollouts(&p, &mut venv, &masks, 7).unwrap();
        let second = collect_rollouts(&p, &mut venv, &masks, 7).unwrap();
        for (a, b) in first.trajectories.iter().zip(&second.trajectories) {
            if !b.resets[0] {
                let (_, tape) = p.forward(&a.obs, &a.h0, &a.resets).unwrap();
                assert_eq!(tape.final_state().unwrap(), b.h0.as_slice());
            }
        }
    }
}
