use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actionspace::{ActionSpec, ActionVariant, StageMask};
use crate::env::{Env, EnvConfig, SceneContext};
use crate::error::{Error, Result};
use crate::expert::Demonstration;
use crate::policynet::{clip_grad_norm, Adam, OutputGrad, PolicyDist, PolicyParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Sequences per gradient step.
    pub batch: usize,
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for IlConfig {
    fn default() -> Self {
        Self { epochs: 20, lr: 1e-3, batch: 8, grad_clip: 1.0, seed: 0 }
    }
}

/// Observation sequence with the expert's single-head atom indices.
#[derive(Debug, Clone, PartialEq)]
pub struct IlSequence {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlReport {
    pub sequences: usize,
    pub samples: usize,
    pub final_loss: f64,
    pub accuracy: f64,
}

/// Regenerates the observations of a demonstration by replaying its actions.
pub fn replay_demonstration(demo: &Demonstration, ctx: Arc<SceneContext>, env_cfg: &EnvConfig) -> Result<IlSequence> {
    if env_cfg.variant != ActionVariant::Sh16 {
        return Err(Error::Config("demonstrations are recorded in the 16-action space".into()));
    }
    let cfg = EnvConfig { max_steps: demo.steps.len() + 1, ..env_cfg.clone() };
    let spec = cfg.actions();
    let mut env = Env::new(ctx, Arc::new(cfg));
    let mut obs = env.reset_to(demo.start);
    let mut seq =
        IlSequence { obs: Vec::with_capacity(demo.steps.len()), actions: Vec::with_capacity(demo.steps.len()) };
    for step in &demo.steps {
        if env.pose() != Some(step.pose) {
            return Err(Error::InvalidPose(format!("replay of {} diverged from the recorded poses", demo.scene_id)));
        }
        seq.obs.push(obs);
        seq.actions.push(step.action);
        let out = env.step(&spec.atom_choice(step.action)?)?;
        obs = out.observation;
    }
    Ok(seq)
}

fn sequence_grad(
    params: &PolicyParams,
    seq: &IlSequence,
    masks: &[Vec<bool>],
    scale: f64,
    grad: &mut [f64],
) -> Result<(f64, usize)> {
    let mut resets = vec![false; seq.obs.len()];
    if let Some(r) = resets.first_mut() {
        *r = true;
    }
    let (outs, tape) = params.forward(&seq.obs, &params.initial_state(), &resets)?;
    let mut loss = 0.0;
    let mut correct = 0;
    let mut dout = Vec::with_capacity(outs.len());
    for (out, &a) in outs.iter().zip(&seq.actions) {
        let d = PolicyDist::new(out, masks)?;
        loss -= d.heads[0].log_prob(a)?;
        correct += (d.heads[0].argmax() == a) as usize;
        let g = d.heads[0].grad_log_prob(a);
        dout.push(OutputGrad { logits: vec![g.iter().map(|v| -v * scale).collect()], ..OutputGrad::zeros(out) });
    }
    params.backward(&tape, &dout, grad)?;
    Ok((loss, correct))
}

/// Greedy-action agreement with the expert.
pub fn il_accuracy(params: &PolicyParams, seqs: &[IlSequence]) -> Result<f64> {
    let spec = ActionSpec::new(params.config.variant);
    let masks = StageMask::full(&spec).head_masks(&spec);
    let mut correct = 0;
    let mut total = 0;
    for s in seqs {
        let mut grad = params.zero_grad();
        correct += sequence_grad(params, s, &masks, 0.0, &mut grad)?.1;
        total += s.actions.len();
    }
    Ok(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
}

/// Behaviour cloning: cross-entropy on the expert's single-head actions over
/// whole sequences replayed from a zero recurrent state.
pub fn il_pretrain_sequences(params: &mut PolicyParams, seqs: &[IlSequence], cfg: &IlConfig) -> Result<IlReport> {
    if params.config.variant != ActionVariant::Sh16 {
        return Err(Error::Config("imitation pretraining targets the 16-action single-head policy".into()));
    }
    let samples: usize = seqs.iter().map(|s| s.actions.len()).sum();
    if samples == 0 {
        return Err(Error::EmptyDataset);
    }
    let spec = ActionSpec::new(params.config.variant);
    let masks = StageMask::full(&spec).head_masks(&spec);
    let mut adam = Adam::new(params.len(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let mut final_loss = f64::NAN;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch.max(1)) {
            let n: usize = chunk.iter().map(|&i| seqs[i].actions.len()).sum();
            if n == 0 {
                continue;
            }
            let mut grad = params.zero_grad();
            for &i in chunk {
                epoch_loss += sequence_grad(params, &seqs[i], &masks, 1.0 / n as f64, &mut grad)?.0;
            }
            clip_grad_norm(&mut grad, cfg.grad_clip);
            adam.step(&mut params.theta, &grad);
            params.check_finite()?;
        }
        final_loss = epoch_loss / samples as f64;
        if !final_loss.is_finite() {
            return Err(Error::NonFinite(format!("imitation loss {final_loss}")));
        }
    }
    let accuracy = il_accuracy(params, seqs)?;
    Ok(IlReport { sequences: seqs.len(), samples, final_loss, accuracy })
}

/// Replays every demonstration on its scene and runs behaviour cloning.
pub fn il_pretrain(
    params: &mut PolicyParams,
    demos: &[Demonstration],
    scenes: &HashMap<String, Arc<SceneContext>>,
    env_cfg: &EnvConfig,
    cfg: &IlConfig,
) -> Result<IlReport> {
    if demos.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut seqs = Vec::with_capacity(demos.len());
    for d in demos {
        let ctx = scenes.get(&d.scene_id).ok_or_else(|| Error::Config(format!("no scene named {}", d.scene_id)))?;
        seqs.push(replay_demonstration(d, ctx.clone(), env_cfg)?);
    }
    il_pretrain_sequences(params, &seqs, cfg)
}

/// Copies every block whose name and shape match. Returns the number copied.
pub fn transfer_shared(from: &PolicyParams, to: &mut PolicyParams) -> usize {
    let src: Vec<_> = from.layout.blocks().into_iter().cloned().collect();
    let dst: Vec<_> = to.layout.blocks().into_iter().cloned().collect();
    let mut copied = 0;
    for d in &dst {
        if let Some(s) = src.iter().find(|s| s.name == d.name && s.inp == d.inp && s.out == d.out) {
            let n = s.len();
            to.theta[d.w..d.w + n].copy_from_slice(&from.theta[s.w..s.w + n]);
            copied += 1;
        }
    }
    copied
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ObservationLayout;
    use crate::policynet::PolicyConfig;
    use rand::Rng;

    fn tiny(variant: ActionVariant) -> PolicyParams {
        let layout = ObservationLayout::new(false, 4, 3, &ActionSpec::new(variant));
        PolicyParams::init(
            PolicyConfig {
                hidden: 8,
                encoder_dim: 4,
                action_embed: 4,
                stag_hidden: 4,
                d_stag: 3,
                ..PolicyConfig::new(layout, variant)
            },
            5,
        )
    }

    #[test]
    fn memorises_a_repeated_pair() {
        let mut p = tiny(ActionVariant::Sh16);
        let d = p.config.layout.dim();
        let obs = vec![(0..d).map(|i| (i % 3) as f64 / 3.0).collect::<Vec<f64>>(); 10];
        let seqs = vec![IlSequence { obs, actions: vec![7; 10] }; 4];
        let cfg = IlConfig { epochs: 200, lr: 1e-2, ..Default::default() };
        let rep = il_pretrain_sequences(&mut p, &seqs, &cfg).unwrap();
        assert_eq!(rep.accuracy, 1.0);
        let (out, _) = p.step(&seqs[0].obs[0], &p.initial_state()).unwrap();
        let spec = ActionSpec::new(ActionVariant::Sh16);
        let dist = PolicyDist::new(&out, &StageMask::full(&spec).head_masks(&spec)).unwrap();
        assert!(dist.heads[0].prob(7) > 0.99);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let mut p = tiny(ActionVariant::Sh16);
        assert!(matches!(il_pretrain_sequences(&mut p, &[], &IlConfig::default()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn seeded_training_is_deterministic() {
        let p0 = tiny(ActionVariant::Sh16);
        let d = p0.config.layout.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let seqs: Vec<IlSequence> = (0..5)
            .map(|_| IlSequence {
                obs: (0..6).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect(),
                actions: (0..6).map(|_| rng.gen_range(0..16)).collect(),
            })
            .collect();
        let cfg = IlConfig { epochs: 3, seed: 9, ..Default::default() };
        let (mut a, mut b) = (p0.clone(), p0.clone());
        let ra = il_pretrain_sequences(&mut a, &seqs, &cfg).unwrap();
        let rb = il_pretrain_sequences(&mut b, &seqs, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn transfer_copies_matching_blocks_only() {
        let src = tiny(ActionVariant::Sh16);
        let mut dst = PolicyParams::zeros(tiny(ActionVariant::Mh).config);
        let copied = transfer_shared(&src, &mut dst);
        // Every block except the policy heads (and the action embedding,
        // whose input width differs) carries over.
        assert_eq!(copied, src.layout.blocks().len() - 2);
        let l = &dst.layout.gru_h;
        assert_eq!(&dst.theta[l.w..l.w + l.len()], &src.theta[src.layout.gru_h.w..src.layout.gru_h.w + l.len()]);
        assert!(dst.theta[dst.layout.heads[0].w..dst.layout.heads[0].b].iter().all(|&v| v == 0.0));
    }
}
