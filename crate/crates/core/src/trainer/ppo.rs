use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::gae::{gae, normalize};
use super::losses::{collision_aux_loss, collision_aux_loss_grad};
use super::rollout::RolloutBatch;
use super::TrainerConfig;
use crate::error::{Error, Result};
use crate::policynet::{clip_grad_norm, Adam, OutputGrad, PolicyDist, PolicyParams, StepOutput, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub collision_loss: f64,
    /// Mean of logp_old - logp_new over the last epoch run.
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub epochs_run: usize,
    pub grad_norm: f64,
}

/// Runs up to `k` epochs; stops after any epoch whose mean approximate KL
/// exceeds `kl_target`. Returns the number of epochs run.
pub fn run_epochs<F: FnMut(usize) -> Result<f64>>(k: usize, kl_target: f64, mut epoch: F) -> Result<usize> {
    for e in 0..k {
        if epoch(e)? > kl_target {
            return Ok(e + 1);
        }
    }
    Ok(k)
}

/// Per-batch training targets.
pub(crate) struct Targets {
    pub advantages: Vec<Vec<f64>>,
    pub returns: Vec<Vec<f64>>,
}

pub(crate) fn ppo_targets(batch: &RolloutBatch, cfg: &TrainerConfig) -> Targets {
    let mut advantages = Vec::with_capacity(batch.trajectories.len());
    let mut returns = Vec::with_capacity(batch.trajectories.len());
    for tr in &batch.trajectories {
        let (a, r) = gae(&tr.rewards, &tr.values, &tr.dones, tr.bootstrap, cfg.gamma, cfg.gae_lambda);
        advantages.push(a);
        returns.push(r);
    }
    let mut flat: Vec<f64> = advantages.iter().flatten().copied().collect();
    normalize(&mut flat);
    let mut k = 0;
    for a in advantages.iter_mut() {
        for v in a.iter_mut() {
            *v = flat[k];
            k += 1;
        }
    }
    Targets { advantages, returns }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct MinibatchStats {
    pub steps: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub collision_loss: f64,
    pub kl_sum: f64,
    pub clipped: usize,
    pub max_ratio_dev: f64,
}

impl MinibatchStats {
    pub fn loss(&self, cfg: &TrainerConfig, entropy_coef: f64) -> f64 {
        self.policy_loss + cfg.value_coef * self.value_loss - entropy_coef * self.entropy
            + cfg.aux_coef * self.collision_loss
    }
}

/// Loss gradient of one minibatch of whole trajectories. Every term is a
/// mean over the minibatch's steps (collision: over its translation steps).
pub(crate) fn ppo_minibatch_grad(
    params: &PolicyParams,
    batch: &RolloutBatch,
    targets: &Targets,
    members: &[usize],
    cfg: &TrainerConfig,
    entropy_coef: f64,
) -> Result<(Vec<f64>, MinibatchStats)> {
    let mut runs: Vec<(Vec<StepOutput>, Tape)> = Vec::with_capacity(members.len());
    for &i in members {
        let tr = &batch.trajectories[i];
        runs.push(params.forward(&tr.obs, &tr.h0, &tr.resets)?);
    }
    let n: usize = members.iter().map(|&i| batch.trajectories[i].len()).sum();
    let inv_n = 1.0 / n as f64;
    let mut st = MinibatchStats { steps: n, ..Default::default() };

    let mut coll_logits = Vec::new();
    let mut coll_labels = Vec::new();
    let mut coll_mask = Vec::new();
    if params.config.has_collision_head() {
        for (&i, (outs, _)) in members.iter().zip(&runs) {
            let tr = &batch.trajectories[i];
            for (t, o) in outs.iter().enumerate() {
                coll_logits.push(o.collision_logit.unwrap_or(0.0));
                coll_labels.push(tr.collision_labels[t]);
                coll_mask.push(tr.translation[t]);
            }
        }
        st.collision_loss = collision_aux_loss(&coll_logits, &coll_labels, &coll_mask);
    }
    let coll_grad = if params.config.has_collision_head() {
        collision_aux_loss_grad(&coll_logits, &coll_labels, &coll_mask)
    } else {
        Vec::new()
    };

    let eps = cfg.clip;
    let mut grad = params.zero_grad();
    let mut flat = 0;
    for (&i, (outs, tape)) in members.iter().zip(&runs) {
        let tr = &batch.trajectories[i];
        let adv = &targets.advantages[i];
        let ret = &targets.returns[i];
        let mut dout = Vec::with_capacity(outs.len());
        for (t, out) in outs.iter().enumerate() {
            let dist = PolicyDist::new(out, &batch.masks)?;
            let logp = dist.log_prob(&tr.choices[t], &batch.spec)?;
            let ratio = (logp - tr.logp[t]).exp();
            let a = adv[t];
            let clipped_ratio = ratio.clamp(1.0 - eps, 1.0 + eps);
            let surr = (ratio * a).min(clipped_ratio * a);
            st.policy_loss -= surr * inv_n;
            st.kl_sum += tr.logp[t] - logp;
            st.max_ratio_dev = st.max_ratio_dev.max((ratio - 1.0).abs());
            if (ratio - 1.0).abs() > eps {
                st.clipped += 1;
            }
            // d(-surr)/dlogp is -A * ratio where the unclipped branch is active.
            let active = ratio * a <= clipped_ratio * a;
            let dlogp = if active { -a * ratio * inv_n } else { 0.0 };

            let ent = dist.entropy();
            st.entropy += ent * inv_n;

            let v = out.value;
            let r = ret[t];
            let (vloss, dv) = if cfg.value_clip {
                let v_old = tr.values[t];
                let v_clip = v_old + (v - v_old).clamp(-eps, eps);
                let (lu, lc) = ((v - r).powi(2), (v_clip - r).powi(2));
                if lu >= lc {
                    (lu, 2.0 * (v - r))
                } else {
                    let pass = ((v - v_old).abs() < eps) as u8 as f64;
                    (lc, 2.0 * (v_clip - r) * pass)
                }
            } else {
                ((v - r).powi(2), 2.0 * (v - r))
            };
            st.value_loss += vloss * inv_n;

            let mut g = OutputGrad::zeros(out);
            let glp = dist.grad_log_prob(&tr.choices[t], &batch.spec);
            let gent = dist.grad_entropy();
            for k in 0..g.logits.len() {
                for j in 0..g.logits[k].len() {
                    g.logits[k][j] = dlogp * glp[k][j] - entropy_coef * inv_n * gent[k][j];
                }
            }
            g.value = cfg.value_coef * dv * inv_n;
            if !coll_grad.is_empty() {
                g.collision = cfg.aux_coef * coll_grad[flat];
            }
            flat += 1;
            dout.push(g);
        }
        params.backward(tape, &dout, &mut grad)?;
    }
    let loss = st.loss(cfg, entropy_coef);
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!(
            "ppo loss {loss} (policy {}, value {}, entropy {}, collision {})",
            st.policy_loss, st.value_loss, st.entropy, st.collision_loss
        )));
    }
    Ok((grad, st))
}

/// K epochs of clipped-surrogate updates over trajectory-aligned minibatches
/// with approximate-KL early stopping.
pub fn ppo_update(
    params: &mut PolicyParams,
    adam: &mut Adam,
    batch: &RolloutBatch,
    cfg: &TrainerConfig,
    entropy_coef: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PpoStats> {
    let targets = ppo_targets(batch, cfg);
    let b = batch.trajectories.len();
    let per = b.div_ceil(cfg.minibatches.max(1));
    let mut order: Vec<usize> = (0..b).collect();
    let mut stats = PpoStats::default();
    let epochs_run = run_epochs(cfg.epochs, cfg.kl_target, |_| {
        order.shuffle(rng);
        let mut acc = MinibatchStats::default();
        let mut grad_norm = 0.0;
        for members in order.chunks(per) {
            let (mut grad, st) = ppo_minibatch_grad(params, batch, &targets, members, cfg, entropy_coef)?;
            grad_norm = clip_grad_norm(&mut grad, cfg.grad_clip);
            adam.step(&mut params.theta, &grad);
            params.check_finite()?;
            let w = st.steps as f64;
            acc.steps += st.steps;
            acc.policy_loss += st.policy_loss * w;
            acc.value_loss += st.value_loss * w;
            acc.entropy += st.entropy * w;
            acc.collision_loss += st.collision_loss * w;
            acc.kl_sum += st.kl_sum;
            acc.clipped += st.clipped;
        }
        let n = acc.steps.max(1) as f64;
        stats = PpoStats {
            policy_loss: acc.policy_loss / n,
            value_loss: acc.value_loss / n,
            entropy: acc.entropy / n,
            collision_loss: acc.collision_loss / n,
            approx_kl: acc.kl_sum / n,
            clip_fraction: acc.clipped as f64 / n,
            epochs_run: 0,
            grad_norm,
        };
        Ok(stats.approx_kl)
    })?;
    stats.epochs_run = epochs_run;
    Ok(stats)
}

#[cfg(test)]
pub(crate) mod tests {
    use std::sync::Arc;

    use rand::SeedableRng;

    use super::*;
    use crate::actionspace::{ActionVariant, StageMask};
    use crate::env::{EnvConfig, SceneContext};
    use crate::policynet::PolicyConfig;
    use crate::trainer::rollout::{collect_rollouts, VecEnv};
    use crate::world::{generate_scene, SceneGenConfig};

    pub(crate) fn small_batch(variant: ActionVariant, depth: bool, n: usize, t: usize) -> (PolicyParams, RolloutBatch) {
        let cfg = Arc::new(EnvConfig { variant, depth, slots: 8, ..Default::default() });
        let scene = generate_scene(3, &SceneGenConfig::default()).unwrap();
        let ctx = Arc::new(SceneContext::new(&scene, &cfg).unwrap());
        let pc = PolicyConfig {
            hidden: 8,
            encoder_dim: 6,
            action_embed: 6,
            stag_hidden: 6,
            d_stag: 4,
            ..PolicyConfig::new(cfg.layout(), variant)
        };
        let p = PolicyParams::init_with_gains(pc, 2, 1.0, 1.0);
        let mut venv = VecEnv::new(&[ctx], cfg.clone(), n, 8, 4).unwrap();
        let spec = cfg.actions();
        let batch = collect_rollouts(&p, &mut venv, &StageMask::full(&spec).head_masks(&spec), t).unwrap();
        (p, batch)
    }

    #[test]
    fn first_minibatch_ratio_is_one() {
        let (p, batch) = small_batch(ActionVariant::Mh, true, 4, 12);
        let cfg = TrainerConfig::ppo(ActionVariant::Mh);
        let targets = ppo_targets(&batch, &cfg);
        let (_, st) = ppo_minibatch_grad(&p, &batch, &targets, &[0, 1], &cfg, 0.05).unwrap();
        assert_eq!(st.max_ratio_dev, 0.0);
        assert_eq!(st.clipped, 0);
        assert_eq!(st.kl_sum, 0.0);
    }

    #[test]
    fn kl_above_target_skips_remaining_epochs() {
        let mut seen = Vec::new();
        let n = run_epochs(4, 0.01, |e| {
            seen.push(e);
            Ok(0.02)
        })
        .unwrap();
        assert_eq!((n, seen), (1, vec![0]));
        assert_eq!(run_epochs(4, 0.01, |_| Ok(0.005)).unwrap(), 4);
        assert_eq!(run_epochs(4, 0.01, |e| Ok(if e == 2 { 0.5 } else { 0.0 })).unwrap(), 3);
    }

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn unclipped_ppo_matches_vanilla_policy_gradient() {
        let (p, batch) = small_batch(ActionVariant::Sh16, false, 3, 15);
        let cfg = TrainerConfig {
            clip: 1e9,
            epochs: 1,
            value_clip: false,
            value_coef: 0.0,
            entropy_coef: 0.0,
            aux_coef: 0.0,
            ..TrainerConfig::ppo(ActionVariant::Sh16)
        };
        let targets = ppo_targets(&batch, &cfg);
        let (g_ppo, _) = ppo_minibatch_grad(&p, &batch, &targets, &[0, 1, 2], &cfg, 0.0).unwrap();
        // Vanilla -mean(A * grad log pi), accumulated independently.
        let mut g_pg = p.zero_grad();
        let n = batch.n_steps() as f64;
        for (i, tr) in batch.trajectories.iter().enumerate() {
            let (outs, tape) = p.forward(&tr.obs, &tr.h0, &tr.resets).unwrap();
            let dout: Vec<OutputGrad> = outs
                .iter()
                .enumerate()
                .map(|(t, o)| {
                    let d = PolicyDist::new(o, &batch.masks).unwrap();
                    let glp = d.grad_log_prob(&tr.choices[t], &batch.spec);
                    OutputGrad {
                        logits: glp
                            .iter()
                            .map(|h| h.iter().map(|g| -targets.advantages[i][t] * g / n).collect())
                            .collect(),
                        ..OutputGrad::zeros(o)
                    }
                })
                .collect();
            p.backward(&tape, &dout, &mut g_pg).unwrap();
        }
        assert!(cosine(&g_ppo, &g_pg) > 0.999);
    }

    #[test]
    fn no_gradient_reaches_masked_logits() {
        let (p, mut batch) = small_batch(ActionVariant::Sh504, false, 2, 10);
        let spec = batch.spec.clone();
        let mask = crate::actionspace::stage_mask(1, &spec).unwrap();
        batch.masks = mask.head_masks(&spec);
        for tr in batch.trajectories.iter_mut() {
            for c in tr.choices.iter_mut() {
                *c = crate::actionspace::ActionChoice::new(3, 3);
            }
        }
        let cfg = TrainerConfig::ppo(ActionVariant::Sh504);
        let targets = ppo_targets(&batch, &cfg);
        let (grad, _) = ppo_minibatch_grad(&p, &batch, &targets, &[0, 1], &cfg, 0.3).unwrap();
        let head = &p.layout.heads[0];
        let atom = mask.atom_mask();
        for (row, &ok) in atom.iter().enumerate() {
            let w = &grad[head.w + row * head.inp..head.w + (row + 1) * head.inp];
            let b = grad[head.b + row];
            assert!(w.iter().all(|v| v.is_finite()) && b.is_finite());
            if !ok {
                assert!(w.iter().all(|&v| v == 0.0) && b == 0.0, "masked atom {row} received gradient");
            }
        }
    }

    #[test]
    fn ppo_update_is_deterministic_and_finite() {
        let (p0, batch) = small_batch(ActionVariant::Sh16, true, 4, 12);
        let cfg = TrainerConfig { minibatches: 2, ..TrainerConfig::ppo(ActionVariant::Sh16) };
        let run = || {
            let mut p = p0.clone();
            let mut adam = Adam::new(p.len(), cfg.lr);
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let st = ppo_update(&mut p, &mut adam, &batch, &cfg, 0.05, &mut rng).unwrap();
            (p, st)
        };
        let (a, sa) = run();
        let (b, sb) = run();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert!(sa.epochs_run >= 1 && sa.epochs_run <= 4);
        assert_ne!(a.theta, p0.theta);
        assert!((0.0..=1.0).contains(&sa.clip_fraction));
    }
}
