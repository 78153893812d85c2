use super::gae::{discounted_returns, normalize};
use super::losses::{collision_aux_loss, collision_aux_loss_grad};
use super::rollout::RolloutBatch;
use super::TrainerConfig;
use crate::error::{Error, Result};
use crate::policynet::{clip_grad_norm, Adam, OutputGrad, PolicyDist, PolicyParams};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReinforceStats {
    pub policy_loss: f64,
    pub entropy: f64,
    pub collision_loss: f64,
    pub grad_norm: f64,
}

/// Batch-normalised discounted returns, one vector per trajectory.
pub(crate) fn reinforce_returns(batch: &RolloutBatch, gamma: f64) -> Vec<Vec<f64>> {
    let raw: Vec<Vec<f64>> =
        batch.trajectories.iter().map(|t| discounted_returns(&t.rewards, &t.dones, gamma)).collect();
    let mut flat: Vec<f64> = raw.iter().flatten().copied().collect();
    normalize(&mut flat);
    let mut k = 0;
    raw.iter()
        .map(|r| {
            let out = flat[k..k + r.len()].to_vec();
            k += r.len();
            out
        })
        .collect()
}

/// Gradient of -mean(logpi * G) - c_ent * mean(H) + c_aux * collision loss.
pub(crate) fn reinforce_grad(
    params: &PolicyParams,
    batch: &RolloutBatch,
    returns: &[Vec<f64>],
    cfg: &TrainerConfig,
    entropy_coef: f64,
) -> Result<(Vec<f64>, ReinforceStats)> {
    let n = batch.n_steps() as f64;
    let mut runs = Vec::with_capacity(batch.trajectories.len());
    for tr in &batch.trajectories {
        runs.push(params.forward(&tr.obs, &tr.h0, &tr.resets)?);
    }
    let mut st = ReinforceStats::default();
    let has_coll = params.config.has_collision_head();
    let (mut z, mut y, mut m) = (Vec::new(), Vec::new(), Vec::new());
    if has_coll {
        for (tr, (outs, _)) in batch.trajectories.iter().zip(&runs) {
            for (t, o) in outs.iter().enumerate() {
                z.push(o.collision_logit.unwrap_or(0.0));
                y.push(tr.collision_labels[t]);
                m.push(tr.translation[t]);
            }
        }
        st.collision_loss = collision_aux_loss(&z, &y, &m);
    }
    let coll_grad = if has_coll { collision_aux_loss_grad(&z, &y, &m) } else { Vec::new() };

    let mut grad = params.zero_grad();
    let mut flat = 0;
    for ((tr, (outs, tape)), ret) in batch.trajectories.iter().zip(&runs).zip(returns) {
        let mut dout = Vec::with_capacity(outs.len());
        for (t, out) in outs.iter().enumerate() {
            let dist = PolicyDist::new(out, &batch.masks)?;
            let logp = dist.log_prob(&tr.choices[t], &batch.spec)?;
            st.policy_loss -= logp * ret[t] / n;
            st.entropy += dist.entropy() / n;
            let glp = dist.grad_log_prob(&tr.choices[t], &batch.spec);
            let gent = dist.grad_entropy();
            let mut g = OutputGrad::zeros(out);
            for k in 0..g.logits.len() {
                for j in 0..g.logits[k].len() {
                    g.logits[k][j] = -ret[t] / n * glp[k][j] - entropy_coef / n * gent[k][j];
                }
            }
            if has_coll {
                g.collision = cfg.aux_coef * coll_grad[flat];
            }
            flat += 1;
            dout.push(g);
        }
        params.backward(tape, &dout, &mut grad)?;
    }
    let loss = st.policy_loss - entropy_coef * st.entropy + cfg.aux_coef * st.collision_loss;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!(
            "reinforce loss {loss} (policy {}, entropy {}, collision {})",
            st.policy_loss, st.entropy, st.collision_loss
        )));
    }
    Ok((grad, st))
}

/// A single clipped Adam step on the whole batch.
pub fn reinforce_update(
    params: &mut PolicyParams,
    adam: &mut Adam,
    batch: &RolloutBatch,
    cfg: &TrainerConfig,
    entropy_coef: f64,
) -> Result<ReinforceStats> {
    let returns = reinforce_returns(batch, cfg.gamma);
    let (mut grad, mut st) = reinforce_grad(params, batch, &returns, cfg, entropy_coef)?;
    st.grad_norm = clip_grad_norm(&mut grad, cfg.grad_clip);
    adam.step(&mut params.theta, &grad);
    params.check_finite()?;
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actionspace::ActionVariant;
    use crate::trainer::ppo::tests::small_batch;

    #[test]
    fn equal_returns_give_no_policy_gradient() {
        let (p, mut batch) = small_batch(ActionVariant::Sh16, false, 2, 10);
        for tr in batch.trajectories.iter_mut() {
            tr.rewards.iter_mut().for_each(|r| *r = 0.25);
            tr.dones.iter_mut().for_each(|d| *d = true);
        }
        let cfg = TrainerConfig::reinforce();
        let ret = reinforce_returns(&batch, cfg.gamma);
        assert!(ret.iter().flatten().all(|&g| g == 0.0));
        let (grad, st) = reinforce_grad(&p, &batch, &ret, &cfg, 0.0).unwrap();
        assert_eq!(st.policy_loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn entropy_step_increases_entropy() {
        let (mut p, batch) = small_batch(ActionVariant::Mh, false, 2, 10);
        let cfg = TrainerConfig { aux_coef: 0.0, ..TrainerConfig::reinforce() };
        let zero: Vec<Vec<f64>> = batch.trajectories.iter().map(|t| vec![0.0; t.len()]).collect();
        let (g, before) = reinforce_grad(&p, &batch, &zero, &cfg, 1.0).unwrap();
        for (th, gi) in p.theta.iter_mut().zip(&g) {
            *th -= 1e-3 * gi;
        }
        let (_, after) = reinforce_grad(&p, &batch, &zero, &cfg, 1.0).unwrap();
        assert!(after.entropy > before.entropy);
    }

    #[test]
    fn one_update_changes_parameters_once() {
        let (p0, batch) = small_batch(ActionVariant::Sh16, true, 2, 10);
        let cfg = TrainerConfig::reinforce();
        let mut p = p0.clone();
        let mut adam = Adam::new(p.len(), cfg.lr);
        reinforce_update(&mut p, &mut adam, &batch, &cfg, 0.05).unwrap();
        assert_eq!(adam.t, 1);
        assert_ne!(p.theta, p0.theta);
    }
}
