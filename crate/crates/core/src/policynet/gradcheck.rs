use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{OutputGrad, PolicyConfig, PolicyDist, PolicyParams};
use crate::actionspace::{ActionChoice, ActionSpec, StageMask};
use crate::error::Result;

/// Random 3-term test loss over a short sequence: advantage-weighted
/// log-probabilities, an entropy bonus, squared value error and the
/// collision cross-entropy.
struct Problem {
    obs: Vec<Vec<f64>>,
    resets: Vec<bool>,
    choices: Vec<ActionChoice>,
    advantages: Vec<f64>,
    returns: Vec<f64>,
    labels: Vec<f64>,
    masks: Vec<Vec<bool>>,
    spec: ActionSpec,
}

fn loss_and_grad(p: &PolicyParams, prob: &Problem) -> Result<(f64, Vec<OutputGrad>, super::Tape)> {
    let h0: Vec<f64> = (0..p.config.hidden).map(|i| 0.05 * (i as f64).sin()).collect();
    let (outs, tape) = p.forward(&prob.obs, &h0, &prob.resets)?;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(outs.len());
    for (t, out) in outs.iter().enumerate() {
        let dist = PolicyDist::new(out, &prob.masks)?;
        let lp = dist.log_prob(&prob.choices[t], &prob.spec)?;
        let ent = dist.entropy();
        let verr = out.value - prob.returns[t];
        loss += -prob.advantages[t] * lp - 0.05 * ent + 0.5 * verr * verr;
        let mut g = OutputGrad::zeros(out);
        let glp = dist.grad_log_prob(&prob.choices[t], &prob.spec);
        let gent = dist.grad_entropy();
        for k in 0..g.logits.len() {
            for j in 0..g.logits[k].len() {
                g.logits[k][j] = -prob.advantages[t] * glp[k][j] - 0.05 * gent[k][j];
            }
        }
        g.value = verr;
        if let Some(z) = out.collision_logit {
            let y = prob.labels[t];
            loss += 0.3 * (z.max(0.0) - z * y + (-z.abs()).exp().ln_1p());
            g.collision = 0.3 * (1.0 / (1.0 + (-z).exp()) - y);
        }
        grads.push(g);
    }
    Ok((loss, grads, tape))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub n_params: usize,
}

/// Compares analytic gradients against central differences for every
/// parameter on a random `steps`-long sequence.
pub fn gradcheck(cfg: &PolicyConfig, mask: Option<&StageMask>, steps: usize, seed: u64) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p0 = PolicyParams::init_with_gains(cfg.clone(), seed, 1.0, 1.0);
    let mut p = p0.clone();
    // Non-zero biases so every code path is exercised.
    for l in p0.layout.blocks() {
        for b in &mut p.theta[l.b..l.b + l.out] {
            *b = rng.gen_range(-0.1..0.1);
        }
    }
    let spec = ActionSpec::new(cfg.variant);
    let masks = match mask {
        Some(m) => m.head_masks(&spec),
        None => StageMask::full(&spec).head_masks(&spec),
    };
    let obs = (0..steps).map(|_| (0..cfg.layout.dim()).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let mut resets = vec![false; steps];
    if steps > 2 {
        resets[steps - 1] = true;
    }
    let mut choices = Vec::with_capacity(steps);
    for _ in 0..steps {
        let idx: Vec<usize> = masks
            .iter()
            .map(|m| {
                let allowed: Vec<usize> = (0..m.len()).filter(|&i| m[i]).collect();
                allowed[rng.gen_range(0..allowed.len())]
            })
            .collect();
        choices.push(PolicyDist::choice(&idx, &spec)?);
    }
    let prob = Problem {
        obs,
        resets,
        choices,
        advantages: (0..steps).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        returns: (0..steps).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        labels: (0..steps).map(|_| (rng.gen::<bool>()) as u8 as f64).collect(),
        masks,
        spec,
    };

    let (_, dout, tape) = loss_and_grad(&p, &prob)?;
    let mut analytic = p.zero_grad();
    p.backward(&tape, &dout, &mut analytic)?;

    // Fourth-order central stencil.
    let eps = 1e-4;
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    for i in 0..p.theta.len() {
        let orig = p.theta[i];
        let mut at = |h: f64| -> Result<f64> {
            p.theta[i] = orig + h;
            Ok(loss_and_grad(&p, &prob)?.0)
        };
        let numeric = (8.0 * (at(eps)? - at(-eps)?) - (at(2.0 * eps)? - at(-2.0 * eps)?)) / (12.0 * eps);
        p.theta[i] = orig;
        let abs = (numeric - analytic[i]).abs();
        let rel = abs / numeric.abs().max(analytic[i].abs()).max(1e-6);
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(rel);
    }
    Ok(GradcheckReport { max_rel_error: max_rel, max_abs_error: max_abs, n_params: p.theta.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actionspace::{stage_mask, ActionVariant};
    use crate::features::ObservationLayout;

    fn small(depth: bool, variant: ActionVariant) -> PolicyConfig {
        let layout = ObservationLayout::new(depth, 4, 3, &ActionSpec::new(variant));
        PolicyConfig {
            hidden: 6,
            encoder_dim: 4,
            action_embed: 5,
            stag_hidden: 4,
            d_stag: 3,
            ..PolicyConfig::new(layout, variant)
        }
    }

    #[test]
    fn sh16_gradients() {
        let r = gradcheck(&small(true, ActionVariant::Sh16), None, 3, 1).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn masked_mh_gradients() {
        let cfg = small(false, ActionVariant::Mh);
        let mask = stage_mask(2, &ActionSpec::new(ActionVariant::Mh)).unwrap();
        let r = gradcheck(&cfg, Some(&mask), 3, 2).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn doubling_the_loss_doubles_gradients() {
        let cfg = small(true, ActionVariant::Sh16);
        let p = PolicyParams::init_with_gains(cfg.clone(), 3, 1.0, 1.0);
        let obs = vec![vec![0.5; cfg.layout.dim()]; 2];
        let (outs, tape) = p.forward(&obs, &p.initial_state(), &[true, false]).unwrap();
        let dout: Vec<OutputGrad> = outs
            .iter()
            .map(|o| OutputGrad {
                logits: o.logits.iter().map(|l| vec![0.3; l.len()]).collect(),
                value: 0.7,
                collision: -0.2,
            })
            .collect();
        let doubled: Vec<OutputGrad> = dout
            .iter()
            .map(|g| OutputGrad {
                logits: g.logits.iter().map(|l| l.iter().map(|v| 2.0 * v).collect()).collect(),
                value: 2.0 * g.value,
                collision: 2.0 * g.collision,
            })
            .collect();
        let mut g1 = p.zero_grad();
        let mut g2 = p.zero_grad();
        p.backward(&tape, &dout, &mut g1).unwrap();
        p.backward(&tape, &doubled, &mut g2).unwrap();
        assert!(g1.iter().zip(&g2).all(|(a, b)| 2.0 * a == *b));
    }

    #[test]
    fn value_only_loss_leaves_policy_heads_untouched() {
        let cfg = small(false, ActionVariant::Sh16);
        let p = PolicyParams::init_with_gains(cfg.clone(), 4, 1.0, 1.0);
        let obs = vec![vec![0.5; cfg.layout.dim()]; 2];
        let (outs, tape) = p.forward(&obs, &p.initial_state(), &[true, false]).unwrap();
        let dout: Vec<OutputGrad> = outs.iter().map(|o| OutputGrad { value: 1.0, ..OutputGrad::zeros(o) }).collect();
        let mut g = p.zero_grad();
        p.backward(&tape, &dout, &mut g).unwrap();
        let head = &p.layout.heads[0];
        assert!(g[head.w..head.b + head.out].iter().all(|&v| v == 0.0));
    }
}
