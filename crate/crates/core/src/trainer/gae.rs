/// Generalised advantage estimation over one trajectory segment.
///
/// `dones[t]` marks the last step of an episode (Stop or budget); no value is
/// bootstrapped across it. `bootstrap` is V(s_T) for a segment that ends
/// mid-episode. Returns (advantages, value targets).
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n, "gae inputs must be aligned");
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, targets)
}

/// Discounted reward-to-go, restarting after every episode end and with no
/// bootstrap at the segment end.
pub fn discounted_returns(rewards: &[f64], dones: &[bool], gamma: f64) -> Vec<f64> {
    assert_eq!(rewards.len(), dones.len());
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        if dones[t] {
            acc = 0.0;
        }
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// In-place standardisation to mean 0 and (population) std 1. A constant
/// input becomes all zeros.
pub fn normalize(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    x.iter_mut().for_each(|v| *v = (*v - mean) / (std + 1e-8));
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// A_t = sum_l (gamma lambda)^l delta_{t+l}, truncated at the episode end.
    fn brute_force(r: &[f64], v: &[f64], d: &[bool], boot: f64, g: f64, l: f64) -> Vec<f64> {
        let n = r.len();
        let value_at = |k: usize| if k == n { boot } else { v[k] };
        let delta: Vec<f64> = (0..n).map(|k| r[k] + if d[k] { 0.0 } else { g * value_at(k + 1) } - v[k]).collect();
        (0..n)
            .map(|t| {
                let mut sum = 0.0;
                let mut w = 1.0;
                for k in t..n {
                    sum += w * delta[k];
                    if d[k] {
                        break;
                    }
                    w *= g * l;
                }
                sum
            })
            .collect()
    }

    #[test]
    fn hand_recursion() {
        let (a, ret) = gae(&[1.0, 1.0], &[0.0, 0.0], &[false, true], 123.0, 0.99, 0.9);
        assert!((a[0] - 1.891).abs() < 1e-12 && (a[1] - 1.0).abs() < 1e-12);
        assert_eq!(a, ret);
    }

    #[test]
    fn lambda_extremes() {
        let r = [0.5, -0.2, 1.0, 0.3];
        let v = [0.1, 0.4, -0.3, 0.2];
        let d = [false, false, true, false];
        let (g, boot) = (0.9, 0.7);
        let (a1, _) = gae(&r, &v, &d, boot, g, 1.0);
        // lambda = 1: discounted return (bootstrapped) minus value.
        let mc = [0.5 + g * (-0.2 + g * 1.0), -0.2 + g * 1.0, 1.0, 0.3 + g * boot];
        for t in 0..4 {
            assert!((a1[t] - (mc[t] - v[t])).abs() < 1e-12);
        }
        let (a0, _) = gae(&r, &v, &d, boot, g, 0.0);
        let td = [0.5 + g * 0.4 - 0.1, -0.2 + g * -0.3 - 0.4, 1.0 + 0.3, 0.3 + g * boot - 0.2];
        for t in 0..4 {
            assert!((a0[t] - td[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn returns_restart_after_episode_end() {
        let g = discounted_returns(&[1.0, 1.0, 1.0], &[false, true, false], 0.5);
        assert_eq!(g, vec![1.5, 1.0, 1.0]);
    }

    #[test]
    fn normalize_guards_constant_input() {
        let mut x = vec![0.7; 5];
        normalize(&mut x);
        assert_eq!(x, vec![0.0; 5]);
        let mut y = vec![1.0, 2.0, 3.0, 4.0];
        normalize(&mut y);
        assert!(y.iter().sum::<f64>().abs() < 1e-12);
        assert!((y.iter().map(|v| v * v).sum::<f64>() / 4.0 - 1.0).abs() < 1e-7);
    }

    proptest! {
        #[test]
        fn gae_matches_definition(
            seq in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0, proptest::bool::weighted(0.15)), 20),
            boot in -2.0f64..2.0,
            g in 0.0f64..=1.0,
            l in 0.0f64..=1.0,
        ) {
            let r: Vec<f64> = seq.iter().map(|s| s.0).collect();
            let v: Vec<f64> = seq.iter().map(|s| s.1).collect();
            let d: Vec<bool> = seq.iter().map(|s| s.2).collect();
            let (a, _) = gae(&r, &v, &d, boot, g, l);
            let oracle = brute_force(&r, &v, &d, boot, g, l);
            for t in 0..20 {
                prop_assert!((a[t] - oracle[t]).abs() < 1e-10);
            }
        }
    }
}
