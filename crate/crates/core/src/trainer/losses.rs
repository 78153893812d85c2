/// Numerically stable binary cross-entropy on a logit.
pub fn bce_with_logits(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Mean cross-entropy over the steps where `mask` is set; 0 when none is.
pub fn collision_aux_loss(logits: &[f64], labels: &[f64], mask: &[bool]) -> f64 {
    assert!(logits.len() == labels.len() && logits.len() == mask.len());
    let n = mask.iter().filter(|&&m| m).count();
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = (0..logits.len()).filter(|&t| mask[t]).map(|t| bce_with_logits(logits[t], labels[t])).sum();
    sum / n as f64
}

/// Gradient of [`collision_aux_loss`] with respect to each logit.
pub fn collision_aux_loss_grad(logits: &[f64], labels: &[f64], mask: &[bool]) -> Vec<f64> {
    let n = mask.iter().filter(|&&m| m).count();
    (0..logits.len()).map(|t| if mask[t] { (sigmoid(logits[t]) - labels[t]) / n as f64 } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_mask_gives_zero() {
        assert_eq!(collision_aux_loss(&[3.0, -1.0], &[1.0, 0.0], &[false, false]), 0.0);
        assert_eq!(collision_aux_loss_grad(&[3.0, -1.0], &[1.0, 0.0], &[false, false]), vec![0.0, 0.0]);
    }

    #[test]
    fn saturated_correct_predictions() {
        let l = collision_aux_loss(&[10.0, -10.0], &[1.0, 0.0], &[true, true]);
        assert!(l < 1e-4);
    }

    #[test]
    fn masked_equals_subset_bce() {
        let z = [0.3, -1.2, 2.0, 0.0, -0.4];
        let y = [1.0, 0.0, 0.0, 1.0, 1.0];
        let m = [true, false, true, false, true];
        let subset: Vec<usize> = vec![0, 2, 4];
        let oracle = subset
            .iter()
            .map(|&t| {
                let p = 1.0 / (1.0 + (-z[t] as f64).exp());
                -(y[t] * p.ln() + (1.0 - y[t]) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / 3.0;
        assert!((collision_aux_loss(&z, &y, &m) - oracle).abs() < 1e-12);
        let g = collision_aux_loss_grad(&z, &y, &m);
        let eps = 1e-6;
        for t in 0..5 {
            let mut zp = z;
            let mut zm = z;
            zp[t] += eps;
            zm[t] -= eps;
            let fd = (collision_aux_loss(&zp, &y, &m) - collision_aux_loss(&zm, &y, &m)) / (2.0 * eps);
            assert!((fd - g[t]).abs() < 1e-8);
        }
    }
}
