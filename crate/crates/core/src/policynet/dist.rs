use rand::Rng;

use super::StepOutput;
use crate::actionspace::{ActionChoice, ActionSpec};
use crate::error::{Error, Result};

/// Categorical distribution over the admissible entries of one head.
/// Masked entries carry `-inf` log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    pub logp: Vec<f64>,
}

impl Categorical {
    pub fn new(logits: &[f64], mask: Option<&[bool]>) -> Result<Self> {
        if let Some(m) = mask {
            if m.len() != logits.len() {
                return Err(Error::Dimension { expected: logits.len(), got: m.len() });
            }
        }
        let admissible = |i: usize| mask.map_or(true, |m| m[i]);
        let max = (0..logits.len()).filter(|&i| admissible(i)).map(|i| logits[i]).fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::AllMasked("categorical head"));
        }
        if !max.is_finite() {
            return Err(Error::NonFinite(format!("logit {max}")));
        }
        let sum: f64 = (0..logits.len()).filter(|&i| admissible(i)).map(|i| (logits[i] - max).exp()).sum();
        let lse = max + sum.ln();
        let logp = (0..logits.len()).map(|i| if admissible(i) { logits[i] - lse } else { f64::NEG_INFINITY }).collect();
        Ok(Self { logp })
    }

    pub fn len(&self) -> usize {
        self.logp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logp.is_empty()
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.logp[i].exp()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.logp.iter().map(|l| l.exp()).collect()
    }

    pub fn log_prob(&self, i: usize) -> Result<f64> {
        match self.logp.get(i) {
            None => Err(Error::ActionIndex(format!("{i} >= {}", self.logp.len()))),
            Some(l) if *l == f64::NEG_INFINITY => Err(Error::MaskedChoice(format!("entry {i} is masked"))),
            Some(l) => Ok(*l),
        }
    }

    pub fn entropy(&self) -> f64 {
        -self.logp.iter().filter(|l| l.is_finite()).map(|&l| l.exp() * l).sum::<f64>()
    }

    /// Inverse-CDF draw restricted to admissible entries.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, l) in self.logp.iter().enumerate() {
            if l.is_finite() {
                acc += l.exp();
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }

    /// Most probable entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &l) in self.logp.iter().enumerate() {
            if l > self.logp[best] {
                best = i;
            }
        }
        best
    }

    /// d log p(a) / d logits.
    pub fn grad_log_prob(&self, a: usize) -> Vec<f64> {
        self.logp.iter().enumerate().map(|(j, l)| if j == a { 1.0 - l.exp() } else { -l.exp() }).collect()
    }

    /// d H / d logits.
    pub fn grad_entropy(&self) -> Vec<f64> {
        let h = self.entropy();
        self.logp.iter().map(|&l| if l.is_finite() { -l.exp() * (l + h) } else { 0.0 }).collect()
    }
}

/// Joint action distribution: one categorical for single-head variants,
/// independent rotation / length / stop heads for the multi-head variant.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDist {
    pub heads: Vec<Categorical>,
}

impl PolicyDist {
    pub fn new(out: &StepOutput, masks: &[Vec<bool>]) -> Result<Self> {
        if masks.len() != out.logits.len() {
            return Err(Error::Dimension { expected: out.logits.len(), got: masks.len() });
        }
        let heads = out.logits.iter().zip(masks).map(|(l, m)| Categorical::new(l, Some(m))).collect::<Result<_>>()?;
        Ok(Self { heads })
    }

    /// Head entries selected by `choice`.
    pub fn indices(choice: &ActionChoice, spec: &ActionSpec) -> Vec<usize> {
        if spec.variant.is_multi_head() {
            vec![choice.rotation_index, choice.length_index, choice.stop as usize]
        } else {
            vec![spec.atom_index(choice.rotation_index, choice.length_index)]
        }
    }

    pub fn choice(indices: &[usize], spec: &ActionSpec) -> Result<ActionChoice> {
        if spec.variant.is_multi_head() {
            Ok(ActionChoice { rotation_index: indices[0], length_index: indices[1], stop: indices[2] == 1 })
        } else {
            spec.atom_choice(indices[0])
        }
    }

    /// Sum of head log-probabilities.
    pub fn log_prob(&self, choice: &ActionChoice, spec: &ActionSpec) -> Result<f64> {
        spec.check(choice)?;
        Self::indices(choice, spec).iter().zip(&self.heads).map(|(&i, h)| h.log_prob(i)).sum()
    }

    /// Sum of head entropies.
    pub fn entropy(&self) -> f64 {
        self.heads.iter().map(Categorical::entropy).sum()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, spec: &ActionSpec) -> Result<ActionChoice> {
        let idx: Vec<usize> = self.heads.iter().map(|h| h.sample(rng)).collect();
        Self::choice(&idx, spec)
    }

    pub fn greedy(&self, spec: &ActionSpec) -> Result<ActionChoice> {
        let idx: Vec<usize> = self.heads.iter().map(Categorical::argmax).collect();
        Self::choice(&idx, spec)
    }

    /// d log pi(choice) / d logits, per head.
    pub fn grad_log_prob(&self, choice: &ActionChoice, spec: &ActionSpec) -> Vec<Vec<f64>> {
        Self::indices(choice, spec).iter().zip(&self.heads).map(|(&i, h)| h.grad_log_prob(i)).collect()
    }

    pub fn grad_entropy(&self) -> Vec<Vec<f64>> {
        self.heads.iter().map(Categorical::grad_entropy).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actionspace::{stage_mask, ActionVariant};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_mh_log_prob() {
        let spec = ActionSpec::new(ActionVariant::Mh);
        let out =
            StepOutput { logits: vec![vec![0.0; 24], vec![0.0; 21], vec![0.0; 2]], value: 0.0, collision_logit: None };
        let masks = vec![vec![true; 24], vec![true; 21], vec![true; 2]];
        let d = PolicyDist::new(&out, &masks).unwrap();
        let lp = d.log_prob(&ActionChoice::new(5, 7), &spec).unwrap();
        let oracle = -(24f64.ln() + 21f64.ln() + 2f64.ln());
        assert!((lp - oracle).abs() < 1e-12);
        assert!((lp + 6.9157).abs() < 1e-4);
        assert!((d.entropy() + oracle).abs() < 1e-12);
    }

    #[test]
    fn single_admissible_entry_is_certain() {
        let mut mask = vec![false; 5];
        mask[3] = true;
        let c = Categorical::new(&[0.3, -1.0, 2.0, 0.5, 9.0], Some(&mask)).unwrap();
        assert_eq!(c.prob(3), 1.0);
        assert_eq!(c.entropy(), 0.0);
        assert!(c.log_prob(4).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..1000).all(|_| c.sample(&mut rng) == 3));
        assert_eq!(c.argmax(), 3);
        assert!(Categorical::new(&[0.0; 3], Some(&[false; 3])).is_err());
    }

    #[test]
    fn full_mask_equals_unmasked() {
        let z = [0.1, -0.4, 1.3, 0.0];
        let a = Categorical::new(&z, None).unwrap();
        let b = Categorical::new(&z, Some(&[true; 4])).unwrap();
        assert_eq!(a, b);
        assert!((a.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sample_frequencies_match_probabilities() {
        let c = Categorical::new(&[0.0, 1.0, -0.5], None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[c.sample(&mut rng)] += 1;
        }
        for i in 0..3 {
            let p = c.prob(i);
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((counts[i] as f64 - n as f64 * p).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let z = vec![0.2, -0.7, 1.1, 0.4, -0.1];
        let mask = [true, false, true, true, true];
        let c = Categorical::new(&z, Some(&mask)).unwrap();
        let (gl, ge) = (c.grad_log_prob(2), c.grad_entropy());
        assert_eq!(gl[1], 0.0);
        assert_eq!(ge[1], 0.0);
        let eps = 1e-6;
        for j in 0..5 {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += eps;
            zm[j] -= eps;
            let cp = Categorical::new(&zp, Some(&mask)).unwrap();
            let cm = Categorical::new(&zm, Some(&mask)).unwrap();
            let fl = (cp.logp[2] - cm.logp[2]) / (2.0 * eps);
            let fe = (cp.entropy() - cm.entropy()) / (2.0 * eps);
            assert!((fl - gl[j]).abs() < 1e-8);
            assert!((fe - ge[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn stage_mask_sampling_never_hits_masked_atoms() {
        let spec = ActionSpec::new(ActionVariant::Sh504);
        let mask = stage_mask(2, &spec).unwrap();
        let out = StepOutput { logits: vec![vec![0.0; 504]], value: 0.0, collision_logit: None };
        let d = PolicyDist::new(&out, &mask.head_masks(&spec)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let c = d.sample(&mut rng, &spec).unwrap();
            assert!(mask.admits(&c, &spec));
        }
        assert!((d.entropy() - 48f64.ln()).abs() < 1e-12);
    }
}
