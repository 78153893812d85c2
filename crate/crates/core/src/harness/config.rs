use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::actionspace::ActionVariant;
use crate::error::{Error, Result};
use crate::trainer::{Algorithm, RunConfig, TrainerConfig};

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped;
/// repeated keys are an error.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{k}`", n + 1)));
        }
    }
    Ok(out)
}

/// Seed lists such as `1-8`, `3,5,9` or `1-4,10`.
pub fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("bad seed list `{s}`"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean `{v}` for `{key}`"))),
    }
}

impl RunConfig {
    /// Applies flat config keys. `algorithm` and `variant` reset the
    /// optimiser hyperparameters to that pair's defaults before any explicit
    /// override; unknown keys are rejected.
    pub fn apply_kv(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        if kv.contains_key("algorithm") || kv.contains_key("variant") {
            let alg: Algorithm = kv.get("algorithm").map(|v| v.parse()).transpose()?.unwrap_or(self.trainer.algorithm);
            let var: ActionVariant =
                kv.get("variant").map(|v| parse("variant", v)).transpose()?.unwrap_or(self.variant);
            let t = &self.trainer;
            let keep = (t.envs, t.rollout_len, t.blocks);
            self.variant = var;
            self.trainer = TrainerConfig::defaults(alg, var);
            (self.trainer.envs, self.trainer.rollout_len, self.trainer.blocks) = keep;
        }
        for (k, v) in kv {
            let t = &mut self.trainer;
            match k.as_str() {
                "algorithm" | "variant" => {}
                "name" => self.name = v.clone(),
                "seed" => self.seed = parse(k, v)?,
                "depth" => self.depth = parse_bool(k, v)?,
                "curriculum" => self.curriculum = parse_bool(k, v)?,
                "il" => self.il = parse_bool(k, v)?,
                "train_scenes" => self.train_scenes = parse_seed_list(v)?,
                "eval_scenes" => self.eval_scenes = parse_seed_list(v)?,
                "blocks" => t.blocks = parse(k, v)?,
                "envs" => t.envs = parse(k, v)?,
                "rollout_len" => t.rollout_len = parse(k, v)?,
                "lr" => t.lr = parse(k, v)?,
                "gamma" => t.gamma = parse(k, v)?,
                "gae_lambda" => t.gae_lambda = parse(k, v)?,
                "clip" => t.clip = parse(k, v)?,
                "value_coef" => t.value_coef = parse(k, v)?,
                "entropy_coef" => t.entropy_coef = parse(k, v)?,
                "aux_coef" => t.aux_coef = parse(k, v)?,
                "epochs" => t.epochs = parse(k, v)?,
                "minibatches" => t.minibatches = parse(k, v)?,
                "grad_clip" => t.grad_clip = parse(k, v)?,
                "kl_target" => t.kl_target = parse(k, v)?,
                "value_clip" => t.value_clip = parse_bool(k, v)?,
                "hidden" => self.hidden = parse(k, v)?,
                "slots" => self.slots = parse(k, v)?,
                "max_steps" => self.max_steps = parse(k, v)?,
                "eval_every" => self.eval_every = parse(k, v)?,
                "eval_episodes" => self.eval_episodes = parse(k, v)?,
                "eval_seed" => self.eval_seed = parse(k, v)?,
                "il_epochs" => self.il_cfg.epochs = parse(k, v)?,
                "il_lr" => self.il_cfg.lr = parse(k, v)?,
                "il_batch" => self.il_cfg.batch = parse(k, v)?,
                "il_starts" => self.il_starts = parse(k, v)?,
                "expert_t_max" => self.expert.t_max = parse(k, v)?,
                "expert_coverage" => self.expert.coverage_target = parse(k, v)?,
                "curriculum_min_blocks" => self.curriculum_cfg.min_stage_blocks = parse(k, v)?,
                "curriculum_window" => self.curriculum_cfg.window = parse(k, v)?,
                "curriculum_backstop" => self.curriculum_cfg.backstop = parse(k, v)?,
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        Ok(())
    }

    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv(&parse_kv(text)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_kv_text(&std::fs::read_to_string(path)?)
    }
}
