use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    collect_rollouts, il_pretrain, ppo_update, reinforce_update, transfer_shared, Algorithm, BlockMetrics,
    CurriculumConfig, CurriculumState, IlConfig, IlReport, Promotion, TrainerConfig, VecEnv,
};
use crate::actionspace::{stage_mask, ActionVariant, StageMask};
use crate::env::{EnvConfig, SceneContext};
use crate::error::{Error, Result};
use crate::expert::{generate_dataset, ExpertConfig};
use crate::harness::{evaluate, EvalPolicy, EvalReport};
use crate::policynet::{Adam, PolicyConfig, PolicyParams};
use crate::world::{generate_scene, SceneGenConfig, SceneSpec};

pub const CSV_HEADER: &str =
    "block,stage,node_recall,edge_recall,return,ep_len,move_success_rate,path_len,entropy_coef,kl,clip_frac,trunc_rate";

/// One training-log row. Episode metrics are NaN when no episode finished
/// during the block; the move success rate is empty without translations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub block: usize,
    pub stage: usize,
    pub node_recall: f64,
    pub edge_recall: f64,
    #[serde(rename = "return")]
    pub episodic_return: f64,
    pub ep_len: f64,
    pub move_success_rate: Option<f64>,
    pub path_len: f64,
    pub entropy_coef: f64,
    pub kl: f64,
    pub clip_frac: f64,
    pub trunc_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub block: usize,
    pub stage: usize,
    pub episodes: usize,
    pub node_recall: f64,
    pub node_recall_std: f64,
    pub edge_recall: f64,
    #[serde(rename = "return")]
    pub episodic_return: f64,
    pub ep_len: f64,
    pub move_success_rate: Option<f64>,
    pub path_len: f64,
    pub trunc_rate: f64,
}

impl EvalRow {
    fn new(block: usize, stage: usize, r: &EvalReport) -> Self {
        let a = &r.aggregate;
        Self {
            block,
            stage,
            episodes: a.episodes,
            node_recall: a.node_recall.mean,
            node_recall_std: a.node_recall.std,
            edge_recall: a.edge_recall.mean,
            episodic_return: a.episodic_return.mean,
            ep_len: a.episode_length.mean,
            move_success_rate: a.move_success_rate,
            path_len: a.path_length.mean,
            trunc_rate: a.truncation_rate,
        }
    }
}

/// One training scenario: algorithm, action space, sensing, curriculum and
/// imitation switches plus the scene split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub seed: u64,
    pub variant: ActionVariant,
    pub depth: bool,
    pub curriculum: bool,
    pub il: bool,
    pub train_scenes: Vec<u64>,
    pub eval_scenes: Vec<u64>,
    pub trainer: TrainerConfig,
    pub curriculum_cfg: CurriculumConfig,
    pub il_cfg: IlConfig,
    /// Expert demonstrations per training scene.
    pub il_starts: usize,
    pub expert: ExpertConfig,
    pub hidden: usize,
    pub slots: usize,
    pub max_steps: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Start-pose seed shared by every evaluation.
    pub eval_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            seed: 0,
            variant: ActionVariant::Sh16,
            depth: false,
            curriculum: false,
            il: false,
            train_scenes: (1..=27).collect(),
            eval_scenes: (28..=30).collect(),
            trainer: TrainerConfig::ppo(ActionVariant::Sh16),
            curriculum_cfg: CurriculumConfig::default(),
            il_cfg: IlConfig::default(),
            il_starts: 4,
            expert: ExpertConfig::default(),
            hidden: 128,
            slots: 64,
            max_steps: 40,
            eval_every: 50,
            eval_episodes: 10,
            eval_seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.trainer.validate()?;
        if self.curriculum && self.variant == ActionVariant::Sh16 {
            return Err(Error::Config("the curriculum needs the 504-action or multi-head space".into()));
        }
        if self.train_scenes.is_empty() {
            return Err(Error::Config("no training scenes".into()));
        }
        if self.eval_scenes.iter().any(|s| self.train_scenes.contains(s)) {
            return Err(Error::Config("evaluation scenes overlap the training scenes".into()));
        }
        if self.hidden == 0 || self.slots == 0 || self.max_steps == 0 {
            return Err(Error::Config("hidden, slots and max_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            variant: self.variant,
            depth: self.depth,
            slots: self.slots,
            max_steps: self.max_steps,
            ..Default::default()
        }
    }

    pub fn policy_config(&self, env: &EnvConfig) -> PolicyConfig {
        PolicyConfig { hidden: self.hidden, ..PolicyConfig::new(env.layout(), env.variant) }
    }
}

pub fn build_scenes(seeds: &[u64]) -> Result<Vec<SceneSpec>> {
    seeds.iter().map(|&s| generate_scene(s, &SceneGenConfig::default())).collect()
}

pub fn scene_contexts(scenes: &[SceneSpec], env: &EnvConfig) -> Result<Vec<Arc<SceneContext>>> {
    scenes.iter().map(|s| SceneContext::new(s, env).map(Arc::new)).collect()
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<BlockRow>,
    pub evals: Vec<EvalRow>,
    pub reports: Vec<EvalReport>,
    pub promotions: Vec<(usize, Promotion)>,
    pub il: Option<IlReport>,
    pub checkpoints: Vec<PathBuf>,
    pub params: PolicyParams,
}

struct Sinks {
    dir: PathBuf,
    train: csv::Writer<std::fs::File>,
    eval: csv::Writer<std::fs::File>,
}

impl Sinks {
    fn open(dir: &Path, cfg: &RunConfig) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            train: csv::Writer::from_path(dir.join("train.csv"))?,
            eval: csv::Writer::from_path(dir.join("eval.csv"))?,
        })
    }
}

fn masks_for(cfg: &RunConfig, stage: usize) -> Result<Vec<Vec<bool>>> {
    let spec = crate::actionspace::ActionSpec::new(cfg.variant);
    let m = if cfg.curriculum { stage_mask(stage, &spec)? } else { StageMask::full(&spec) };
    Ok(m.head_masks(&spec))
}

/// Imitation pretraining on expert demonstrations from the training scenes.
/// A single-head 16-action network is cloned and its shared blocks copied
/// into `params`.
fn pretrain(cfg: &RunConfig, scenes: &[SceneSpec], params: &mut PolicyParams) -> Result<IlReport> {
    let demos = generate_dataset(scenes, cfg.il_starts, &cfg.expert, cfg.seed)?;
    let il_env = EnvConfig { variant: ActionVariant::Sh16, ..cfg.env_config() };
    let ctxs: HashMap<String, Arc<SceneContext>> =
        scene_contexts(scenes, &il_env)?.into_iter().map(|c| (c.scene().scene_id.clone(), c)).collect();
    let il_cfg = IlConfig { seed: cfg.seed, ..cfg.il_cfg.clone() };
    if cfg.variant == ActionVariant::Sh16 {
        return il_pretrain(params, &demos, &ctxs, &il_env, &il_cfg);
    }
    let mut sh = PolicyParams::init(cfg.policy_config(&il_env), cfg.seed);
    let report = il_pretrain(&mut sh, &demos, &ctxs, &il_env, &il_cfg)?;
    transfer_shared(&sh, params);
    Ok(report)
}

pub fn train(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutput> {
    train_with_progress(cfg, out_dir, |_, _| {})
}

/// Block loop: collect, update, log, and every `eval_every` blocks evaluate
/// greedily on the held-out scenes and checkpoint. A checkpoint is also
/// written after the last block.
pub fn train_with_progress(
    cfg: &RunConfig,
    out_dir: Option<&Path>,
    mut progress: impl FnMut(&BlockRow, Option<&EvalRow>),
) -> Result<RunOutput> {
    cfg.validate()?;
    let env_cfg = Arc::new(cfg.env_config());
    let train_specs = build_scenes(&cfg.train_scenes)?;
    let train_ctx = scene_contexts(&train_specs, &env_cfg)?;
    let eval_ctx = scene_contexts(&build_scenes(&cfg.eval_scenes)?, &env_cfg)?;
    let mut sinks = out_dir.map(|d| Sinks::open(d, cfg)).transpose()?;

    let mut params = PolicyParams::init(cfg.policy_config(&env_cfg), cfg.seed);
    let il = if cfg.il { Some(pretrain(cfg, &train_specs, &mut params)?) } else { None };
    let tc = &cfg.trainer;
    let mut adam = Adam::new(params.len(), tc.lr);
    let mut venv = VecEnv::new(&train_ctx, env_cfg.clone(), tc.envs, cfg.hidden, cfg.seed)?;
    let mut update_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    update_rng.set_stream(u64::MAX);
    let mut cur = CurriculumState::new();
    let mut out = RunOutput {
        rows: Vec::with_capacity(tc.blocks),
        evals: Vec::new(),
        reports: Vec::new(),
        promotions: Vec::new(),
        il,
        checkpoints: Vec::new(),
        params: params.clone(),
    };

    for block in 1..=tc.blocks {
        let stage = cur.stage;
        let masks = masks_for(cfg, stage)?;
        let ent = if cfg.curriculum { cur.entropy_coef(&cfg.curriculum_cfg, tc.entropy_coef) } else { tc.entropy_coef };
        let batch = collect_rollouts(&params, &mut venv, &masks, tc.rollout_len)?;
        let (kl, clip_frac) = match tc.algorithm {
            Algorithm::Ppo => {
                let s = ppo_update(&mut params, &mut adam, &batch, tc, ent, &mut update_rng)?;
                (s.approx_kl, s.clip_fraction)
            }
            Algorithm::Reinforce => {
                reinforce_update(&mut params, &mut adam, &batch, tc, ent)?;
                (0.0, 0.0)
            }
        };
        let m = BlockMetrics::from_episodes(&batch.episodes);
        let row = BlockRow {
            block,
            stage,
            node_recall: m.node_recall,
            edge_recall: m.edge_recall,
            episodic_return: m.episodic_return,
            ep_len: m.episode_length,
            move_success_rate: m.move_success_rate,
            path_len: m.path_length,
            entropy_coef: ent,
            kl,
            clip_frac,
            trunc_rate: m.truncation_rate,
        };
        if cfg.curriculum {
            if let Some(p) = cur.update(&cfg.curriculum_cfg, [m.node_recall, m.episodic_return, m.episode_length]) {
                out.promotions.push((block, p));
            }
        }
        if let Some(s) = sinks.as_mut() {
            s.train.serialize(row)?;
            s.train.flush()?;
        }

        let eval_now = cfg.eval_every > 0 && block % cfg.eval_every == 0;
        let mut eval_row = None;
        if eval_now && !eval_ctx.is_empty() {
            let emasks = masks_for(cfg, stage)?;
            let rep =
                evaluate(EvalPolicy::Greedy(&params), &eval_ctx, &env_cfg, &emasks, cfg.eval_episodes, cfg.eval_seed)?;
            let r = EvalRow::new(block, stage, &rep);
            if let Some(s) = sinks.as_mut() {
                s.eval.serialize(r)?;
                s.eval.flush()?;
                rep.save(&s.dir.join(format!("eval_{block:06}.json")))?;
            }
            out.evals.push(r);
            out.reports.push(rep);
            eval_row = Some(r);
        }
        if eval_now || block == tc.blocks {
            if let Some(s) = sinks.as_ref() {
                let path = s.dir.join(format!("ckpt_{block:06}.json"));
                params.save(&path)?;
                out.checkpoints.push(path);
            }
        }
        progress(&row, eval_row.as_ref());
        out.rows.push(row);
    }
    out.params = params;
    Ok(out)
}

pub fn read_block_log(path: &Path) -> Result<Vec<BlockRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<BlockRow>, _>>()?;
    Ok(rows)
}

pub fn read_eval_log(path: &Path) -> Result<Vec<EvalRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<EvalRow>, _>>()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(blocks: usize) -> RunConfig {
        RunConfig {
            train_scenes: vec![1, 2],
            eval_scenes: vec![9],
            trainer: TrainerConfig {
                blocks,
                envs: 4,
                rollout_len: 20,
                minibatches: 2,
                ..TrainerConfig::ppo(ActionVariant::Sh16)
            },
            hidden: 16,
            slots: 16,
            eval_every: 2,
            eval_episodes: 2,
            ..Default::default()
        }
    }

    #[test]
    fn smoke_run_writes_rows_and_one_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { eval_every: 50, ..tiny(2) };
        let out = train(&cfg, Some(dir.path())).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert_eq!(out.checkpoints.len(), 1);
        assert!(out.evals.is_empty());
        let text = std::fs::read_to_string(dir.path().join("train.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(read_block_log(&dir.path().join("train.csv")).unwrap().len(), 2);
        let p = PolicyParams::load(&out.checkpoints[0]).unwrap();
        assert_eq!(p, out.params);
    }

    #[test]
    fn evaluation_cadence_and_log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = train(&tiny(5), Some(dir.path())).unwrap();
        assert_eq!(out.evals.iter().map(|e| e.block).collect::<Vec<_>>(), vec![2, 4]);
        assert_eq!(out.checkpoints.len(), 3);
        assert!(out.reports.iter().all(|r| r.episodes.len() == 2));
        let rows = read_block_log(&dir.path().join("train.csv")).unwrap();
        assert_eq!(rows.len(), out.rows.len());
        for (a, b) in rows.iter().zip(&out.rows) {
            assert_eq!(a.block, b.block);
            assert!(a.node_recall == b.node_recall || (a.node_recall.is_nan() && b.node_recall.is_nan()));
            assert_eq!(a.move_success_rate, b.move_success_rate);
            assert_eq!(a.kl, b.kl);
        }
        assert_eq!(read_eval_log(&dir.path().join("eval.csv")).unwrap(), out.evals);
    }

    #[test]
    fn identical_seeds_give_identical_logs() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        train(&tiny(3), Some(a.path())).unwrap();
        train(&tiny(3), Some(b.path())).unwrap();
        for f in ["train.csv", "eval.csv"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        }
    }

    #[test]
    fn curriculum_runs_mask_by_stage() {
        let cfg = RunConfig {
            variant: ActionVariant::Mh,
            curriculum: true,
            curriculum_cfg: CurriculumConfig {
                min_stage_blocks: 2,
                window: 2,
                recent: 1,
                plateau_threshold: 10.0,
                ..Default::default()
            },
            trainer: TrainerConfig {
                blocks: 7,
                envs: 4,
                rollout_len: 20,
                minibatches: 2,
                ..TrainerConfig::ppo(ActionVariant::Mh)
            },
            ..tiny(7)
        };
        let out = train(&cfg, None).unwrap();
        let stages: Vec<usize> = out.rows.iter().map(|r| r.stage).collect();
        assert!(stages.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*stages.last().unwrap(), 4);
        assert!(!out.promotions.is_empty());
    }

    #[test]
    fn sh16_curriculum_is_rejected() {
        assert!(RunConfig { curriculum: true, ..tiny(1) }.validate().is_err());
        assert!(RunConfig { eval_scenes: vec![1], ..tiny(1) }.validate().is_err());
    }
}
