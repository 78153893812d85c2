//! Held-out evaluation, the composite tuning objective, run configuration
//! files and trajectory export.

mod config;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Env, EnvConfig, EpisodeSummary, SceneContext};
use crate::error::{Error, Result};
use crate::policynet::{Categorical, PolicyDist, PolicyParams};
use crate::trainer::BlockRow;
use crate::world::Pose;

pub use config::{parse_kv, parse_seed_list};

/// Blocks averaged by [`window_stats`].
pub const OBJECTIVE_WINDOW: usize = 50;

/// How evaluation episodes pick actions.
#[derive(Debug, Clone, Copy)]
pub enum EvalPolicy<'a> {
    /// Argmax of every head.
    Greedy(&'a PolicyParams),
    /// Uniform over the admissible entries of every head.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub scene_id: String,
    pub episode: usize,
    pub node_recall: f64,
    pub edge_recall: f64,
    pub episodic_return: f64,
    pub length: usize,
    pub translations: usize,
    pub successful_translations: usize,
    pub path_length: f64,
    pub stopped: bool,
    pub truncated: bool,
    pub poses: Vec<Pose>,
}

impl EpisodeRecord {
    fn new(episode: usize, s: EpisodeSummary) -> Self {
        Self {
            scene_id: s.scene_id,
            episode,
            node_recall: s.node_recall,
            edge_recall: s.edge_recall,
            episodic_return: s.episodic_return,
            length: s.length,
            translations: s.translations,
            successful_translations: s.successful_translations,
            path_length: s.path_length,
            stopped: s.stopped,
            truncated: s.truncated,
            poses: s.poses,
        }
    }

    pub fn move_success_rate(&self) -> Option<f64> {
        (self.translations > 0).then(|| self.successful_translations as f64 / self.translations as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: impl Iterator<Item = f64> + Clone) -> Self {
        let n = xs.clone().count();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let mean = xs.clone().sum::<f64>() / n as f64;
        let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub episodes: usize,
    pub node_recall: MeanStd,
    pub edge_recall: MeanStd,
    pub episodic_return: MeanStd,
    pub episode_length: MeanStd,
    /// Pooled over every translation; absent when none occurred.
    pub move_success_rate: Option<f64>,
    pub path_length: MeanStd,
    pub truncation_rate: f64,
}

impl MetricSummary {
    pub fn from_records<'a>(recs: impl Iterator<Item = &'a EpisodeRecord> + Clone) -> Self {
        let episodes = recs.clone().count();
        let translations: usize = recs.clone().map(|r| r.translations).sum();
        let successes: usize = recs.clone().map(|r| r.successful_translations).sum();
        Self {
            episodes,
            node_recall: MeanStd::of(recs.clone().map(|r| r.node_recall)),
            edge_recall: MeanStd::of(recs.clone().map(|r| r.edge_recall)),
            episodic_return: MeanStd::of(recs.clone().map(|r| r.episodic_return)),
            episode_length: MeanStd::of(recs.clone().map(|r| r.length as f64)),
            move_success_rate: (translations > 0).then(|| successes as f64 / translations as f64),
            path_length: MeanStd::of(recs.clone().map(|r| r.path_length)),
            truncation_rate: if episodes == 0 {
                f64::NAN
            } else {
                recs.filter(|r| r.truncated).count() as f64 / episodes as f64
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneReport {
    pub scene_id: String,
    pub summary: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy: String,
    pub seed: u64,
    pub per_scene: Vec<SceneReport>,
    pub aggregate: MetricSummary,
    pub episodes: Vec<EpisodeRecord>,
}

impl EvalReport {
    fn assemble(policy: &str, seed: u64, episodes: Vec<EpisodeRecord>) -> Self {
        let mut ids: Vec<&str> = Vec::new();
        for e in &episodes {
            if !ids.contains(&e.scene_id.as_str()) {
                ids.push(&e.scene_id);
            }
        }
        let per_scene = ids
            .iter()
            .map(|id| SceneReport {
                scene_id: id.to_string(),
                summary: MetricSummary::from_records(episodes.iter().filter(|e| e.scene_id == *id)),
            })
            .collect();
        let aggregate = MetricSummary::from_records(episodes.iter());
        Self { policy: policy.to_string(), seed, per_scene, aggregate, episodes }
    }

    /// Rebuilds every summary from the stored episode records.
    pub fn recomputed(&self) -> Self {
        Self::assemble(&self.policy, self.seed, self.episodes.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

fn uniform(masks: &[Vec<bool>]) -> Result<PolicyDist> {
    let heads = masks.iter().map(|m| Categorical::new(&vec![0.0; m.len()], Some(m))).collect::<Result<_>>()?;
    Ok(PolicyDist { heads })
}

/// Runs `episodes_per_scene` episodes on every scene. Start poses (and the
/// random policy's actions) come from a per-scene stream of `seed`, so every
/// policy evaluated with the same seed sees the same starts.
pub fn evaluate(
    policy: EvalPolicy<'_>,
    scenes: &[Arc<SceneContext>],
    env_cfg: &EnvConfig,
    masks: &[Vec<bool>],
    episodes_per_scene: usize,
    seed: u64,
) -> Result<EvalReport> {
    let spec = env_cfg.actions();
    if let EvalPolicy::Greedy(p) = policy {
        if p.config.variant != env_cfg.variant || p.config.layout != env_cfg.layout() {
            return Err(Error::Config("policy does not match the evaluation environment".into()));
        }
    }
    let cfg = Arc::new(env_cfg.clone());
    let mut records = Vec::with_capacity(scenes.len() * episodes_per_scene);
    for (k, ctx) in scenes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut act_rng = ChaCha8Rng::seed_from_u64(seed);
        act_rng.set_stream((1 << 32) + k as u64);
        let mut env = Env::new(ctx.clone(), cfg.clone());
        for ep in 0..episodes_per_scene {
            let mut obs = env.reset(&mut rng);
            let mut h = match policy {
                EvalPolicy::Greedy(p) => p.initial_state(),
                EvalPolicy::Random => Vec::new(),
            };
            let summary = loop {
                let choice = match policy {
                    EvalPolicy::Greedy(p) => {
                        let (out, h_next) = p.step(&obs, &h)?;
                        h = h_next;
                        PolicyDist::new(&out, masks)?.greedy(&spec)?
                    }
                    EvalPolicy::Random => uniform(masks)?.sample(&mut act_rng, &spec)?,
                };
                let step = env.step(&choice)?;
                if let Some(s) = step.summary {
                    break s;
                }
                obs = step.observation;
            };
            records.push(EpisodeRecord::new(ep, summary));
        }
    }
    let name = match policy {
        EvalPolicy::Greedy(_) => "greedy",
        EvalPolicy::Random => "random",
    };
    Ok(EvalReport::assemble(name, seed, records))
}

/// Composite tuning objective, clipped below at -100.
pub fn objective_j(node_recall: f64, collision_rate: f64, truncation_rate: f64, episode_length: f64) -> f64 {
    let j = node_recall - 0.20 * collision_rate - 0.10 * truncation_rate - 0.01 * (episode_length - 25.0).max(0.0);
    if j.is_nan() {
        j
    } else {
        j.max(-100.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub blocks: usize,
    pub node_recall: f64,
    /// One minus the mean move success rate.
    pub collision_rate: f64,
    pub truncation_rate: f64,
    pub episode_length: f64,
}

impl WindowStats {
    pub fn objective(&self) -> f64 {
        objective_j(self.node_recall, self.collision_rate, self.truncation_rate, self.episode_length)
    }
}

fn finite_mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.filter(|x| x.is_finite()).fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Means over the last [`OBJECTIVE_WINDOW`] blocks; blocks without finished
/// episodes (or without translations, for the collision rate) are skipped.
pub fn window_stats(rows: &[BlockRow]) -> WindowStats {
    let w = &rows[rows.len().saturating_sub(OBJECTIVE_WINDOW)..];
    WindowStats {
        blocks: w.len(),
        node_recall: finite_mean(w.iter().map(|r| r.node_recall)),
        collision_rate: 1.0 - finite_mean(w.iter().filter_map(|r| r.move_success_rate)),
        truncation_rate: finite_mean(w.iter().map(|r| r.trunc_rate)),
        episode_length: finite_mean(w.iter().map(|r| r.ep_len)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub x: f64,
    pub y: f64,
    pub heading: i32,
}

pub fn trajectory_points(poses: &[Pose]) -> Vec<TrajectoryPoint> {
    poses.iter().map(|p| TrajectoryPoint { x: p.x, y: p.y, heading: p.heading.degrees() }).collect()
}

/// Writes one `{scene}_ep{k:03}.json` pose list per episode.
pub fn write_trajectories(dir: &Path, report: &EvalReport) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::with_capacity(report.episodes.len());
    for e in &report.episodes {
        let path = dir.join(format!("{}_ep{:03}.json", e.scene_id, e.episode));
        std::fs::write(&path, serde_json::to_string(&trajectory_points(&e.poses))?)?;
        out.push(path);
    }
    Ok(out)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryPoint>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
