//! Imitation-learning demonstrations: viewpoint coverage planning, tour
//! ordering and a short-horizon greedy expert acting in the 16-action space.

mod field;
mod plan;

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actionspace::{ActionSpec, ActionVariant};
use crate::error::{Error, Result};
use crate::ssg::{aggregate, position_key, update_global, GlobalGraph, Observer, VisibilityParams};
use crate::world::{free_distance, step_kinematics, viewpoint_grid, Pose, SceneSpec, MOVE_FAIL_SLACK};

pub use field::DistanceField;
pub use plan::{aco_cycle, aco_tour, cycle_length, greedy_select, viewpoint_object_map, AcoConfig, ViewpointEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub gain: f64,
    pub discovery: f64,
    pub new_viewpoint: f64,
    pub progress: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self { gain: 1.0, discovery: 0.5, new_viewpoint: 0.1, progress: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertConfig {
    pub grid_spacing: f64,
    pub coverage_target: f64,
    pub t_max: usize,
    pub stagnation_window: usize,
    pub weights: ScoreWeights,
    pub aco: AcoConfig,
    /// A tour target counts as reached within this distance.
    pub reach_radius: f64,
    pub fov_deg: f64,
    pub visibility: VisibilityParams,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            grid_spacing: 0.5,
            coverage_target: 0.95,
            t_max: 80,
            stagnation_window: 5,
            weights: ScoreWeights::default(),
            aco: AcoConfig::default(),
            reach_radius: 0.3,
            fov_deg: 90.0,
            visibility: VisibilityParams::default(),
        }
    }
}

impl ExpertConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.coverage_target > 0.0 && self.coverage_target <= 1.0) {
            return Err(Error::Config("coverage target must lie in (0, 1]".into()));
        }
        if self.t_max < 1 {
            return Err(Error::Config("t_max must be at least 1".into()));
        }
        if !(self.grid_spacing > 0.0) {
            return Err(Error::Config("grid spacing must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemoStep {
    /// Pose before the action.
    pub pose: Pose,
    /// Single-head atom index in the 16-action space; 0 is Stop.
    pub action: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub scene_id: String,
    pub start: Pose,
    pub steps: Vec<DemoStep>,
    /// Discovered fraction of objects at the end.
    pub coverage: f64,
}

impl Demonstration {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn ends_with_stop(&self) -> bool {
        self.steps.last().is_some_and(|s| s.action == 0)
    }

    /// Poses reached by re-executing the actions from the start pose,
    /// including the start.
    pub fn replay_poses(&self, scene: &SceneSpec) -> Result<Vec<Pose>> {
        let spec = ActionSpec::new(ActionVariant::Sh16);
        let mut pose = self.start;
        let mut out = vec![pose];
        for s in &self.steps {
            let c = spec.atom_choice(s.action)?;
            if s.action != 0 {
                pose = step_kinematics(scene, &pose, spec.rotations[c.rotation_index], spec.lengths[c.length_index])
                    .new_pose;
            }
            out.push(pose);
        }
        Ok(out)
    }
}

fn coverage(g: &GlobalGraph, tau: f64) -> f64 {
    if g.n_objects() == 0 {
        1.0
    } else {
        g.discovered(tau) as f64 / g.n_objects() as f64
    }
}

/// Viewpoints picked by greedy coverage, in visiting order from `start`.
pub fn plan_tour(observer: &Observer, start: &Pose, cfg: &ExpertConfig, seed: u64) -> Vec<Pose> {
    let grid = viewpoint_grid(observer.scene(), cfg.grid_spacing);
    let map = viewpoint_object_map(observer, &grid);
    let chosen = greedy_select(&map, observer.scene().objects.len(), cfg.visibility.tau, cfg.coverage_target);
    order_tour(&map, &chosen, start, cfg, seed)
}

fn order_tour(map: &[ViewpointEntry], chosen: &[usize], start: &Pose, cfg: &ExpertConfig, seed: u64) -> Vec<Pose> {
    let points: Vec<(f64, f64)> = chosen.iter().map(|&i| (map[i].pose.x, map[i].pose.y)).collect();
    aco_tour(&points, (start.x, start.y), &cfg.aco, seed).into_iter().map(|k| map[chosen[k]].pose).collect()
}

/// Short-horizon greedy expert following `tour`. Every candidate in the
/// 16-action space is simulated one step ahead; failed moves and rotations
/// that leave no free forward translation are discarded.
/// Visibility gain counts only objects still below `tau`.
pub fn expert_rollout(observer: &Observer, start: Pose, tour: &[Pose], cfg: &ExpertConfig) -> Result<Demonstration> {
    cfg.validate()?;
    let scene = observer.scene();
    let spec = ActionSpec::new(ActionVariant::Sh16);
    let tau = cfg.visibility.tau;
    let step_len = spec.lengths[spec.n_lengths() - 1];
    let mut graph = GlobalGraph::new(scene.objects.len());
    let mut pose = start;
    update_global(&mut graph, &observer.observe(&pose), position_key(pose.x, pose.y));
    let mut visited: HashSet<_> = [position_key(pose.x, pose.y)].into();

    let mut fields: Vec<Option<DistanceField>> = vec![None; tour.len()];
    let mut target = 0;
    let mut best_dist = f64::INFINITY;
    let mut since_closer = 0;
    let mut steps: Vec<DemoStep> = Vec::new();
    let mut last_progress = 0;
    let mut trim = false;

    while steps.len() + 1 < cfg.t_max {
        // Advance past reached or unreachable targets, and targets the expert
        // has stopped approaching.
        let mut d_now = 0.0;
        while target < tour.len() {
            let f =
                fields[target].get_or_insert_with(|| DistanceField::new(scene, tour[target].x, tour[target].y, 0.1));
            d_now = f.distance(pose.x, pose.y);
            let stuck = since_closer >= 2 * cfg.stagnation_window;
            if d_now <= cfg.reach_radius || !d_now.is_finite() || stuck {
                target += 1;
                best_dist = f64::INFINITY;
                since_closer = 0;
                continue;
            }
            break;
        }
        let stagnant = steps.len() - last_progress >= cfg.stagnation_window;
        if stagnant && (coverage(&graph, tau) >= cfg.coverage_target || target >= tour.len()) {
            trim = true;
            break;
        }

        let mut best: Option<(f64, usize, Pose, f64)> = None;
        for atom in 1..spec.n_atoms() {
            let c = spec.atom_choice(atom)?;
            let (rot, len) = (spec.rotations[c.rotation_index], spec.lengths[c.length_index]);
            let m = step_kinematics(scene, &pose, rot, len);
            if len > 0.0 && m.move_failed {
                continue;
            }
            let next = m.new_pose;
            if rot != 0 {
                let free = free_distance(scene, next.x, next.y, next.heading.unit(), step_len);
                if free < step_len - MOVE_FAIL_SLACK {
                    continue;
                }
            }
            let key = position_key(next.x, next.y);
            let local = observer.observe(&next);
            let mut gain = 0.0;
            let mut discoveries = 0;
            for &(o, v) in &local.nodes {
                if graph.has_seen(o, key) {
                    continue;
                }
                let old = graph.visibility()[o];
                let new = aggregate(old, v);
                if old < tau {
                    gain += new - old;
                }
                if old < tau && new >= tau {
                    discoveries += 1;
                }
            }
            let new_cell = !visited.contains(&key);
            let progress = match fields.get(target).and_then(|f| f.as_ref()) {
                Some(f) if target < tour.len() => {
                    let d = f.distance(next.x, next.y);
                    if d.is_finite() {
                        (d_now - d) / step_len
                    } else {
                        0.0
                    }
                }
                _ => 0.0,
            };
            let w = &cfg.weights;
            let score = w.gain * gain
                + w.discovery * discoveries as f64
                + w.new_viewpoint * new_cell as u8 as f64
                + w.progress * progress;
            if best.map_or(true, |b| score > b.0) {
                best = Some((score, atom, next, gain));
            }
        }
        let Some((_, atom, next, gain)) = best else { break };
        steps.push(DemoStep { pose, action: atom });
        pose = next;
        update_global(&mut graph, &observer.observe(&pose), position_key(pose.x, pose.y));
        visited.insert(position_key(pose.x, pose.y));
        if gain > 1e-9 {
            last_progress = steps.len();
        }
        if target < tour.len() {
            let d = fields[target].as_ref().map_or(f64::INFINITY, |f| f.distance(pose.x, pose.y));
            if d < best_dist - 1e-9 {
                best_dist = d;
                since_closer = 0;
            } else {
                since_closer += 1;
            }
        }
    }
    if trim && last_progress < steps.len() {
        pose = steps[last_progress].pose;
        steps.truncate(last_progress);
    }
    steps.push(DemoStep { pose, action: 0 });

    // Coverage of the kept prefix, recomputed by replay.
    let mut g = GlobalGraph::new(scene.objects.len());
    let demo = Demonstration { scene_id: scene.scene_id.clone(), start, steps, coverage: 0.0 };
    for p in demo.replay_poses(scene)? {
        update_global(&mut g, &observer.observe(&p), position_key(p.x, p.y));
    }
    Ok(Demonstration { coverage: coverage(&g, tau), ..demo })
}

/// Grid start poses from which some forward translation succeeds.
pub fn valid_starts(scene: &SceneSpec, cfg: &ExpertConfig) -> Vec<Pose> {
    let spec = ActionSpec::new(ActionVariant::Sh16);
    let len = spec.lengths[spec.n_lengths() - 1];
    viewpoint_grid(scene, cfg.grid_spacing)
        .into_iter()
        .filter(|p| free_distance(scene, p.x, p.y, p.heading.unit(), len) >= len - MOVE_FAIL_SLACK)
        .collect()
}

/// `starts_per_scene` demonstrations per scene from seeded random starts.
pub fn generate_dataset(
    scenes: &[SceneSpec],
    starts_per_scene: usize,
    cfg: &ExpertConfig,
    seed: u64,
) -> Result<Vec<Demonstration>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(scenes.len() * starts_per_scene);
    for (k, scene) in scenes.iter().enumerate() {
        let observer = Observer::new(scene, cfg.fov_deg, cfg.visibility);
        let grid = viewpoint_grid(scene, cfg.grid_spacing);
        let map = viewpoint_object_map(&observer, &grid);
        let chosen = greedy_select(&map, scene.objects.len(), cfg.visibility.tau, cfg.coverage_target);
        let mut starts = valid_starts(scene, cfg);
        if starts.is_empty() {
            return Err(Error::InvalidScene(format!("{} has no start pose with a free translation", scene.scene_id)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        starts.shuffle(&mut rng);
        for (j, start) in starts.iter().cycle().take(starts_per_scene).enumerate() {
            let tour = order_tour(&map, &chosen, start, cfg, seed.wrapping_add(j as u64));
            out.push(expert_rollout(&observer, *start, &tour, cfg)?);
        }
    }
    Ok(out)
}

pub fn write_jsonl(path: &Path, demos: &[Demonstration]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for d in demos {
        serde_json::to_writer(&mut f, d)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<Demonstration>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
