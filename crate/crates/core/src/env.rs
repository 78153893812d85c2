//! A single exploration episode stepped action by action.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actionspace::{decode, ActionChoice, ActionSpec, ActionVariant, Decoded};
use crate::error::{Error, Result};
use crate::features::{
    graph_vector, stagnation_step, FeatureContext, ObservationLayout, StagnationConfig, StagnationState,
};
use crate::reward::{event_reward, potential, RewardConfig, StepEvents};
use crate::ssg::{
    metrics_with_edge_total, position_key, update_global, GlobalGraph, LocalGraph, MetricsSnapshot, Observer,
    VisibilityParams,
};
use crate::world::{raycast_scan, step_kinematics, viewpoint_grid, Pose, ScanConfig, SceneSpec};

/// Spacing of the grid from which start poses are drawn.
pub const START_GRID_SPACING: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub variant: ActionVariant,
    pub depth: bool,
    pub scan: ScanConfig,
    pub fov_deg: f64,
    pub visibility: VisibilityParams,
    pub reward: RewardConfig,
    pub stagnation: StagnationConfig,
    pub slots: usize,
    pub max_steps: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            variant: ActionVariant::Sh16,
            depth: false,
            scan: ScanConfig::default(),
            fov_deg: 90.0,
            visibility: VisibilityParams::default(),
            reward: RewardConfig::default(),
            stagnation: StagnationConfig::default(),
            slots: 64,
            max_steps: 40,
        }
    }
}

impl EnvConfig {
    pub fn actions(&self) -> ActionSpec {
        ActionSpec::new(self.variant)
    }

    pub fn layout(&self) -> ObservationLayout {
        ObservationLayout::new(self.depth, self.scan.rays, self.slots, &self.actions())
    }
}

/// Immutable per-scene data shared by every environment on that scene.
#[derive(Debug, Clone)]
pub struct SceneContext {
    pub observer: Observer,
    pub starts: Vec<Pose>,
    pub n_edges: usize,
}

impl SceneContext {
    pub fn new(scene: &SceneSpec, cfg: &EnvConfig) -> Result<Self> {
        scene.validate()?;
        let starts = viewpoint_grid(scene, START_GRID_SPACING);
        if starts.is_empty() {
            return Err(Error::InvalidScene(format!("{} has no free start pose", scene.scene_id)));
        }
        let observer = Observer::new(scene, cfg.fov_deg, cfg.visibility);
        let n_edges = observer.relations().len();
        Ok(Self { observer, starts, n_edges })
    }

    pub fn scene(&self) -> &SceneSpec {
        self.observer.scene()
    }
}

/// End-of-episode statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub scene_id: String,
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

impl EpisodeSummary {
    pub fn move_success_rate(&self) -> Option<f64> {
        (self.translations > 0).then(|| self.successful_translations as f64 / self.translations as f64)
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub reward: f64,
    /// Episode ended by Stop.
    pub done: bool,
    /// Episode ended by the step budget.
    pub truncated: bool,
    pub is_translation: bool,
    pub move_failed: bool,
    pub events: StepEvents,
    /// Shaping potential after the step.
    pub potential: f64,
    /// Observation after the step (meaningless once the episode ended).
    pub observation: Vec<f64>,
    pub summary: Option<EpisodeSummary>,
}

#[derive(Debug, Clone)]
struct Episode {
    pose: Pose,
    t: usize,
    graph: GlobalGraph,
    stagnation: StagnationState,
    stag_x: [f64; 3],
    metrics: MetricsSnapshot,
    potential: f64,
    last_action: Option<(ActionChoice, bool)>,
    steps_since_exploration: usize,
    episodic_return: f64,
    translations: usize,
    successes: usize,
    path_length: f64,
    poses: Vec<Pose>,
}

#[derive(Debug, Clone)]
pub struct Env {
    ctx: Arc<SceneContext>,
    cfg: Arc<EnvConfig>,
    actions: ActionSpec,
    features: FeatureContext,
    ep: Option<Episode>,
}

impl Env {
    pub fn new(ctx: Arc<SceneContext>, cfg: Arc<EnvConfig>) -> Self {
        let layout = cfg.layout();
        let features = FeatureContext::new(ctx.scene(), layout, cfg.scan.max_range);
        let actions = cfg.actions();
        Self { ctx, cfg, actions, features, ep: None }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn context(&self) -> &Arc<SceneContext> {
        &self.ctx
    }

    pub fn actions(&self) -> &ActionSpec {
        &self.actions
    }

    pub fn layout(&self) -> &ObservationLayout {
        &self.features.layout
    }

    pub fn pose(&self) -> Option<Pose> {
        self.ep.as_ref().map(|e| e.pose)
    }

    pub fn step_index(&self) -> usize {
        self.ep.as_ref().map_or(0, |e| e.t)
    }

    pub fn graph(&self) -> Option<&GlobalGraph> {
        self.ep.as_ref().map(|e| &e.graph)
    }

    pub fn metrics(&self) -> Option<MetricsSnapshot> {
        self.ep.as_ref().map(|e| e.metrics)
    }

    pub fn potential(&self) -> Option<f64> {
        self.ep.as_ref().map(|e| e.potential)
    }

    /// Starts an episode at a start pose drawn from `rng`.
    pub fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let pose = self.ctx.starts[rng.gen_range(0..self.ctx.starts.len())];
        self.reset_to(pose)
    }

    pub fn reset_to(&mut self, pose: Pose) -> Vec<f64> {
        let n = self.ctx.scene().objects.len();
        let mut ep = Episode {
            pose,
            t: 0,
            graph: GlobalGraph::new(n),
            stagnation: StagnationState::new(self.cfg.stagnation.d_sg),
            stag_x: [0.0; 3],
            metrics: MetricsSnapshot::empty(),
            potential: 0.0,
            last_action: None,
            steps_since_exploration: 0,
            episodic_return: 0.0,
            translations: 0,
            successes: 0,
            path_length: 0.0,
            poses: vec![pose],
        };
        let (local, _) = self.observe_into(&mut ep);
        ep.potential = potential(&ep.metrics, 0, &self.cfg.reward);
        let obs = self.observation(&ep, &local);
        self.ep = Some(ep);
        obs
    }

    /// Observes at the current pose, folds the view into the global graph and
    /// advances the stagnation signal. Returns the view and the number of new objects.
    fn observe_into(&self, ep: &mut Episode) -> (LocalGraph, usize) {
        let local = self.ctx.observer.observe(&ep.pose);
        let summary = update_global(&mut ep.graph, &local, position_key(ep.pose.x, ep.pose.y));
        ep.metrics = metrics_with_edge_total(&ep.graph, self.ctx.n_edges, self.cfg.visibility.tau);
        let g = graph_vector(&ep.graph, self.cfg.stagnation.d_sg);
        ep.stag_x = stagnation_step(&mut ep.stagnation, &g, &self.cfg.stagnation)
            .expect("graph vector length equals d_sg by construction");
        (local, summary.new_nodes)
    }

    fn observation(&self, ep: &Episode, local: &LocalGraph) -> Vec<f64> {
        let scan = self.cfg.depth.then(|| raycast_scan(self.ctx.scene(), &ep.pose, &self.cfg.scan));
        let obs = self.features.build(
            scan.as_ref(),
            local,
            &ep.graph,
            ep.metrics.r_node,
            ep.last_action.as_ref().map(|(c, s)| (c, *s)),
            ep.stag_x,
        );
        obs.pack(&self.features.layout).expect("layout matches by construction")
    }

    pub fn step(&mut self, choice: &ActionChoice) -> Result<StepOutcome> {
        let decoded = decode(choice, &self.actions)?;
        let mut ep = self.ep.take().ok_or_else(|| Error::InvalidPose("step before reset".into()))?;
        let (is_stop, motion) = match decoded {
            Decoded::Stop => (true, None),
            Decoded::Idle => (false, None),
            Decoded::Motion { rotation, length } => (false, Some((rotation, length))),
        };
        let mut events = StepEvents {
            action_was_stop: is_stop,
            steps_since_exploration: ep.steps_since_exploration,
            ..Default::default()
        };
        if let Some((rotation, length)) = motion {
            let m = step_kinematics(self.ctx.scene(), &ep.pose, rotation, length);
            events.target_dist = m.target_dist;
            events.actual_dist = m.actual_dist;
            events.is_translation = length > 0.0;
            events.move_failed = events.is_translation && m.move_failed;
            ep.pose = m.new_pose;
            if events.is_translation {
                ep.translations += 1;
                if !m.move_failed {
                    ep.successes += 1;
                }
            }
            ep.path_length += m.actual_dist;
        }
        ep.t += 1;
        ep.poses.push(ep.pose);
        ep.last_action = Some((*choice, is_stop));
        let (local, new_nodes) = self.observe_into(&mut ep);
        events.new_object_discovered = new_nodes > 0;
        ep.steps_since_exploration = if new_nodes > 0 { 0 } else { ep.steps_since_exploration + 1 };
        let s_now = potential(&ep.metrics, ep.t, &self.cfg.reward);
        let reward = (s_now - ep.potential) + event_reward(&events, &self.cfg.reward);
        ep.potential = s_now;
        ep.episodic_return += reward;
        let truncated = !is_stop && ep.t >= self.cfg.max_steps;
        let observation = self.observation(&ep, &local);
        let summary = (is_stop || truncated).then(|| EpisodeSummary {
            scene_id: self.ctx.scene().scene_id.clone(),
            node_recall: ep.metrics.r_node,
            edge_recall: ep.metrics.r_edge,
            episodic_return: ep.episodic_return,
            length: ep.t,
            translations: ep.translations,
            successful_translations: ep.successes,
            path_length: ep.path_length,
            stopped: is_stop,
            truncated,
            poses: ep.poses.clone(),
        });
        let outcome = StepOutcome {
            reward,
            done: is_stop,
            truncated,
            is_translation: events.is_translation,
            move_failed: events.move_failed,
            events,
            potential: s_now,
            observation,
            summary,
        };
        if !(is_stop || truncated) {
            self.ep = Some(ep);
        }
        Ok(outcome)
    }
}
