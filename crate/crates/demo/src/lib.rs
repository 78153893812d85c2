//! Browser demo: drive the exploration agent by hand or watch the expert.

use std::sync::Arc;

use essg_core::actionspace::ActionVariant;
use essg_core::env::{Env, EnvConfig, SceneContext};
use essg_core::expert::{expert_rollout, plan_tour, ExpertConfig};
use essg_core::ssg::{graph_metrics, Observer};
use essg_core::world::{generate_scene, Pose, SceneGenConfig, SceneSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct ObjectView<'a> {
    id: &'a str,
    kind: &'a str,
    x: f64,
    y: f64,
    w: f64,
    d: f64,
    obstacle: bool,
}

#[derive(Serialize)]
struct SceneView<'a> {
    id: &'a str,
    width: f64,
    height: f64,
    objects: Vec<ObjectView<'a>>,
}

#[derive(Serialize)]
struct StepView {
    x: f64,
    y: f64,
    heading: i32,
    reward: f64,
    move_failed: bool,
    done: bool,
    node_recall: f64,
    edge_recall: f64,
    visibility: Vec<f64>,
}

#[derive(Serialize)]
struct ExpertView {
    poses: Vec<[f64; 3]>,
    actions: Vec<usize>,
    coverage: f64,
}

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// One generated scene with an agent stepping in the 16-action space.
#[wasm_bindgen]
pub struct Lab {
    scene: SceneSpec,
    ctx: Arc<SceneContext>,
    env: Env,
    cfg: Arc<EnvConfig>,
}

#[wasm_bindgen]
impl Lab {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64) -> Result<Lab, JsValue> {
        let scene = generate_scene(seed, &SceneGenConfig::default()).map_err(js_err)?;
        let cfg = Arc::new(EnvConfig { variant: ActionVariant::Sh16, slots: 16, ..Default::default() });
        let ctx = Arc::new(SceneContext::new(&scene, &cfg).map_err(js_err)?);
        let mut env = Env::new(ctx.clone(), cfg.clone());
        env.reset_to(ctx.starts[ctx.starts.len() / 2]);
        Ok(Lab { scene, ctx, env, cfg })
    }

    /// Room bounds and object footprints as JSON.
    pub fn scene_json(&self) -> Result<String, JsValue> {
        let s = &self.scene;
        let view = SceneView {
            id: &s.scene_id,
            width: s.bounds.width(),
            height: s.bounds.height(),
            objects: s
                .objects
                .iter()
                .map(|o| ObjectView {
                    id: &o.id,
                    kind: &o.object_type,
                    x: o.center[0] - s.bounds.min_x,
                    y: o.center[1] - s.bounds.min_y,
                    w: o.size[0],
                    d: o.size[1],
                    obstacle: o.is_obstacle,
                })
                .collect(),
        };
        serde_json::to_string(&view).map_err(js_err)
    }

    /// Starts a new episode at the given start-pose index (wrapped).
    pub fn reset(&mut self, start: usize) -> Result<String, JsValue> {
        let pose = self.ctx.starts[start % self.ctx.starts.len()];
        self.env.reset_to(pose);
        self.view(0.0, false, false)
    }

    /// Applies one action: rotation index 0..8 (45 degree steps) and whether
    /// to translate 0.3 m afterwards. Rotation 0 without translation is Stop.
    pub fn step(&mut self, rotation: usize, forward: bool) -> Result<String, JsValue> {
        if self.env.pose().is_none() {
            self.env.reset_to(self.ctx.starts[0]);
        }
        let spec = self.cfg.actions();
        let choice = spec.atom_choice(spec.atom_index(rotation % 8, forward as usize)).map_err(js_err)?;
        let out = self.env.step(&choice).map_err(js_err)?;
        let done = out.summary.is_some();
        if let Some(s) = out.summary {
            let last = *s.poses.last().expect("episodes record their poses");
            self.env.reset_to(last);
        }
        self.view(out.reward, out.move_failed, done)
    }

    /// Expert demonstration from the current pose.
    pub fn expert_json(&self) -> Result<String, JsValue> {
        let cfg = ExpertConfig::default();
        let observer = Observer::new(&self.scene, cfg.fov_deg, cfg.visibility);
        let start = self.env.pose().unwrap_or(self.ctx.starts[0]);
        let tour = plan_tour(&observer, &start, &cfg, 0);
        let demo = expert_rollout(&observer, start, &tour, &cfg).map_err(js_err)?;
        let poses = demo.replay_poses(&self.scene).map_err(js_err)?;
        let view = ExpertView {
            poses: poses.iter().map(pose3).collect(),
            actions: demo.steps.iter().map(|s| s.action).collect(),
            coverage: demo.coverage,
        };
        serde_json::to_string(&view).map_err(js_err)
    }
}

fn pose3(p: &Pose) -> [f64; 3] {
    [p.x, p.y, p.heading.degrees() as f64]
}

impl Lab {
    fn view(&self, reward: f64, move_failed: bool, done: bool) -> Result<String, JsValue> {
        let pose = self.env.pose().ok_or_else(|| js_err("no active episode"))?;
        let g = self.env.graph().ok_or_else(|| js_err("no active episode"))?;
        let m = graph_metrics(g, &self.scene, &self.cfg.visibility);
        let b = &self.scene.bounds;
        let v = StepView {
            x: pose.x - b.min_x,
            y: pose.y - b.min_y,
            heading: pose.heading.degrees(),
            reward,
            move_failed,
            done,
            node_recall: m.r_node,
            edge_recall: m.r_edge,
            visibility: g.visibility().to_vec(),
        };
        serde_json::to_string(&v).map_err(js_err)
    }
}
