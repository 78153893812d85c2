use super::relations::{extract_relations, Edge};
use super::{soft_visibility, LocalGraph, VisibilityParams};
use crate::world::{segment_hits_box_3d, Pose, SceneSpec};

/// Camera height used for the occlusion ray, metres.
pub const EYE_HEIGHT: f64 = 1.5;

/// Per-scene state for repeated local observations.
#[derive(Debug, Clone)]
pub struct Observer {
    scene: SceneSpec,
    fov_deg: f64,
    params: VisibilityParams,
    relations: Vec<Edge>,
    /// Objects that may not occlude object `i`: itself and its receptacle chain.
    exempt: Vec<Vec<usize>>,
    obstacles: Vec<(usize, [f64; 3], [f64; 3])>,
}

impl Observer {
    pub fn new(scene: &SceneSpec, fov_deg: f64, params: VisibilityParams) -> Self {
        Self::with_relations(scene, fov_deg, params, extract_relations(scene))
    }

    pub fn with_relations(scene: &SceneSpec, fov_deg: f64, params: VisibilityParams, relations: Vec<Edge>) -> Self {
        assert!(fov_deg > 0.0 && fov_deg <= 360.0, "fov must lie in (0, 360]");
        let n = scene.objects.len();
        let exempt = (0..n)
            .map(|i| {
                let mut chain = vec![i];
                let mut cur = i;
                while let Some(p) = scene.objects[cur].parent_receptacle.as_deref().and_then(|p| scene.object_index(p))
                {
                    if chain.contains(&p) || chain.len() > n {
                        break;
                    }
                    chain.push(p);
                    cur = p;
                }
                chain
            })
            .collect();
        let obstacles = scene
            .objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.is_obstacle)
            .map(|(i, o)| (i, o.min_corner(), o.max_corner()))
            .collect();
        Self { scene: scene.clone(), fov_deg, params, relations, exempt, obstacles }
    }

    pub fn scene(&self) -> &SceneSpec {
        &self.scene
    }

    pub fn fov_deg(&self) -> f64 {
        self.fov_deg
    }

    pub fn relations(&self) -> &[Edge] {
        &self.relations
    }

    pub fn params(&self) -> &VisibilityParams {
        &self.params
    }

    fn in_cone(&self, pose: &Pose, dx: f64, dy: f64) -> bool {
        if self.fov_deg >= 360.0 || dx.hypot(dy) < 1e-9 {
            return true;
        }
        let bearing = dy.atan2(dx).to_degrees();
        let diff = (bearing - pose.heading.degrees() as f64 + 540.0).rem_euclid(360.0) - 180.0;
        diff.abs() <= 0.5 * self.fov_deg + 1e-9
    }

    fn occluded(&self, pose: &Pose, object: usize) -> bool {
        let eye = [pose.x, pose.y, EYE_HEIGHT];
        let target = self.scene.objects[object].center;
        self.obstacles
            .iter()
            .filter(|(i, _, _)| !self.exempt[object].contains(i))
            .any(|(_, lo, hi)| segment_hits_box_3d(eye, target, *lo, *hi))
    }

    pub fn observe(&self, pose: &Pose) -> LocalGraph {
        let mut nodes = Vec::new();
        for (i, o) in self.scene.objects.iter().enumerate() {
            let (dx, dy) = (o.center[0] - pose.x, o.center[1] - pose.y);
            if !self.in_cone(pose, dx, dy) || self.occluded(pose, i) {
                continue;
            }
            nodes.push((i, soft_visibility(dx.hypot(dy), o.s_max(), &self.params)));
        }
        let n = self.scene.objects.len();
        let visible = |k: usize| k >= n || nodes.binary_search_by_key(&k, |e: &(usize, f64)| e.0).is_ok();
        let edges = self.relations.iter().copied().filter(|&(a, _, b)| visible(a) && visible(b)).collect();
        LocalGraph { nodes, edges }
    }
}

pub fn observe_local(scene: &SceneSpec, pose: &Pose, fov_deg: f64, p: &VisibilityParams) -> LocalGraph {
    Observer::new(scene, fov_deg, *p).observe(pose)
}
