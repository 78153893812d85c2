use std::collections::HashMap;

use super::{step_kinematics, MotionResult, Pose, SceneSpec};
use crate::actionspace::ActionSpec;

type PoseKey = (u64, u64, i32);

fn key(p: &Pose) -> PoseKey {
    (p.x.to_bits(), p.y.to_bits(), p.heading.degrees())
}

/// Precomputed motion outcomes for every (grid pose, rotation, length).
#[derive(Debug, Clone)]
pub struct PoseCache {
    index: HashMap<PoseKey, usize>,
    rotations: usize,
    lengths: usize,
    table: Vec<MotionResult>,
}

impl PoseCache {
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn lookup(&self, pose: &Pose, rotation_index: usize, length_index: usize) -> Option<&MotionResult> {
        if rotation_index >= self.rotations || length_index >= self.lengths {
            return None;
        }
        let i = *self.index.get(&key(pose))?;
        self.table.get((i * self.rotations + rotation_index) * self.lengths + length_index)
    }
}

pub fn build_pose_cache(scene: &SceneSpec, grid: &[Pose], actions: &ActionSpec) -> PoseCache {
    let mut index = HashMap::with_capacity(grid.len());
    let mut table = Vec::with_capacity(grid.len() * actions.rotations.len() * actions.lengths.len());
    for pose in grid {
        if index.contains_key(&key(pose)) {
            continue;
        }
        index.insert(key(pose), index.len());
        for &rot in &actions.rotations {
            for &len in &actions.lengths {
                table.push(step_kinematics(scene, pose, rot, len));
            }
        }
    }
    PoseCache { index, rotations: actions.rotations.len(), lengths: actions.lengths.len(), table }
}
