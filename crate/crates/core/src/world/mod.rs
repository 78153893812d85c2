//! Deterministic 2.5-D indoor simulator.
//!
//! The agent is a disc moving in the floor plane; objects are axis-aligned
//! boxes. Object heights only matter for line-of-sight, relations and the
//! soft-visibility size proxy.

mod cache;
mod geometry;
mod kinematics;
mod scan;
mod scenegen;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cache::{build_pose_cache, PoseCache};
pub use geometry::{point_box_distance_2d, segment_hits_box_3d, Aabb2};
pub use kinematics::{free_distance, step_kinematics, MOVE_FAIL_SLACK};
pub use scan::{raycast_scan, RangeScan, ScanConfig};
pub use scenegen::{generate_scene, object_type_vocabulary, SceneGenConfig};

/// Heading resolution in degrees.
pub const HEADING_STEP: i32 = 15;

/// Axis-aligned room footprint in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self { min_x, min_y, max_x, max_y }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    pub object_type: String,
    pub center: [f64; 3],
    pub size: [f64; 3],
    pub parent_receptacle: Option<String>,
    pub wall_mounted: bool,
    pub is_obstacle: bool,
}

impl ObjectSpec {
    /// A free-standing obstacle box.
    pub fn furniture(id: &str, object_type: &str, center: [f64; 3], size: [f64; 3]) -> Self {
        Self {
            id: id.to_string(),
            object_type: object_type.to_string(),
            center,
            size,
            parent_receptacle: None,
            wall_mounted: false,
            is_obstacle: true,
        }
    }

    /// A small non-blocking item resting on `parent`.
    pub fn item(id: &str, object_type: &str, center: [f64; 3], size: [f64; 3], parent: Option<&str>) -> Self {
        Self {
            id: id.to_string(),
            object_type: object_type.to_string(),
            center,
            size,
            parent_receptacle: parent.map(str::to_string),
            wall_mounted: false,
            is_obstacle: false,
        }
    }

    pub fn wall_item(id: &str, object_type: &str, center: [f64; 3], size: [f64; 3]) -> Self {
        Self { wall_mounted: true, ..Self::item(id, object_type, center, size, None) }
    }

    /// Largest box extent, the size proxy for soft visibility.
    pub fn s_max(&self) -> f64 {
        self.size[0].max(self.size[1]).max(self.size[2])
    }

    pub fn min_corner(&self) -> [f64; 3] {
        [self.center[0] - 0.5 * self.size[0], self.center[1] - 0.5 * self.size[1], self.center[2] - 0.5 * self.size[2]]
    }

    pub fn max_corner(&self) -> [f64; 3] {
        [self.center[0] + 0.5 * self.size[0], self.center[1] + 0.5 * self.size[1], self.center[2] + 0.5 * self.size[2]]
    }

    pub fn footprint(&self) -> Aabb2 {
        let lo = self.min_corner();
        let hi = self.max_corner();
        Aabb2::new(lo[0], lo[1], hi[0], hi[1])
    }

    pub fn bottom(&self) -> f64 {
        self.center[2] - 0.5 * self.size[2]
    }

    pub fn top(&self) -> f64 {
        self.center[2] + 0.5 * self.size[2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub scene_id: String,
    pub bounds: Rect,
    pub agent_radius: f64,
    pub objects: Vec<ObjectSpec>,
    pub rng_seed: u64,
}

impl SceneSpec {
    /// An object-free room with its lower-left corner at the origin.
    pub fn empty_room(scene_id: &str, width: f64, height: f64, agent_radius: f64) -> Self {
        Self {
            scene_id: scene_id.to_string(),
            bounds: Rect::new(0.0, 0.0, width, height),
            agent_radius,
            objects: Vec::new(),
            rng_seed: 0,
        }
    }

    pub fn with_object(mut self, object: ObjectSpec) -> Self {
        self.objects.push(object);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.agent_radius > 0.0) {
            return Err(Error::InvalidScene("agent_radius must be positive".into()));
        }
        if !(self.bounds.width() > 0.0 && self.bounds.height() > 0.0) {
            return Err(Error::InvalidScene("empty bounds".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.id.as_str()) {
                return Err(Error::InvalidScene(format!("duplicate object id {}", o.id)));
            }
            if o.size.iter().any(|&s| !(s > 0.0)) {
                return Err(Error::InvalidScene(format!("non-positive size for {}", o.id)));
            }
            let lo = o.min_corner();
            let hi = o.max_corner();
            let eps = 1e-9;
            if lo[0] < self.bounds.min_x - eps
                || lo[1] < self.bounds.min_y - eps
                || hi[0] > self.bounds.max_x + eps
                || hi[1] > self.bounds.max_y + eps
                || lo[2] < -eps
            {
                return Err(Error::InvalidScene(format!("{} lies outside the bounds", o.id)));
            }
        }
        for o in &self.objects {
            if let Some(p) = &o.parent_receptacle {
                if !ids.contains(p.as_str()) || p == &o.id {
                    return Err(Error::InvalidScene(format!("{} names unknown parent receptacle {p}", o.id)));
                }
            }
        }
        Ok(())
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    /// Footprints of all objects that block motion and rays in the plane.
    pub fn obstacle_footprints(&self) -> Vec<Aabb2> {
        self.objects.iter().filter(|o| o.is_obstacle).map(|o| o.footprint()).collect()
    }

    /// True when a disc of `agent_radius` centred at (x, y) lies within the
    /// bounds and does not overlap any obstacle.
    pub fn is_free(&self, x: f64, y: f64) -> bool {
        let r = self.agent_radius;
        let b = &self.bounds;
        if x < b.min_x + r || x > b.max_x - r || y < b.min_y + r || y > b.max_y - r {
            return false;
        }
        self.objects.iter().filter(|o| o.is_obstacle).all(|o| point_box_distance_2d(x, y, &o.footprint()) >= r)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scene: SceneSpec = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }
}

/// Agent heading in degrees, counter-clockwise from +x, a multiple of 15.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct Heading(u16);

impl Heading {
    pub fn new(degrees: i32) -> Result<Self> {
        if degrees.rem_euclid(HEADING_STEP) != 0 {
            return Err(Error::InvalidPose(format!("heading {degrees} is not a multiple of 15")));
        }
        Ok(Self(degrees.rem_euclid(360) as u16))
    }

    pub fn degrees(self) -> i32 {
        self.0 as i32
    }

    pub fn rotated(self, degrees: i32) -> Result<Self> {
        Self::new(self.0 as i32 + degrees)
    }

    pub fn unit(self) -> (f64, f64) {
        let (s, c) = (self.0 as f64).to_radians().sin_cos();
        (c, s)
    }
}

impl TryFrom<i32> for Heading {
    type Error = Error;
    fn try_from(v: i32) -> Result<Self> {
        if !(0..360).contains(&v) {
            return Err(Error::InvalidPose(format!("heading {v} outside [0, 345]")));
        }
        Heading::new(v)
    }
}

impl From<Heading> for i32 {
    fn from(h: Heading) -> i32 {
        h.degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: Heading,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: Heading) -> Self {
        Self { x, y, heading }
    }

    pub fn distance_to(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionResult {
    pub new_pose: Pose,
    pub target_dist: f64,
    pub actual_dist: f64,
    pub move_failed: bool,
}

/// Collision-free grid positions at `spacing`, each crossed with the eight
/// headings {0, 45, ..., 315}. Rows run along +y, columns along +x, and the
/// grid is centred in the room.
pub fn viewpoint_grid(scene: &SceneSpec, spacing: f64) -> Vec<Pose> {
    assert!(spacing > 0.0, "grid spacing must be positive");
    let axis = |lo: f64, hi: f64| -> Vec<f64> {
        let extent = hi - lo;
        let n = (extent / spacing + 1e-9).floor() as usize;
        let offset = 0.5 * (extent - n as f64 * spacing);
        (0..=n).map(|k| lo + offset + k as f64 * spacing).collect()
    };
    let xs = axis(scene.bounds.min_x, scene.bounds.max_x);
    let ys = axis(scene.bounds.min_y, scene.bounds.max_y);
    let mut out = Vec::new();
    for &y in &ys {
        for &x in &xs {
            if scene.is_free(x, y) {
                for h in 0..8 {
                    out.push(Pose::new(x, y, Heading(h * 45)));
                }
            }
        }
    }
    out
}
