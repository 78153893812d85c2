use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::Aabb2;
use super::{viewpoint_grid, ObjectSpec, Rect, SceneSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGenConfig {
    /// Side length range of the rectangular room in metres.
    pub room_size: (f64, f64),
    pub receptacles: (usize, usize),
    pub small_objects: (usize, usize),
    pub wall_objects: (usize, usize),
    pub agent_radius: f64,
    /// Minimum gap between furniture pieces, and between furniture and walls
    /// unless the piece is flush against the wall.
    pub clearance: f64,
    pub max_retries: usize,
}

impl Default for SceneGenConfig {
    fn default() -> Self {
        Self {
            room_size: (6.0, 10.0),
            receptacles: (4, 8),
            small_objects: (8, 20),
            wall_objects: (2, 4),
            agent_radius: 0.2,
            clearance: 0.6,
            max_retries: 500,
        }
    }
}

struct FurnitureKind {
    name: &'static str,
    x: (f64, f64),
    y: (f64, f64),
    z: (f64, f64),
    joinable: bool,
}

const FURNITURE: &[FurnitureKind] = &[
    FurnitureKind { name: "Table", x: (0.8, 1.6), y: (0.6, 1.0), z: (0.72, 0.78), joinable: false },
    FurnitureKind { name: "CounterTop", x: (1.0, 1.8), y: (0.6, 0.7), z: (0.9, 0.92), joinable: true },
    FurnitureKind { name: "Desk", x: (1.0, 1.4), y: (0.6, 0.8), z: (0.72, 0.76), joinable: true },
    FurnitureKind { name: "Sofa", x: (1.6, 2.0), y: (0.8, 0.95), z: (0.8, 0.9), joinable: false },
    FurnitureKind { name: "Bed", x: (1.4, 1.8), y: (1.9, 2.0), z: (0.5, 0.6), joinable: false },
    FurnitureKind { name: "Shelf", x: (0.8, 1.2), y: (0.35, 0.45), z: (1.7, 2.0), joinable: true },
    FurnitureKind { name: "Dresser", x: (0.8, 1.2), y: (0.45, 0.55), z: (0.9, 1.1), joinable: false },
    FurnitureKind { name: "Fridge", x: (0.7, 0.8), y: (0.7, 0.8), z: (1.8, 1.9), joinable: false },
    FurnitureKind { name: "SideTable", x: (0.4, 0.6), y: (0.4, 0.6), z: (0.5, 0.6), joinable: false },
];

/// (type, footprint extent range, height range)
const SMALL: &[(&str, (f64, f64), (f64, f64))] = &[
    ("Cup", (0.08, 0.10), (0.10, 0.12)),
    ("Mug", (0.09, 0.12), (0.09, 0.11)),
    ("Book", (0.15, 0.25), (0.03, 0.05)),
    ("Laptop", (0.30, 0.35), (0.02, 0.03)),
    ("Bowl", (0.15, 0.20), (0.06, 0.08)),
    ("Vase", (0.10, 0.15), (0.25, 0.40)),
    ("HousePlant", (0.20, 0.30), (0.30, 0.50)),
    ("RemoteControl", (0.15, 0.20), (0.02, 0.03)),
    ("Apple", (0.07, 0.09), (0.07, 0.09)),
    ("Bottle", (0.07, 0.09), (0.25, 0.32)),
    ("Box", (0.25, 0.40), (0.15, 0.30)),
    ("Candle", (0.06, 0.08), (0.10, 0.15)),
    ("CellPhone", (0.07, 0.15), (0.01, 0.02)),
    ("Pillow", (0.40, 0.50), (0.10, 0.15)),
    ("DeskLamp", (0.15, 0.20), (0.35, 0.50)),
    ("Statue", (0.10, 0.20), (0.20, 0.35)),
];

/// (type, width range, height range)
const WALL: &[(&str, (f64, f64), (f64, f64))] = &[
    ("Painting", (0.5, 1.2), (0.4, 0.9)),
    ("Window", (0.8, 1.5), (0.8, 1.2)),
    ("Television", (0.8, 1.3), (0.5, 0.75)),
    ("Mirror", (0.4, 0.8), (0.6, 1.0)),
    ("Clock", (0.25, 0.35), (0.25, 0.35)),
    ("LightSwitch", (0.08, 0.12), (0.08, 0.12)),
];

const WALL_DEPTH: f64 = 0.05;

/// Every object type the generator can emit, in a fixed order.
pub fn object_type_vocabulary() -> Vec<&'static str> {
    FURNITURE.iter().map(|k| k.name).chain(SMALL.iter().map(|s| s.0)).chain(WALL.iter().map(|w| w.0)).collect()
}

fn uniform(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.gen_range(range.0..range.1)
    } else {
        range.0
    }
}

fn count(rng: &mut ChaCha8Rng, range: (usize, usize)) -> usize {
    rng.gen_range(range.0..=range.1.max(range.0))
}

struct Builder<'a> {
    cfg: &'a SceneGenConfig,
    bounds: Rect,
    rng: ChaCha8Rng,
    objects: Vec<ObjectSpec>,
}

impl Builder<'_> {
    fn next_id(&self, kind: &str) -> String {
        format!("{kind}_{:02}", self.objects.len())
    }

    fn furniture_gap_ok(&self, fp: &Aabb2, except: Option<usize>) -> bool {
        self.objects
            .iter()
            .enumerate()
            .filter(|(i, o)| o.is_obstacle && Some(*i) != except)
            .all(|(_, o)| fp.gap(&o.footprint()) >= self.cfg.clearance)
    }

    fn wall_gaps_ok(&self, fp: &Aabb2) -> bool {
        let b = &self.bounds;
        let c = self.cfg.clearance;
        let eps = 1e-9;
        let ok = |gap: f64| gap.abs() < eps || gap >= c;
        fp.min[0] >= b.min_x - eps
            && fp.min[1] >= b.min_y - eps
            && fp.max[0] <= b.max_x + eps
            && fp.max[1] <= b.max_y + eps
            && ok(fp.min[0] - b.min_x)
            && ok(b.max_x - fp.max[0])
            && ok(fp.min[1] - b.min_y)
            && ok(b.max_y - fp.max[1])
    }

    fn place_furniture(&mut self) -> Result<usize> {
        for _ in 0..self.cfg.max_retries {
            let kind = FURNITURE.choose(&mut self.rng).expect("catalog is non-empty");
            let (mut sx, mut sy) = (uniform(&mut self.rng, kind.x), uniform(&mut self.rng, kind.y));
            if self.rng.gen_bool(0.5) {
                std::mem::swap(&mut sx, &mut sy);
            }
            let sz = uniform(&mut self.rng, kind.z);
            let b = self.bounds;
            let c = self.cfg.clearance;
            let (cx, cy) = if self.rng.gen_bool(0.6) {
                // Flush against a random wall.
                match self.rng.gen_range(0..4) {
                    0 => (b.min_x + 0.5 * sx, uniform(&mut self.rng, (b.min_y + 0.5 * sy, b.max_y - 0.5 * sy))),
                    1 => (b.max_x - 0.5 * sx, uniform(&mut self.rng, (b.min_y + 0.5 * sy, b.max_y - 0.5 * sy))),
                    2 => (uniform(&mut self.rng, (b.min_x + 0.5 * sx, b.max_x - 0.5 * sx)), b.min_y + 0.5 * sy),
                    _ => (uniform(&mut self.rng, (b.min_x + 0.5 * sx, b.max_x - 0.5 * sx)), b.max_y - 0.5 * sy),
                }
            } else {
                let xr = (b.min_x + c + 0.5 * sx, b.max_x - c - 0.5 * sx);
                let yr = (b.min_y + c + 0.5 * sy, b.max_y - c - 0.5 * sy);
                if xr.1 <= xr.0 || yr.1 <= yr.0 {
                    continue;
                }
                (uniform(&mut self.rng, xr), uniform(&mut self.rng, yr))
            };
            let fp = Aabb2::new(cx - 0.5 * sx, cy - 0.5 * sy, cx + 0.5 * sx, cy + 0.5 * sy);
            if !self.wall_gaps_ok(&fp) || !self.furniture_gap_ok(&fp, None) {
                continue;
            }
            let id = self.next_id(kind.name);
            self.objects.push(ObjectSpec::furniture(&id, kind.name, [cx, cy, 0.5 * sz], [sx, sy, sz]));
            return Ok(self.objects.len() - 1);
        }
        Err(Error::Generation("could not place furniture".into()))
    }

    /// Tries to place a copy of furniture `i` flush against one of its sides.
    fn place_joined(&mut self, i: usize) -> bool {
        let base = self.objects[i].clone();
        let [sx, sy, _] = base.size;
        let mut sides = [0, 1, 2, 3];
        sides.shuffle(&mut self.rng);
        for side in sides {
            let (cx, cy) = match side {
                0 => (base.center[0] + sx, base.center[1]),
                1 => (base.center[0] - sx, base.center[1]),
                2 => (base.center[0], base.center[1] + sy),
                _ => (base.center[0], base.center[1] - sy),
            };
            let fp = Aabb2::new(cx - 0.5 * sx, cy - 0.5 * sy, cx + 0.5 * sx, cy + 0.5 * sy);
            if !self.wall_gaps_ok(&fp) || !self.furniture_gap_ok(&fp, Some(i)) {
                continue;
            }
            let id = self.next_id(&base.object_type);
            self.objects.push(ObjectSpec::furniture(&id, &base.object_type, [cx, cy, base.center[2]], base.size));
            return true;
        }
        false
    }

    fn place_small(&mut self, receptacles: &[usize]) -> Result<()> {
        let margin = 0.02;
        for _ in 0..self.cfg.max_retries {
            let &parent = receptacles.choose(&mut self.rng).expect("at least one receptacle");
            let (kind, extent, height) = *SMALL.choose(&mut self.rng).expect("catalog is non-empty");
            let sx = uniform(&mut self.rng, extent);
            let sy = uniform(&mut self.rng, extent);
            let sz = uniform(&mut self.rng, height);
            let p = self.objects[parent].footprint();
            let xr = (p.min[0] + margin + 0.5 * sx, p.max[0] - margin - 0.5 * sx);
            let yr = (p.min[1] + margin + 0.5 * sy, p.max[1] - margin - 0.5 * sy);
            if xr.1 <= xr.0 || yr.1 <= yr.0 {
                continue;
            }
            let cx = uniform(&mut self.rng, xr);
            let cy = uniform(&mut self.rng, yr);
            let fp = Aabb2::new(cx - 0.5 * sx, cy - 0.5 * sy, cx + 0.5 * sx, cy + 0.5 * sy);
            let parent_id = self.objects[parent].id.clone();
            let clash = self
                .objects
                .iter()
                .filter(|o| o.parent_receptacle.as_deref() == Some(parent_id.as_str()))
                .any(|o| fp.gap(&o.footprint()) < margin);
            if clash {
                continue;
            }
            let cz = self.objects[parent].top() + 0.5 * sz;
            let id = self.next_id(kind);
            self.objects.push(ObjectSpec::item(&id, kind, [cx, cy, cz], [sx, sy, sz], Some(&parent_id)));
            return Ok(());
        }
        Err(Error::Generation("could not place a small object".into()))
    }

    fn place_wall_object(&mut self) -> Result<()> {
        for _ in 0..self.cfg.max_retries {
            let (kind, width, height) = *WALL.choose(&mut self.rng).expect("catalog is non-empty");
            let w = uniform(&mut self.rng, width);
            let h = uniform(&mut self.rng, height);
            let cz = uniform(&mut self.rng, (1.1, 1.8)).max(0.5 * h + 0.3);
            let b = self.bounds;
            let (center, size) = match self.rng.gen_range(0..4) {
                0 => {
                    let y = uniform(&mut self.rng, (b.min_y + 0.3 + 0.5 * w, b.max_y - 0.3 - 0.5 * w));
                    ([b.min_x + 0.5 * WALL_DEPTH, y, cz], [WALL_DEPTH, w, h])
                }
                1 => {
                    let y = uniform(&mut self.rng, (b.min_y + 0.3 + 0.5 * w, b.max_y - 0.3 - 0.5 * w));
                    ([b.max_x - 0.5 * WALL_DEPTH, y, cz], [WALL_DEPTH, w, h])
                }
                2 => {
                    let x = uniform(&mut self.rng, (b.min_x + 0.3 + 0.5 * w, b.max_x - 0.3 - 0.5 * w));
                    ([x, b.min_y + 0.5 * WALL_DEPTH, cz], [w, WALL_DEPTH, h])
                }
                _ => {
                    let x = uniform(&mut self.rng, (b.min_x + 0.3 + 0.5 * w, b.max_x - 0.3 - 0.5 * w));
                    ([x, b.max_y - 0.5 * WALL_DEPTH, cz], [w, WALL_DEPTH, h])
                }
            };
            let id = self.next_id(kind);
            let candidate = ObjectSpec::wall_item(&id, kind, center, size);
            let lo = candidate.min_corner();
            let hi = candidate.max_corner();
            let blocked = self.objects.iter().any(|o| {
                let (olo, ohi) = (o.min_corner(), o.max_corner());
                let pad = if o.wall_mounted { 0.1 } else { 0.05 };
                (0..3).all(|k| lo[k] < ohi[k] + pad && olo[k] - pad < hi[k])
            });
            if blocked {
                continue;
            }
            self.objects.push(candidate);
            return Ok(());
        }
        Err(Error::Generation("could not place a wall object".into()))
    }
}

/// Procedurally generates a furnished rectangular room. Identical seed and
/// config always give an identical scene.
pub fn generate_scene(seed: u64, cfg: &SceneGenConfig) -> Result<SceneSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = uniform(&mut rng, cfg.room_size);
    let height = uniform(&mut rng, cfg.room_size);
    let n_furniture = count(&mut rng, cfg.receptacles);
    let n_small = count(&mut rng, cfg.small_objects);
    let n_wall = count(&mut rng, cfg.wall_objects);
    let mut builder = Builder { cfg, bounds: Rect::new(0.0, 0.0, width, height), rng, objects: Vec::new() };

    let mut furniture = Vec::new();
    while furniture.len() < n_furniture {
        let i = builder.place_furniture()?;
        furniture.push(i);
        let joinable = FURNITURE.iter().any(|k| k.joinable && k.name == builder.objects[i].object_type);
        if joinable && furniture.len() < n_furniture && builder.rng.gen_bool(0.4) && builder.place_joined(i) {
            furniture.push(builder.objects.len() - 1);
        }
    }
    if n_small > 0 && furniture.is_empty() {
        return Err(Error::Generation("small objects need at least one receptacle".into()));
    }
    for _ in 0..n_small {
        builder.place_small(&furniture)?;
    }
    for _ in 0..n_wall {
        builder.place_wall_object()?;
    }

    let scene = SceneSpec {
        scene_id: format!("scene_{seed:04}"),
        bounds: builder.bounds,
        agent_radius: cfg.agent_radius,
        objects: builder.objects,
        rng_seed: seed,
    };
    scene.validate()?;
    if viewpoint_grid(&scene, 0.5).is_empty() {
        return Err(Error::Generation("no collision-free start pose".into()));
    }
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = SceneGenConfig::default();
        let a = generate_scene(7, &cfg).unwrap();
        let b = generate_scene(7, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_ne!(a, generate_scene(8, &cfg).unwrap());
    }

    #[test]
    fn zero_small_objects_leaves_only_furniture_and_wall_items() {
        let cfg = SceneGenConfig { small_objects: (0, 0), ..Default::default() };
        let scene = generate_scene(5, &cfg).unwrap();
        assert!(scene.objects.iter().all(|o| o.parent_receptacle.is_none()));
        assert!(scene.objects.iter().all(|o| o.is_obstacle || o.wall_mounted));
    }

    #[test]
    fn generated_scenes_are_valid() {
        let cfg = SceneGenConfig::default();
        for seed in 1..=30 {
            let scene = generate_scene(seed, &cfg).unwrap();
            scene.validate().unwrap();
            let furniture = scene.objects.iter().filter(|o| o.is_obstacle).count();
            let small = scene.objects.iter().filter(|o| o.parent_receptacle.is_some()).count();
            let wall = scene.objects.iter().filter(|o| o.wall_mounted).count();
            assert!((4..=8).contains(&furniture), "seed {seed}: {furniture} furniture");
            assert!((8..=20).contains(&small));
            assert!((2..=4).contains(&wall));
            for o in scene.objects.iter().filter(|o| o.parent_receptacle.is_some()) {
                let parent = &scene.objects[scene.object_index(o.parent_receptacle.as_ref().unwrap()).unwrap()];
                assert!((o.bottom() - parent.top()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn impossible_config_reports_error() {
        let cfg = SceneGenConfig { room_size: (2.0, 2.0), receptacles: (8, 8), max_retries: 50, ..Default::default() };
        assert!(matches!(generate_scene(1, &cfg), Err(Error::Generation(_))));
    }
}
