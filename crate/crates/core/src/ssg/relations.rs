use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::world::{point_box_distance_2d, ObjectSpec, SceneSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    SupportedBy,
    Supports,
    On,
    HasOnTop,
    HangingOn,
    CloseBy,
    Above,
    Below,
    ConnectsTo,
    AttachOn,
    HasAttachment,
}

impl Relation {
    pub const ALL: [Relation; 11] = [
        Relation::SupportedBy,
        Relation::Supports,
        Relation::On,
        Relation::HasOnTop,
        Relation::HangingOn,
        Relation::CloseBy,
        Relation::Above,
        Relation::Below,
        Relation::ConnectsTo,
        Relation::AttachOn,
        Relation::HasAttachment,
    ];

    /// Label of the reverse edge. Symmetric relations are their own inverse;
    /// `hanging_on` points at a wall and has none.
    pub fn inverse(self) -> Option<Relation> {
        use Relation::*;
        match self {
            SupportedBy => Some(Supports),
            Supports => Some(SupportedBy),
            On => Some(HasOnTop),
            HasOnTop => Some(On),
            HangingOn => None,
            CloseBy => Some(CloseBy),
            Above => Some(Below),
            Below => Some(Above),
            ConnectsTo => Some(ConnectsTo),
            AttachOn => Some(HasAttachment),
            HasAttachment => Some(AttachOn),
        }
    }

    pub fn label(self) -> &'static str {
        use Relation::*;
        match self {
            SupportedBy => "supported_by",
            Supports => "supports",
            On => "on",
            HasOnTop => "has_on_top",
            HangingOn => "hanging_on",
            CloseBy => "close_by",
            Above => "above",
            Below => "below",
            ConnectsTo => "connects_to",
            AttachOn => "attach_on",
            HasAttachment => "has_attachment",
        }
    }
}

/// Directed edge between node indices. Indices below the object count refer
/// to scene objects; `n_objects + side` refers to a room wall.
pub type Edge = (usize, Relation, usize);

pub const WALL_NAMES: [&str; 4] = ["wall_south", "wall_east", "wall_north", "wall_west"];

pub fn wall_node(n_objects: usize, side: usize) -> usize {
    debug_assert!(side < 4);
    n_objects + side
}

/// Human-readable id of a node index.
pub fn node_name(scene: &SceneSpec, node: usize) -> String {
    match scene.objects.get(node) {
        Some(o) => o.id.clone(),
        None => WALL_NAMES[node - scene.objects.len()].to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationConfig {
    pub support_tolerance: f64,
    pub close_by_distance: f64,
    pub vertical_gap: f64,
    pub connect_gap: f64,
    pub attach_distance: f64,
}

impl Default for RelationConfig {
    fn default() -> Self {
        Self {
            support_tolerance: 0.05,
            close_by_distance: 0.5,
            vertical_gap: 0.05,
            connect_gap: 0.05,
            attach_distance: 0.15,
        }
    }
}

fn is_small(o: &ObjectSpec) -> bool {
    !o.is_obstacle && !o.wall_mounted
}

fn centre_distance(a: &ObjectSpec, b: &ObjectSpec) -> f64 {
    let d: f64 = (0..3).map(|k| (a.center[k] - b.center[k]).powi(2)).sum();
    d.sqrt()
}

fn point_box_distance_3d(p: [f64; 3], o: &ObjectSpec) -> f64 {
    let planar = point_box_distance_2d(p[0], p[1], &o.footprint());
    let dz = (o.bottom() - p[2]).max(p[2] - o.top()).max(0.0);
    planar.hypot(dz)
}

fn nearest_wall(scene: &SceneSpec, o: &ObjectSpec) -> usize {
    let b = &scene.bounds;
    let (x, y) = (o.center[0], o.center[1]);
    let d = [y - b.min_y, b.max_x - x, b.max_y - y, x - b.min_x];
    let mut best = 0;
    for side in 1..4 {
        if d[side] < d[best] {
            best = side;
        }
    }
    best
}

pub fn extract_relations(scene: &SceneSpec) -> Vec<Edge> {
    extract_relations_with(scene, &RelationConfig::default())
}

/// Deterministic ground-truth edge set, sorted, with inverse pairs.
pub fn extract_relations_with(scene: &SceneSpec, cfg: &RelationConfig) -> Vec<Edge> {
    let objs = &scene.objects;
    let n = objs.len();
    let parent: Vec<Option<usize>> =
        objs.iter().map(|o| o.parent_receptacle.as_deref().and_then(|p| scene.object_index(p))).collect();
    let has_children: Vec<bool> = (0..n).map(|i| parent.iter().any(|&p| p == Some(i))).collect();
    let mut edges = BTreeSet::new();
    let mut pair = |a: usize, r: Relation, b: usize| {
        edges.insert((a, r, b));
        if let Some(inv) = r.inverse() {
            edges.insert((b, inv, a));
        }
    };

    for c in 0..n {
        let child = &objs[c];
        if child.wall_mounted {
            pair(c, Relation::HangingOn, wall_node(n, nearest_wall(scene, child)));
            continue;
        }
        for p in 0..n {
            if p == c || objs[p].wall_mounted {
                continue;
            }
            let resting = child.footprint().overlaps(&objs[p].footprint())
                && (child.bottom() - objs[p].top()).abs() <= cfg.support_tolerance;
            if parent[c] == Some(p) || resting {
                pair(c, Relation::SupportedBy, p);
                pair(c, Relation::On, p);
            }
        }
    }

    for a in 0..n {
        for b in (a + 1)..n {
            let (oa, ob) = (&objs[a], &objs[b]);
            if parent[a].is_some() && parent[a] == parent[b] && centre_distance(oa, ob) < cfg.close_by_distance {
                pair(a, Relation::CloseBy, b);
            }
            if oa.is_obstacle
                && ob.is_obstacle
                && oa.object_type == ob.object_type
                && oa.footprint().gap(&ob.footprint()) < cfg.connect_gap
            {
                pair(a, Relation::ConnectsTo, b);
            }
        }
    }

    for a in 0..n {
        for b in 0..n {
            if a != b
                && objs[a].footprint().overlaps(&objs[b].footprint())
                && objs[a].bottom() - objs[b].top() > cfg.vertical_gap
            {
                pair(a, Relation::Above, b);
            }
        }
    }

    for s in (0..n).filter(|&s| is_small(&objs[s])) {
        for m in 0..n {
            let main = &objs[m];
            if main.is_obstacle
                && !has_children[m]
                && parent[s] != Some(m)
                && point_box_distance_3d(objs[s].center, main) < cfg.attach_distance
            {
                pair(s, Relation::AttachOn, m);
            }
        }
    }

    edges.into_iter().collect()
}
