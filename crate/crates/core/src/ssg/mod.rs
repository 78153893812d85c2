//! Local and global semantic scene graphs built from soft visibility.

mod observe;
mod relations;

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::SceneSpec;

pub use observe::{observe_local, Observer, EYE_HEIGHT};
pub use relations::{
    extract_relations, extract_relations_with, node_name, wall_node, Edge, Relation, RelationConfig, WALL_NAMES,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityParams {
    pub omega: f64,
    pub c_base: f64,
    pub k_size: f64,
    pub s_ref: f64,
    pub tau: f64,
}

impl Default for VisibilityParams {
    fn default() -> Self {
        Self { omega: 1.0, c_base: 3.5, k_size: 1.5, s_ref: 0.5, tau: 0.8 }
    }
}

impl VisibilityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config("visibility needs omega > 0 and tau in (0, 1)".into()));
        }
        Ok(())
    }

    /// Sigmoid centre for an object of extent `s_max`.
    pub fn centre(&self, s_max: f64) -> f64 {
        self.c_base + self.k_size * (s_max - self.s_ref)
    }
}

pub fn soft_visibility(d: f64, s_max: f64, p: &VisibilityParams) -> f64 {
    1.0 / (1.0 + (p.omega * (d - p.centre(s_max))).exp())
}

/// Saturating aggregation `1 - (1 - g)(1 - l)`.
pub fn aggregate(global: f64, local: f64) -> f64 {
    1.0 - (1.0 - global) * (1.0 - local)
}

/// Side length of the cells used for redundancy control and viewpoint diversity.
pub const POSITION_CELL: f64 = 0.25;

pub type PositionKey = (i64, i64);

pub fn position_key(x: f64, y: f64) -> PositionKey {
    ((x / POSITION_CELL).floor() as i64, (y / POSITION_CELL).floor() as i64)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocalGraph {
    /// (object index, V^L), ascending by index.
    pub nodes: Vec<(usize, f64)>,
    /// Edges among the visible objects; wall anchors count as always present.
    pub edges: Vec<Edge>,
}

impl LocalGraph {
    pub fn contains(&self, object: usize) -> bool {
        self.nodes.binary_search_by_key(&object, |n| n.0).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalGraph {
    visibility: Vec<f64>,
    known: Vec<bool>,
    edges: BTreeSet<Edge>,
    seen_pairs: HashSet<(usize, PositionKey)>,
}

/// What a single global update changed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateSummary {
    /// Objects inserted into the graph for the first time.
    pub new_nodes: usize,
    /// (object, position) pairs not seen before.
    pub new_pairs: usize,
    pub new_edges: usize,
}

impl GlobalGraph {
    pub fn new(n_objects: usize) -> Self {
        Self {
            visibility: vec![0.0; n_objects],
            known: vec![false; n_objects],
            edges: BTreeSet::new(),
            seen_pairs: HashSet::new(),
        }
    }

    pub fn n_objects(&self) -> usize {
        self.visibility.len()
    }

    /// V^G per object index, 0 for objects never observed.
    pub fn visibility(&self) -> &[f64] {
        &self.visibility
    }

    pub fn is_known(&self, object: usize) -> bool {
        self.known[object]
    }

    pub fn n_known(&self) -> usize {
        self.known.iter().filter(|&&k| k).count()
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn n_seen_pairs(&self) -> usize {
        self.seen_pairs.len()
    }

    pub fn has_seen(&self, object: usize, key: PositionKey) -> bool {
        self.seen_pairs.contains(&(object, key))
    }

    /// Objects with V^G at or above `tau`.
    pub fn discovered(&self, tau: f64) -> usize {
        self.visibility.iter().filter(|&&v| v >= tau).count()
    }
}

/// Folds a local observation taken at `key` into the global graph.
pub fn update_global(g: &mut GlobalGraph, l: &LocalGraph, key: PositionKey) -> UpdateSummary {
    let mut summary = UpdateSummary::default();
    for &(o, v) in &l.nodes {
        if !g.known[o] {
            g.known[o] = true;
            summary.new_nodes += 1;
        }
        if g.seen_pairs.insert((o, key)) {
            g.visibility[o] = aggregate(g.visibility[o], v);
            summary.new_pairs += 1;
        }
    }
    for &e in &l.edges {
        if g.edges.insert(e) {
            summary.new_edges += 1;
        }
    }
    summary
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub r_node: f64,
    pub p_node: f64,
    pub r_edge: f64,
    pub p_edge: f64,
    pub d: usize,
}

impl MetricsSnapshot {
    pub fn empty() -> Self {
        Self { r_node: 0.0, p_node: 0.0, r_edge: 0.0, p_edge: 1.0, d: 0 }
    }
}

pub fn graph_metrics(g: &GlobalGraph, scene: &SceneSpec, p: &VisibilityParams) -> MetricsSnapshot {
    metrics_with_edge_total(g, extract_relations(scene).len(), p.tau)
}

/// [`graph_metrics`] with a precomputed ground-truth edge count.
pub fn metrics_with_edge_total(g: &GlobalGraph, total_edges: usize, tau: f64) -> MetricsSnapshot {
    let n = g.n_objects();
    let (r_node, p_node) = if n == 0 {
        (1.0, 1.0)
    } else {
        (g.discovered(tau) as f64 / n as f64, g.visibility.iter().sum::<f64>() / n as f64)
    };
    let r_edge = if total_edges == 0 { 1.0 } else { g.edges.len() as f64 / total_edges as f64 };
    MetricsSnapshot { r_node, p_node, r_edge, p_edge: 1.0, d: g.seen_pairs.len() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDump {
    pub id: String,
    pub visibility: f64,
}

/// Debug dump `{nodes: [{id, visibility}], edges: [[src, rel, dst]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDump {
    pub nodes: Vec<NodeDump>,
    pub edges: Vec<(String, Relation, String)>,
}

impl GraphDump {
    pub fn from_global(g: &GlobalGraph, scene: &SceneSpec) -> Self {
        let nodes = (0..g.n_objects())
            .filter(|&o| g.known[o])
            .map(|o| NodeDump { id: scene.objects[o].id.clone(), visibility: g.visibility[o] })
            .collect();
        Self::with_nodes(nodes, g.edges.iter(), scene)
    }

    pub fn from_local(l: &LocalGraph, scene: &SceneSpec) -> Self {
        let nodes = l.nodes.iter().map(|&(o, v)| NodeDump { id: scene.objects[o].id.clone(), visibility: v }).collect();
        Self::with_nodes(nodes, l.edges.iter(), scene)
    }

    fn with_nodes<'a>(nodes: Vec<NodeDump>, edges: impl Iterator<Item = &'a Edge>, scene: &SceneSpec) -> Self {
        let edges = edges.map(|&(a, r, b)| (node_name(scene, a), r, node_name(scene, b))).collect();
        Self { nodes, edges }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_reference_values() {
        let p = VisibilityParams::default();
        assert!((soft_visibility(3.5, 0.5, &p) - 0.5).abs() < 1e-15);
        let expected = 1.0 / (1.0 + (-3.5f64).exp());
        assert!((soft_visibility(0.0, 0.5, &p) - expected).abs() < 1e-15);
        assert!((expected - 0.97069).abs() < 1e-5);
        assert!((p.centre(2.0) - 5.75).abs() < 1e-15);
        assert!((soft_visibility(5.0, 2.0, &p) - 0.67918).abs() < 1e-5);
    }

    #[test]
    fn aggregation_examples() {
        assert!((aggregate(0.0, 0.3) - 0.3).abs() < 1e-15);
        assert_eq!(aggregate(0.5, 0.5), 0.75);
    }

    #[test]
    fn repeated_position_is_skipped() {
        let mut g = GlobalGraph::new(2);
        let l = LocalGraph { nodes: vec![(1, 0.6)], edges: vec![] };
        let s1 = update_global(&mut g, &l, (4, 4));
        assert_eq!(s1, UpdateSummary { new_nodes: 1, new_pairs: 1, new_edges: 0 });
        let before = g.clone();
        let s2 = update_global(&mut g, &l, (4, 4));
        assert_eq!(s2, UpdateSummary::default());
        assert_eq!(g, before);
        update_global(&mut g, &l, (4, 5));
        assert!((g.visibility()[1] - 0.84).abs() < 1e-12);
    }

    #[test]
    fn metrics_counting() {
        let mut g = GlobalGraph::new(10);
        let fresh = metrics_with_edge_total(&g, 5, 0.8);
        assert_eq!((fresh.r_node, fresh.p_node, fresh.d), (0.0, 0.0, 0));
        let l = LocalGraph {
            nodes: (0..10).map(|o| (o, if o < 4 { 0.9 } else { 0.1 })).collect(),
            edges: vec![(0, Relation::CloseBy, 1)],
        };
        update_global(&mut g, &l, (0, 0));
        let m = metrics_with_edge_total(&g, 5, 0.8);
        assert!((m.r_node - 0.4).abs() < 1e-15);
        assert!((m.r_edge - 0.2).abs() < 1e-15);
        assert_eq!(m.d, 10);
        assert_eq!(metrics_with_edge_total(&g, 0, 0.8).r_edge, 1.0);
        let full = LocalGraph { nodes: (0..10).map(|o| (o, 1.0)).collect(), edges: vec![] };
        update_global(&mut g, &full, (1, 0));
        let m = metrics_with_edge_total(&g, 5, 0.8);
        assert_eq!((m.r_node, m.p_node), (1.0, 1.0));
    }

    #[test]
    fn position_keys_use_quarter_metre_cells() {
        assert_eq!(position_key(0.1, 0.3), (0, 1));
        assert_eq!(position_key(1.0, 0.99), (4, 3));
    }
}
