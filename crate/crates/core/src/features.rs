//! Observation channels and the stagnation signal.

use serde::{Deserialize, Serialize};

use crate::actionspace::{ActionChoice, ActionSpec};
use crate::error::{Error, Result};
use crate::ssg::{GlobalGraph, LocalGraph};
use crate::world::{object_type_vocabulary, RangeScan, SceneSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StagnationConfig {
    pub alpha: f64,
    pub tau_disc: f64,
    pub d_sg: usize,
    pub k: f64,
    pub d_stag: usize,
}

impl Default for StagnationConfig {
    fn default() -> Self {
        Self { alpha: 0.7, tau_disc: 0.1, d_sg: 64, k: 10.0, d_stag: 32 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StagnationState {
    pub g_prev: Vec<f64>,
    pub ema: f64,
    pub steps_since_change: usize,
    pub initialized: bool,
}

impl StagnationState {
    pub fn new(d_sg: usize) -> Self {
        Self { g_prev: vec![0.0; d_sg], ema: 0.0, steps_since_change: 0, initialized: false }
    }
}

/// Advances the stagnation state with the current graph vector and returns
/// `(delta, smoothed delta, tanh(n / k))`.
pub fn stagnation_step(st: &mut StagnationState, g: &[f64], cfg: &StagnationConfig) -> Result<[f64; 3]> {
    if g.len() != cfg.d_sg || st.g_prev.len() != cfg.d_sg {
        return Err(Error::Dimension { expected: cfg.d_sg, got: g.len() });
    }
    let delta = if st.initialized {
        let sq: f64 = g.iter().zip(&st.g_prev).map(|(a, b)| (a - b) * (a - b)).sum();
        sq.sqrt() / (cfg.d_sg as f64).sqrt()
    } else {
        1.0
    };
    if st.initialized {
        st.ema = cfg.alpha * st.ema + (1.0 - cfg.alpha) * delta;
        let changed = delta > cfg.tau_disc;
        st.steps_since_change = if changed { 1 } else { st.steps_since_change + 1 };
    } else {
        st.ema = delta;
        st.steps_since_change = 1;
        st.initialized = true;
    }
    st.g_prev.copy_from_slice(g);
    Ok([delta, st.ema, (st.steps_since_change as f64 / cfg.k).tanh()])
}

/// Global visibilities in slot order: object `i` occupies slot `i` when
/// `i < slots`; the remaining slots are zero.
pub fn graph_vector(g: &GlobalGraph, slots: usize) -> Vec<f64> {
    let mut v = vec![0.0; slots];
    for (slot, &vis) in v.iter_mut().zip(g.visibility()) {
        *slot = vis;
    }
    v
}

/// Sizes of every observation channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationLayout {
    pub depth: bool,
    pub rays: usize,
    pub slots: usize,
    pub types: usize,
    pub rotations: usize,
    pub lengths: usize,
}

impl ObservationLayout {
    pub fn new(depth: bool, rays: usize, slots: usize, actions: &ActionSpec) -> Self {
        Self {
            depth,
            rays,
            slots,
            types: object_type_vocabulary().len() + 1,
            rotations: actions.n_rotations(),
            lengths: actions.n_lengths(),
        }
    }

    pub fn scan_dim(&self) -> usize {
        if self.depth {
            self.rays
        } else {
            0
        }
    }

    pub fn local_dim(&self) -> usize {
        self.slots + self.types
    }

    pub fn global_dim(&self) -> usize {
        self.slots + 1
    }

    pub fn action_dim(&self) -> usize {
        self.rotations + self.lengths + 1
    }

    pub const STAG_DIM: usize = 3;

    /// Offsets of (scan, local, global, action, stagnation) and the total.
    pub fn offsets(&self) -> [usize; 6] {
        let scan = 0;
        let local = scan + self.scan_dim();
        let global = local + self.local_dim();
        let action = global + self.global_dim();
        let stag = action + self.action_dim();
        [scan, local, global, action, stag, stag + Self::STAG_DIM]
    }

    pub fn dim(&self) -> usize {
        self.offsets()[5]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Range scan divided by the maximum range; `None` without depth.
    pub range_scan: Option<Vec<f64>>,
    pub local_slots: Vec<f64>,
    /// Fraction of visible objects per type; the last bin collects unknown types.
    pub type_histogram: Vec<f64>,
    pub global_slots: Vec<f64>,
    pub r_node: f64,
    /// One-hot rotation index, one-hot length index, stop bit. Zero before the first action.
    pub last_action: Vec<f64>,
    pub stagnation: [f64; 3],
}

impl Observation {
    pub fn pack(&self, layout: &ObservationLayout) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(layout.dim());
        let check = |got: usize, expected: usize| {
            if got == expected {
                Ok(())
            } else {
                Err(Error::Dimension { expected, got })
            }
        };
        match (&self.range_scan, layout.depth) {
            (Some(scan), true) => {
                check(scan.len(), layout.rays)?;
                out.extend_from_slice(scan);
            }
            (None, false) => {}
            (Some(scan), false) => return Err(Error::Dimension { expected: 0, got: scan.len() }),
            (None, true) => return Err(Error::Dimension { expected: layout.rays, got: 0 }),
        }
        check(self.local_slots.len(), layout.slots)?;
        check(self.type_histogram.len(), layout.types)?;
        check(self.global_slots.len(), layout.slots)?;
        check(self.last_action.len(), layout.action_dim())?;
        out.extend_from_slice(&self.local_slots);
        out.extend_from_slice(&self.type_histogram);
        out.extend_from_slice(&self.global_slots);
        out.push(self.r_node);
        out.extend_from_slice(&self.last_action);
        out.extend_from_slice(&self.stagnation);
        Ok(out)
    }

    pub fn unpack(v: &[f64], layout: &ObservationLayout) -> Result<Self> {
        if v.len() != layout.dim() {
            return Err(Error::Dimension { expected: layout.dim(), got: v.len() });
        }
        let [scan, local, global, action, stag, end] = layout.offsets();
        Ok(Self {
            range_scan: layout.depth.then(|| v[scan..local].to_vec()),
            local_slots: v[local..local + layout.slots].to_vec(),
            type_histogram: v[local + layout.slots..global].to_vec(),
            global_slots: v[global..global + layout.slots].to_vec(),
            r_node: v[action - 1],
            last_action: v[action..stag].to_vec(),
            stagnation: [v[stag], v[stag + 1], v[end - 1]],
        })
    }
}

/// Per-scene lookup tables for observation assembly.
#[derive(Debug, Clone)]
pub struct FeatureContext {
    pub layout: ObservationLayout,
    pub max_range: f64,
    type_bin: Vec<usize>,
}

impl FeatureContext {
    pub fn new(scene: &SceneSpec, layout: ObservationLayout, max_range: f64) -> Self {
        let vocab = object_type_vocabulary();
        let type_bin = scene
            .objects
            .iter()
            .map(|o| vocab.iter().position(|t| *t == o.object_type).unwrap_or(vocab.len()))
            .collect();
        Self { layout, max_range, type_bin }
    }

    pub fn action_one_hot(&self, choice: Option<(&ActionChoice, bool)>) -> Vec<f64> {
        let l = &self.layout;
        let mut v = vec![0.0; l.action_dim()];
        if let Some((c, is_stop)) = choice {
            v[c.rotation_index] = 1.0;
            v[l.rotations + c.length_index] = 1.0;
            if is_stop {
                v[l.rotations + l.lengths] = 1.0;
            }
        }
        v
    }

    /// Assembles the observation. `last_action` carries the choice and
    /// whether it decoded to Stop.
    pub fn build(
        &self,
        scan: Option<&RangeScan>,
        local: &LocalGraph,
        global: &GlobalGraph,
        r_node: f64,
        last_action: Option<(&ActionChoice, bool)>,
        stagnation: [f64; 3],
    ) -> Observation {
        let l = &self.layout;
        let range_scan = if l.depth {
            let scan = scan.expect("depth observations need a range scan");
            Some(scan.distances.iter().map(|d| (d / self.max_range).clamp(0.0, 1.0)).collect())
        } else {
            None
        };
        let mut local_slots = vec![0.0; l.slots];
        let mut type_histogram = vec![0.0; l.types];
        for &(o, v) in &local.nodes {
            if o < l.slots {
                local_slots[o] = v;
            }
            type_histogram[self.type_bin[o].min(l.types - 1)] += 1.0;
        }
        if !local.nodes.is_empty() {
            let n = local.nodes.len() as f64;
            type_histogram.iter_mut().for_each(|h| *h /= n);
        }
        Observation {
            range_scan,
            local_slots,
            type_histogram,
            global_slots: graph_vector(global, l.slots),
            r_node,
            last_action: self.action_one_hot(last_action),
            stagnation,
        }
    }
}
