//! Discrete motion vocabularies and curriculum masks.
//!
//! Every action is a (rotation, length) pair executed move-first. In the
//! single-head variants the (0°, 0 m) atom means Stop; in the multi-head
//! variant Stop is a separate binary head and (0°, 0 m) is an idle step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionVariant {
    Sh16,
    Sh504,
    Mh,
}

impl ActionVariant {
    pub fn is_multi_head(self) -> bool {
        matches!(self, ActionVariant::Mh)
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionVariant::Sh16 => "sh16",
            ActionVariant::Sh504 => "sh504",
            ActionVariant::Mh => "mh",
        }
    }
}

impl std::str::FromStr for ActionVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sh16" => Ok(ActionVariant::Sh16),
            "sh504" => Ok(ActionVariant::Sh504),
            "mh" | "mh504" => Ok(ActionVariant::Mh),
            other => Err(Error::Config(format!("unknown action variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub variant: ActionVariant,
    /// Counter-clockwise rotations in degrees.
    pub rotations: Vec<i32>,
    pub lengths: Vec<f64>,
}

impl ActionSpec {
    pub fn new(variant: ActionVariant) -> Self {
        match variant {
            ActionVariant::Sh16 => {
                Self { variant, rotations: (0..8).map(|k| k * 45).collect(), lengths: vec![0.0, 0.3] }
            }
            ActionVariant::Sh504 | ActionVariant::Mh => Self {
                variant,
                rotations: (0..24).map(|k| k * 15).collect(),
                lengths: (0..=20).map(|k| k as f64 / 10.0).collect(),
            },
        }
    }

    pub fn n_rotations(&self) -> usize {
        self.rotations.len()
    }

    pub fn n_lengths(&self) -> usize {
        self.lengths.len()
    }

    /// Number of single-head atoms (rotation x length).
    pub fn n_atoms(&self) -> usize {
        self.rotations.len() * self.lengths.len()
    }

    /// Output sizes of the policy heads: one head for single-head variants,
    /// rotation / length / stop for the multi-head variant.
    pub fn head_sizes(&self) -> Vec<usize> {
        if self.variant.is_multi_head() {
            vec![self.n_rotations(), self.n_lengths(), 2]
        } else {
            vec![self.n_atoms()]
        }
    }

    pub fn atom_index(&self, rotation_index: usize, length_index: usize) -> usize {
        rotation_index * self.n_lengths() + length_index
    }

    pub fn atom_choice(&self, atom: usize) -> Result<ActionChoice> {
        if atom >= self.n_atoms() {
            return Err(Error::ActionIndex(format!("atom {atom} >= {}", self.n_atoms())));
        }
        Ok(ActionChoice { rotation_index: atom / self.n_lengths(), length_index: atom % self.n_lengths(), stop: false })
    }

    pub fn check(&self, choice: &ActionChoice) -> Result<()> {
        if choice.rotation_index >= self.n_rotations() || choice.length_index >= self.n_lengths() {
            return Err(Error::ActionIndex(format!(
                "({}, {}) outside {}x{}",
                choice.rotation_index,
                choice.length_index,
                self.n_rotations(),
                self.n_lengths()
            )));
        }
        if choice.stop && !self.variant.is_multi_head() {
            return Err(Error::ActionIndex("stop flag is only valid for the multi-head variant".into()));
        }
        Ok(())
    }

    pub fn stop_choice(&self) -> ActionChoice {
        ActionChoice { rotation_index: 0, length_index: 0, stop: self.variant.is_multi_head() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionChoice {
    pub rotation_index: usize,
    pub length_index: usize,
    /// Multi-head Stop; always false for single-head variants.
    pub stop: bool,
}

impl ActionChoice {
    pub fn new(rotation_index: usize, length_index: usize) -> Self {
        Self { rotation_index, length_index, stop: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decoded {
    Stop,
    Idle,
    Motion { rotation: i32, length: f64 },
}

pub fn decode(choice: &ActionChoice, spec: &ActionSpec) -> Result<Decoded> {
    spec.check(choice)?;
    let rotation = spec.rotations[choice.rotation_index];
    let length = spec.lengths[choice.length_index];
    let zero = choice.rotation_index == 0 && choice.length_index == 0;
    Ok(if spec.variant.is_multi_head() {
        if choice.stop {
            Decoded::Stop
        } else if zero {
            Decoded::Idle
        } else {
            Decoded::Motion { rotation, length }
        }
    } else if zero {
        Decoded::Stop
    } else {
        Decoded::Motion { rotation, length }
    })
}

/// Admissible rotation and length indices. Stop is never masked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageMask {
    pub rotations: Vec<bool>,
    pub lengths: Vec<bool>,
}

impl StageMask {
    pub fn full(spec: &ActionSpec) -> Self {
        Self { rotations: vec![true; spec.n_rotations()], lengths: vec![true; spec.n_lengths()] }
    }

    /// Single-head atom mask: the outer product of the factor masks with the
    /// Stop atom forced on.
    pub fn atom_mask(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.rotations.len() * self.lengths.len());
        for &r in &self.rotations {
            for &l in &self.lengths {
                out.push(r && l);
            }
        }
        if let Some(stop) = out.first_mut() {
            *stop = true;
        }
        out
    }

    /// Per-head masks in the order of [`ActionSpec::head_sizes`].
    pub fn head_masks(&self, spec: &ActionSpec) -> Vec<Vec<bool>> {
        if spec.variant.is_multi_head() {
            vec![self.rotations.clone(), self.lengths.clone(), vec![true, true]]
        } else {
            vec![self.atom_mask()]
        }
    }

    pub fn admits(&self, choice: &ActionChoice, spec: &ActionSpec) -> bool {
        if spec.variant.is_multi_head() {
            choice.stop || (self.rotations[choice.rotation_index] && self.lengths[choice.length_index])
        } else {
            self.atom_mask()[spec.atom_index(choice.rotation_index, choice.length_index)]
        }
    }

    pub fn admissible_atoms(&self) -> usize {
        self.atom_mask().iter().filter(|&&b| b).count()
    }
}

pub const N_STAGES: usize = 4;

/// Curriculum masks for the 24 x 21 vocabularies.
pub fn stage_mask(stage: usize, spec: &ActionSpec) -> Result<StageMask> {
    if spec.variant == ActionVariant::Sh16 {
        return Err(Error::Config("curriculum stages apply to the 504-resolution spaces only".into()));
    }
    if !(1..=N_STAGES).contains(&stage) {
        return Err(Error::Stage(stage));
    }
    let coarse_rot: Vec<bool> = (0..spec.n_rotations()).map(|i| i % 3 == 0).collect();
    let lengths_dm: &[usize] = match stage {
        1 => &[0, 3],
        2 => &[0, 3, 7, 12, 16, 20],
        _ => &[],
    };
    let lengths = match stage {
        1 | 2 => (0..spec.n_lengths()).map(|i| lengths_dm.contains(&i)).collect(),
        3 => (0..spec.n_lengths()).map(|i| i != 19).collect(),
        _ => vec![true; spec.n_lengths()],
    };
    let rotations = if stage == N_STAGES { vec![true; spec.n_rotations()] } else { coarse_rot };
    Ok(StageMask { rotations, lengths })
}
