//! Embodied scene-graph exploration laboratory.
//!
//! A deterministic 2.5-D indoor simulator ([`world`]), soft-visibility scene
//! graphs ([`ssg`]), discrete motion vocabularies with curriculum masks
//! ([`actionspace`]), shaped rewards ([`reward`]), observation featurization
//! ([`features`]), a hand-differentiated recurrent policy ([`policynet`]),
//! PPO/REINFORCE training ([`trainer`]), an imitation-learning expert
//! ([`expert`]) and the evaluation harness ([`harness`]).

pub mod actionspace;
pub mod env;
pub mod error;
pub mod expert;
pub mod features;
pub mod harness;
pub mod policynet;
pub mod reward;
pub mod ssg;
pub mod trainer;
pub mod world;

pub use error::{Error, Result};
