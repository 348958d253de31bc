//! Simulation and verification laboratory for the mean-field spherical model
//! with d-dimensional spins in i.i.d. random fields.
//!
//! Finite-volume Gibbs states are sampled exactly through their mixture
//! representation: a 2d-dimensional latent coordinate `(x, y)` drawn from the
//! mixing measure, followed by a Gaussian-on-sphere draw from the shifted
//! microcanonical measure. Around this sit the limiting objects (pure states,
//! tilted sphere laws, the overlap family), the random-walk drivers behind the
//! metastate results, and the measure tools used to compare them.

pub mod basis_transform;
pub mod error;
pub mod experiment_harness;
pub mod gibbs_sampler;
pub mod limit_states;
pub mod measure_tools;
pub mod model_core;
pub mod overlap_lab;
pub mod rng;
pub mod stochastic_drivers;

pub(crate) mod linalg;

pub use error::{Error, Result};
