//! Markerless upper-body motion tracking.
//!
//! The body is an articulated "cardbox" model: every part is a set of two or
//! three mutually perpendicular planar patches hung on a small skeleton. A
//! posture hypothesis is rendered into a binary silhouette with a software
//! rasterizer and scored against the segmented camera silhouette by counting
//! differing pixels. Postures are tracked with a three-stage hierarchical
//! particle filter (torso, then both arms) that resamples either with the
//! deterministic survival-of-the-fittest scheme ([`ResamplerKind::Drs`]) or
//! with stratified resampling ([`ResamplerKind::Srs`]).
//!
//! The [`synth`] module renders ground-truth sequences from scripted
//! trajectories so every stage can be evaluated without a capture rig.

pub mod body;
pub mod camera;
pub mod error;
pub mod io;
pub mod mask;
pub mod matching;
pub mod raster;
pub mod resampling;
pub mod rng;
pub mod synth;
pub mod tracker;
pub mod vision;

pub use body::{BodyModel, JointLimits, JointPositions, PostureParams, Quad3, SizeParams};
pub use camera::{CameraModel, CameraPose};
pub use error::{Error, Result};
pub use mask::SilhouetteMask;
pub use matching::{cost_of_posture, silhouette_cost, Cost};
pub use raster::rasterize;
pub use resampling::{Particle, ParticleSet};
pub use tracker::{ResamplerKind, StageConfig, TrackState, TrackerConfig};
pub use vision::{BackgroundModel, GrayImage};
