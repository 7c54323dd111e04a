//! Communicative transport motions for a simulated manipulator.
//!
//! The crate covers the whole pipeline: a class-conditioned surrogate of
//! human transport velocity profiles ([`surrogate`]), a per-class TimeGAN
//! that learns to synthesize new ones ([`gan`]), a 40 Hz end-effector
//! simulation that picks a cup, transports it with a generated speed
//! profile and releases it to a participant ([`robot`]), a scripted
//! participant ([`human`]), a kinematic classifier ([`classifier`]) and the
//! sorting study with its paired reach analysis ([`experiment`]).

pub mod classifier;
pub mod error;
pub mod experiment;
pub mod gan;
pub mod geom;
pub mod human;
pub mod kinematics;
pub mod rng;
pub mod robot;
pub mod surrogate;

pub use error::{Error, Result};
pub use geom::Vec3;
pub use kinematics::{CarefulnessClass, KinematicFeatures, VelocityProfile};

/// Controller and sampling rate shared by the simulator and the data pipeline.
pub const TICK_RATE_HZ: f64 = 40.0;
