//! 40 Hz end-effector simulation of one pick, transport and handover.
//!
//! Kinematics are ideal: the commanded Cartesian velocity is the achieved
//! one, and orientation is held constant. Each tick `k` records the state at
//! `t = k / tick_rate` together with the velocity applied over the following
//! tick, so positions satisfy `ee[k + 1] = ee[k] + v[k] / tick_rate`.

mod engine;
mod trace;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;

pub use engine::{executed_profile, run_trial, Observation, StaticWrist, StepOutcome, TrackWrist, TrialEngine, TrialMeta, WristSource};
pub use trace::{read_jsonl, TickRecord, TraceLine, TrialTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiGains {
    pub kp: f64,
    pub ki: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMode {
    /// Replay the profile unchanged; the arm may stop short of the handover point.
    AsIs,
    /// Scale speeds so the profile's distance equals the transport path.
    ArcLengthRescale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub tick_rate: f64,
    /// Where the end-effector starts each trial.
    pub pick_pose: Vec3,
    /// Cup position, where the gripper closes.
    pub grasp_pose: Vec3,
    pub handover_point: Vec3,
    pub release_distance: f64,
    pub pick_speed: f64,
    pub pi_gains: PiGains,
    /// Bound on the norm of the pick integral state, m·s.
    pub integral_limit: f64,
    /// Constant velocity disturbance added to the pick command, m/s.
    pub pick_velocity_bias: Vec3,
    pub transport_mode: TransportMode,
    pub arrival_epsilon: f64,
    pub timeout: f64,
    /// Consecutive ticks of growing pick error that count as divergence.
    pub divergence_ticks: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            tick_rate: crate::TICK_RATE_HZ,
            pick_pose: Vec3::new(0.0, 0.0, 0.25),
            grasp_pose: Vec3::new(0.0, 0.25, 0.10),
            handover_point: Vec3::new(0.6, 0.25, 0.10),
            release_distance: 0.05,
            pick_speed: 0.1,
            pi_gains: PiGains { kp: 2.0, ki: 0.1 },
            integral_limit: 0.5,
            pick_velocity_bias: Vec3::ZERO,
            transport_mode: TransportMode::ArcLengthRescale,
            arrival_epsilon: 0.01,
            timeout: 30.0,
            divergence_ticks: 100,
        }
    }
}

impl SimConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.tick_rate
    }

    /// Straight-line transport distance.
    pub fn path_length(&self) -> f64 {
        self.grasp_pose.distance(self.handover_point)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.tick_rate.is_finite() && self.tick_rate > 0.0) {
            return bad(format!("tick_rate must be positive, got {}", self.tick_rate));
        }
        if !(self.arrival_epsilon > 0.0 && self.release_distance > self.arrival_epsilon) {
            return bad(format!(
                "need release_distance > arrival_epsilon > 0, got {} and {}",
                self.release_distance, self.arrival_epsilon
            ));
        }
        if self.path_length() <= 0.0 {
            return bad("handover_point must differ from grasp_pose".into());
        }
        let points = [self.pick_pose, self.grasp_pose, self.handover_point, self.pick_velocity_bias];
        if points.iter().any(|p| !p.is_finite()) {
            return bad("poses must be finite".into());
        }
        if !(self.pick_speed > 0.0 && self.pi_gains.kp > 0.0 && self.pi_gains.ki >= 0.0 && self.integral_limit >= 0.0) {
            return bad("pick_speed and kp must be positive, ki and integral_limit non-negative".into());
        }
        if !(self.timeout > 0.0) || self.divergence_ticks == 0 {
            return bad("timeout and divergence_ticks must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    Pick,
    Transport,
    HandoverWait,
    Released,
    Return,
}

impl Phase {
    pub const ORDER: [Phase; 6] = [
        Phase::Idle,
        Phase::Pick,
        Phase::Transport,
        Phase::HandoverWait,
        Phase::Released,
        Phase::Return,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Idle => "Idle",
            Phase::Pick => "Pick",
            Phase::Transport => "Transport",
            Phase::HandoverWait => "HandoverWait",
            Phase::Released => "Released",
            Phase::Return => "Return",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gripper {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    pub ee_pos: Vec3,
    pub ee_vel: Vec3,
    pub gripper: Gripper,
    pub phase: Phase,
    pub cup_attached: bool,
}
