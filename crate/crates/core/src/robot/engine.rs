use super::trace::{TickRecord, TrialTrace};
use super::{Gripper, Phase, SimConfig, SimState, TransportMode};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::kinematics::{CarefulnessClass, VelocityProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialMeta {
    pub trial: usize,
    pub profile_id: String,
    pub class: Option<CarefulnessClass>,
}

/// What a wrist source can see before the next tick runs.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub tick: usize,
    pub t: f64,
    pub phase: Phase,
    pub ee: Vec3,
    pub gripper: Gripper,
    /// Speeds of the transport ticks run so far.
    pub transport_speeds: &'a [f64],
    /// Start of the handover wait, once reached.
    pub handover_ready: Option<f64>,
    pub release_time: Option<f64>,
}

/// Supplies one wrist position per tick.
pub trait WristSource {
    /// Wrist position for the tick described by `obs`; `None` if untracked.
    fn wrist(&mut self, obs: &Observation<'_>) -> Option<Vec3>;

    /// Whether the participant is done with the cup, ending the trial once
    /// the robot is in [`Phase::Return`].
    fn finished(&self, obs: &Observation<'_>) -> bool;
}

/// A wrist that never moves.
#[derive(Debug, Clone, Copy)]
pub struct StaticWrist(pub Vec3);

impl WristSource for StaticWrist {
    fn wrist(&mut self, _: &Observation<'_>) -> Option<Vec3> {
        Some(self.0)
    }

    fn finished(&self, _: &Observation<'_>) -> bool {
        true
    }
}

/// A recorded track indexed by tick; the last sample repeats.
#[derive(Debug, Clone)]
pub struct TrackWrist {
    pub samples: Vec<Vec3>,
}

impl WristSource for TrackWrist {
    fn wrist(&mut self, obs: &Observation<'_>) -> Option<Vec3> {
        self.samples.get(obs.tick).or(self.samples.last()).copied()
    }

    fn finished(&self, obs: &Observation<'_>) -> bool {
        obs.tick >= self.samples.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Running,
    Finished,
    Aborted(String),
}

/// A steppable trial, shared by [`run_trial`] and live sessions.
#[derive(Debug, Clone)]
pub struct TrialEngine {
    config: SimConfig,
    meta: TrialMeta,
    profile: VelocityProfile,
    state: SimState,
    tick: usize,
    transport_tick: usize,
    integral: Vec3,
    last_pick_error: f64,
    growth: usize,
    ticks: Vec<TickRecord>,
    transport_speeds: Vec<f64>,
    handover_ready: Option<f64>,
    release_time: Option<f64>,
    finish_requested: bool,
    outcome: Option<StepOutcome>,
}

struct Motion {
    v: Vec3,
    next_pos: Vec3,
    next_phase: Phase,
    commanded_speed: Option<f64>,
    snap: bool,
}

impl Motion {
    fn hold(pos: Vec3, next_phase: Phase) -> Self {
        Motion {
            v: Vec3::ZERO,
            next_pos: pos,
            next_phase,
            commanded_speed: None,
            snap: false,
        }
    }
}

fn clamp_norm(v: Vec3, limit: f64) -> Vec3 {
    let n = v.norm();
    if n > limit {
        v * (limit / n)
    } else {
        v
    }
}

/// Prepare a profile for playback under the configured transport mode.
pub fn executed_profile(profile: &VelocityProfile, config: &SimConfig) -> Result<VelocityProfile> {
    match config.transport_mode {
        TransportMode::AsIs => Ok(profile.clone()),
        TransportMode::ArcLengthRescale => {
            let distance = profile.integrate_distance();
            if distance > 0.0 {
                profile.scaled(config.path_length() / distance)
            } else {
                Ok(profile.clone())
            }
        }
    }
}

impl TrialEngine {
    pub fn new(profile: &VelocityProfile, config: &SimConfig, meta: TrialMeta) -> Result<Self> {
        config.validate()?;
        Ok(TrialEngine {
            profile: executed_profile(profile, config)?,
            state: SimState {
                t: 0.0,
                ee_pos: config.pick_pose,
                ee_vel: Vec3::ZERO,
                gripper: Gripper::Open,
                phase: Phase::Idle,
                cup_attached: false,
            },
            config: config.clone(),
            meta,
            tick: 0,
            transport_tick: 0,
            integral: Vec3::ZERO,
            last_pick_error: f64::INFINITY,
            growth: 0,
            ticks: Vec::new(),
            transport_speeds: Vec::new(),
            handover_ready: None,
            release_time: None,
            finish_requested: false,
            outcome: None,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn meta(&self) -> &TrialMeta {
        &self.meta
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn ticks(&self) -> &[TickRecord] {
        &self.ticks
    }

    pub fn release_time(&self) -> Option<f64> {
        self.release_time
    }

    pub fn outcome(&self) -> Option<&StepOutcome> {
        self.outcome.as_ref()
    }

    fn time_of(&self, tick: usize) -> f64 {
        tick as f64 / self.config.tick_rate
    }

    pub fn observation(&self) -> Observation<'_> {
        Observation {
            tick: self.tick,
            t: self.time_of(self.tick),
            phase: self.state.phase,
            ee: self.state.ee_pos,
            gripper: self.state.gripper,
            transport_speeds: &self.transport_speeds,
            handover_ready: self.handover_ready,
            release_time: self.release_time,
        }
    }

    /// End the trial once the robot is in `Return`; before that the request
    /// is remembered and honored on arrival.
    pub fn finish(&mut self) {
        if self.outcome.is_some() {
            return;
        }
        if self.state.phase == Phase::Return {
            self.outcome = Some(StepOutcome::Finished);
        } else {
            self.finish_requested = true;
        }
    }

    fn abort(&mut self, reason: String) -> StepOutcome {
        let out = StepOutcome::Aborted(reason);
        self.outcome = Some(out.clone());
        out
    }

    /// Run one tick with the given wrist sample.
    pub fn step(&mut self, wrist: Option<Vec3>) -> StepOutcome {
        if let Some(out) = &self.outcome {
            return out.clone();
        }
        let t = self.time_of(self.tick);
        if t >= self.config.timeout {
            return self.abort(format!("timeout after {} s in phase {}", self.config.timeout, self.state.phase.name()));
        }
        let pos = self.state.ee_pos;
        let phase = self.state.phase;
        let motion = match phase {
            Phase::Idle => Motion::hold(pos, Phase::Pick),
            Phase::Pick => match self.pick(pos) {
                Ok(m) => m,
                Err(e) => return self.abort(e.to_string()),
            },
            Phase::Transport => self.transport(pos),
            Phase::HandoverWait => {
                let release = wrist.is_some_and(|w| pos.distance(w) < self.config.release_distance);
                if release {
                    self.release_time = Some(t);
                    Motion::hold(pos, Phase::Released)
                } else {
                    Motion::hold(pos, Phase::HandoverWait)
                }
            }
            Phase::Released | Phase::Return => Motion::hold(pos, Phase::Return),
        };

        self.state.t = t;
        self.state.ee_vel = motion.v;
        self.ticks.push(TickRecord {
            t,
            ee: pos,
            v: motion.v,
            grip: self.state.gripper,
            phase,
            wrist,
            commanded_speed: motion.commanded_speed,
            snap: motion.snap,
        });
        if phase == Phase::Transport {
            self.transport_speeds.push(motion.v.norm());
        }

        match (phase, motion.next_phase) {
            (Phase::Pick, Phase::Transport) => {
                self.state.gripper = Gripper::Closed;
                self.state.cup_attached = true;
            }
            (Phase::Transport, Phase::HandoverWait) => self.handover_ready = Some(self.time_of(self.tick + 1)),
            (Phase::HandoverWait, Phase::Released) => {
                self.state.gripper = Gripper::Open;
                self.state.cup_attached = false;
            }
            _ => {}
        }
        self.state.ee_pos = motion.next_pos;
        self.state.phase = motion.next_phase;
        self.tick += 1;
        self.state.t = self.time_of(self.tick);

        if self.finish_requested && self.state.phase == Phase::Return {
            self.outcome = Some(StepOutcome::Finished);
            return StepOutcome::Finished;
        }
        StepOutcome::Running
    }

    /// PI approach to the grasp pose with a speed clamp and conditional
    /// integration; inside `arrival_epsilon` a terminal move lands exactly.
    fn pick(&mut self, pos: Vec3) -> Result<Motion> {
        let c = &self.config;
        let dt = c.dt();
        let e = c.grasp_pose - pos;
        let dist = e.norm();
        if dist < c.arrival_epsilon {
            self.growth = 0;
            return Ok(if dist <= c.pick_speed * dt {
                Motion {
                    v: e * c.tick_rate,
                    next_pos: c.grasp_pose,
                    next_phase: Phase::Transport,
                    commanded_speed: None,
                    snap: true,
                }
            } else {
                let v = e * (c.pick_speed / dist);
                Motion {
                    v,
                    next_pos: pos + v * dt,
                    next_phase: Phase::Pick,
                    commanded_speed: None,
                    snap: false,
                }
            });
        }

        if dist > self.last_pick_error {
            self.growth += 1;
            if self.growth >= c.divergence_ticks {
                return Err(Error::Diverged(format!(
                    "pick error grew for {} consecutive ticks, now {dist:.4} m",
                    self.growth
                )));
            }
        } else {
            self.growth = 0;
        }
        self.last_pick_error = dist;

        let (kp, ki) = (c.pi_gains.kp, c.pi_gains.ki);
        let candidate = self.integral + e * dt;
        if (e * kp + candidate * ki).norm() <= c.pick_speed {
            self.integral = clamp_norm(candidate, c.integral_limit);
        }
        let u = clamp_norm(e * kp + self.integral * ki, c.pick_speed);
        let v = u + c.pick_velocity_bias;
        Ok(Motion {
            v,
            next_pos: pos + v * dt,
            next_phase: Phase::Pick,
            commanded_speed: None,
            snap: false,
        })
    }

    /// Play the profile along the direction to the handover point,
    /// recomputed every tick.
    fn transport(&mut self, pos: Vec3) -> Motion {
        let c = &self.config;
        let dt = c.dt();
        let target = c.handover_point;
        let speed = self.profile.speed_at(self.transport_tick as f64 * dt).unwrap_or(0.0);
        let d = target - pos;
        let remaining = d.norm();
        let (v, next_pos, snap) = if remaining < speed * dt {
            (d * c.tick_rate, target, true)
        } else if remaining == 0.0 {
            (Vec3::ZERO, pos, false)
        } else {
            let v = d * (speed / remaining);
            (v, pos + v * dt, false)
        };
        self.transport_tick += 1;
        let exhausted = self.profile.speed_at(self.transport_tick as f64 * dt).is_none();
        let arrived = next_pos.distance(target) < c.arrival_epsilon;
        Motion {
            v,
            next_pos,
            next_phase: if exhausted || arrived {
                Phase::HandoverWait
            } else {
                Phase::Transport
            },
            commanded_speed: Some(speed),
            snap,
        }
    }

    pub fn into_trace(self) -> TrialTrace {
        let aborted = match self.outcome {
            Some(StepOutcome::Aborted(reason)) => Some(reason),
            Some(StepOutcome::Finished) => None,
            Some(StepOutcome::Running) | None => Some("trial not finished".into()),
        };
        TrialTrace {
            trial: self.meta.trial,
            profile_id: self.meta.profile_id,
            class: self.meta.class,
            profile: self.profile,
            ticks: self.ticks,
            release_time: self.release_time,
            aborted,
        }
    }
}

/// Run a complete trial against a wrist source.
///
/// Configuration and profile errors are returned as `Err`; a trial that
/// times out or diverges returns its partial trace with `aborted` set.
pub fn run_trial(profile: &VelocityProfile, source: &mut dyn WristSource, config: &SimConfig, meta: TrialMeta) -> Result<TrialTrace> {
    let mut engine = TrialEngine::new(profile, config, meta)?;
    loop {
        let obs = engine.observation();
        if obs.phase == Phase::Return && source.finished(&obs) {
            engine.finish();
            break;
        }
        let wrist = source.wrist(&obs);
        if engine.step(wrist) != StepOutcome::Running {
            break;
        }
    }
    Ok(engine.into_trace())
}
