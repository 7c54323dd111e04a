//! Session state machine, independent of any transport.
//!
//! A live session runs one [`TrialEngine`] per scheduled trial. Each call to
//! [`Session::tick`] advances the active engine by one controller tick using
//! the most recent wrist sample, so pointer input at any rate is reduced to
//! one sample per tick. Ticks only happen while a stream is attached; a
//! disconnected client therefore pauses the trial clock.

use std::sync::Arc;

use carefulbot::classifier::ClassifierModel;
use carefulbot::experiment::{trial_row, DeploymentSet, Schedule, SessionMode, SessionOutput, SessionReport, TrialRow};
use carefulbot::geom::Vec3;
use carefulbot::human::{SortDecision, Zone};
use carefulbot::robot::{SimConfig, StepOutcome, TrialEngine, TrialMeta, TrialTrace};
use serde::{Deserialize, Serialize};

use crate::error::{ServiceError, ServiceResult};
use crate::protocol::{Calibration, DecisionAck, Mode, PointerSample, ServerMessage, SlotView, WristAck, VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum SessionState {
    Waiting,
    InTrial { trial_idx: usize },
    BetweenBlocks { next_trial: usize },
    Done,
}

/// Everything shared by the sessions of one server.
#[derive(Debug, Clone)]
pub struct StudySetup {
    pub schedule: Schedule,
    pub profiles: Arc<DeploymentSet>,
    pub sim: SimConfig,
    pub classifier: Arc<ClassifierModel>,
    pub calibration: Calibration,
    /// Length of the pause between blocks, in ticks.
    pub block_pause_ticks: usize,
}

#[derive(Debug)]
struct Active {
    engine: TrialEngine,
    decision: Option<Zone>,
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub mode: Mode,
    pub participant: usize,
    pub seed: u64,
    setup: Arc<StudySetup>,
    state: SessionState,
    active: Option<Active>,
    latest: Option<(f64, Vec3)>,
    pause_left: usize,
    clock: u64,
    rows: Vec<TrialRow>,
    traces: Vec<TrialTrace>,
    report: Option<SessionReport>,
    /// Stream messages of a scripted session, replayed verbatim.
    replay: Vec<ServerMessage>,
}

impl Session {
    pub fn live(id: String, participant: usize, seed: u64, setup: Arc<StudySetup>) -> Self {
        Session {
            id,
            mode: Mode::Live,
            participant,
            seed,
            setup,
            state: SessionState::Waiting,
            active: None,
            latest: None,
            pause_left: 0,
            clock: 0,
            rows: Vec::new(),
            traces: Vec::new(),
            report: None,
            replay: Vec::new(),
        }
    }

    /// A session whose trials were already run by the scripted participant.
    pub fn scripted(id: String, participant: usize, seed: u64, setup: Arc<StudySetup>, output: SessionOutput) -> Self {
        let rate = setup.sim.tick_rate;
        let mut replay = Vec::new();
        let mut clock = 0u64;
        for (k, trace) in output.traces.iter().enumerate() {
            replay.push(ServerMessage::trial_start(trace.trial, trace.trial / carefulbot::experiment::BLOCK_SIZE));
            for r in &trace.ticks {
                replay.push(ServerMessage::Tick {
                    v: VERSION.into(),
                    t: clock as f64 / rate,
                    trial_t: r.t,
                    trial_idx: trace.trial,
                    ee_pos: r.ee,
                    gripper: r.grip,
                    phase: r.phase,
                });
                clock += 1;
            }
            replay.push(ServerMessage::trial_end(trace.trial, trace.aborted.clone()));
            if setup.schedule.block_ends_after(k) {
                replay.push(ServerMessage::block_pause(k));
            }
        }
        replay.push(ServerMessage::done());
        Session {
            id,
            mode: Mode::Scripted,
            participant,
            seed,
            setup,
            state: SessionState::Done,
            active: None,
            latest: None,
            pause_left: 0,
            clock,
            rows: output.report.trials.clone(),
            traces: output.traces,
            report: Some(output.report),
            replay,
        }
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn slots(&self) -> Vec<SlotView> {
        self.setup
            .schedule
            .trials
            .iter()
            .map(|t| SlotView {
                trial_idx: t.trial_idx,
                block: t.block,
            })
            .collect()
    }

    pub fn setup(&self) -> &StudySetup {
        &self.setup
    }

    pub fn traces(&self) -> &[TrialTrace] {
        &self.traces
    }

    pub fn report(&self) -> ServiceResult<&SessionReport> {
        self.report
            .as_ref()
            .ok_or_else(|| ServiceError::Conflict(format!("session is not done ({})", state_name(self.state))))
    }

    /// The messages of a scripted session, in stream order.
    pub fn replay(&self) -> &[ServerMessage] {
        &self.replay
    }

    /// The wrist position the next tick will use.
    pub fn latest_wrist(&self) -> Option<Vec3> {
        self.latest.map(|(_, w)| w)
    }

    /// Keep the newest sample by client time; older ones are dropped.
    pub fn ingest_wrist(&mut self, samples: &[PointerSample]) -> ServiceResult<WristAck> {
        if self.mode != Mode::Live {
            return Err(ServiceError::Conflict("scripted sessions take no wrist samples".into()));
        }
        if self.state == SessionState::Done {
            return Err(ServiceError::Conflict("session is done".into()));
        }
        let mut ack = WristAck { accepted: 0, stale: 0 };
        for s in samples {
            if !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite()) {
                return Err(ServiceError::BadRequest(format!("non-finite wrist sample {s:?}")));
            }
            if self.latest.is_some_and(|(t, _)| s.t < t) {
                ack.stale += 1;
                continue;
            }
            self.latest = Some((s.t, self.setup.calibration.to_table(s.x, s.y)));
            ack.accepted += 1;
        }
        Ok(ack)
    }

    /// Record the zone for the active trial once its cup has been released.
    pub fn decide(&mut self, trial_idx: usize, zone: Zone) -> ServiceResult<DecisionAck> {
        if self.mode != Mode::Live {
            return Err(ServiceError::Conflict("scripted sessions take no decisions".into()));
        }
        if trial_idx >= self.setup.schedule.trials.len() {
            return Err(ServiceError::BadRequest(format!("no trial {trial_idx}")));
        }
        if self.rows.iter().any(|r| r.trial_idx == trial_idx) {
            return Err(ServiceError::Conflict(format!("trial {trial_idx} already decided")));
        }
        let active_idx = match self.state {
            SessionState::InTrial { trial_idx } => trial_idx,
            s => return Err(ServiceError::Conflict(format!("no active trial ({})", state_name(s)))),
        };
        if trial_idx != active_idx {
            return Err(ServiceError::Conflict(format!("trial {trial_idx} is not active (active: {active_idx})")));
        }
        let active = self.active.as_mut().expect("a trial in progress has an engine");
        if active.decision.is_some() {
            return Err(ServiceError::Conflict(format!("trial {trial_idx} already decided")));
        }
        if active.engine.release_time().is_none() {
            return Err(ServiceError::Conflict(format!("trial {trial_idx}: cup not released yet")));
        }
        active.decision = Some(zone);
        active.engine.finish();
        Ok(DecisionAck {
            v: VERSION.into(),
            trial_idx,
            zone,
            state: self.state,
        })
    }

    fn start_trial(&mut self, k: usize, out: &mut Vec<ServerMessage>) -> ServiceResult<()> {
        let slot = &self.setup.schedule.trials[k];
        let profile = self.setup.profiles.get(&slot.profile_id)?;
        let meta = TrialMeta {
            trial: k,
            profile_id: slot.profile_id.clone(),
            class: Some(slot.class),
        };
        self.active = Some(Active {
            engine: TrialEngine::new(profile, &self.setup.sim, meta)?,
            decision: None,
        });
        self.state = SessionState::InTrial { trial_idx: k };
        out.push(ServerMessage::trial_start(k, slot.block));
        Ok(())
    }

    fn complete_trial(&mut self, k: usize, out: &mut Vec<ServerMessage>) {
        let active = self.active.take().expect("completing an active trial");
        let trace = active.engine.into_trace();
        let zone = active.decision.unwrap_or(Zone::Unknown);
        let decision = SortDecision {
            zone,
            trial_idx: k,
            perceived: zone.perceived(),
        };
        let slot = &self.setup.schedule.trials[k];
        self.rows.push(trial_row(slot, &trace, &decision, None, self.setup.sim.tick_rate));
        out.push(ServerMessage::trial_end(k, trace.aborted.clone()));
        self.traces.push(trace);

        let n = self.setup.schedule.trials.len();
        if k + 1 == n {
            self.report = Some(SessionReport::from_rows(self.participant, self.seed, SessionMode::Live, self.rows.clone()));
            self.state = SessionState::Done;
            out.push(ServerMessage::done());
        } else if self.setup.schedule.block_ends_after(k) {
            self.state = SessionState::BetweenBlocks { next_trial: k + 1 };
            self.pause_left = self.setup.block_pause_ticks;
            out.push(ServerMessage::block_pause(k));
        } else {
            self.state = SessionState::InTrial { trial_idx: k + 1 };
        }
    }

    /// Advance the session clock by one tick and return the messages to
    /// stream. Returns nothing once the session is done.
    pub fn tick(&mut self) -> ServiceResult<Vec<ServerMessage>> {
        let mut out = Vec::new();
        match self.state {
            SessionState::Done => return Ok(out),
            SessionState::Waiting => self.start_trial(0, &mut out)?,
            SessionState::BetweenBlocks { next_trial } => {
                if self.pause_left > 0 {
                    self.pause_left -= 1;
                    self.clock += 1;
                    return Ok(out);
                }
                self.start_trial(next_trial, &mut out)?;
            }
            SessionState::InTrial { trial_idx } if self.active.is_none() => self.start_trial(trial_idx, &mut out)?,
            SessionState::InTrial { .. } => {}
        }
        let SessionState::InTrial { trial_idx: k } = self.state else {
            unreachable!("a trial was just started or is running")
        };
        let wrist = self.latest_wrist();
        let active = self.active.as_mut().expect("active trial");
        if active.engine.outcome().is_none() {
            active.engine.step(wrist);
            let r = active.engine.ticks().last().expect("a step records a tick");
            out.push(ServerMessage::Tick {
                v: VERSION.into(),
                t: self.clock as f64 / self.setup.sim.tick_rate,
                trial_t: r.t,
                trial_idx: k,
                ee_pos: r.ee,
                gripper: r.grip,
                phase: r.phase,
            });
            self.clock += 1;
        }
        if matches!(active.engine.outcome(), Some(StepOutcome::Finished | StepOutcome::Aborted(_))) {
            self.complete_trial(k, &mut out);
        }
        Ok(out)
    }
}

fn state_name(s: SessionState) -> &'static str {
    match s {
        SessionState::Waiting => "waiting",
        SessionState::InTrial { .. } => "in trial",
        SessionState::BetweenBlocks { .. } => "between blocks",
        SessionState::Done => "done",
    }
}
