use serde::{Deserialize, Serialize};

use super::stats::order_free_mean;
use super::{DeploymentSet, Schedule, ScheduledTrial, SCHEMA_VERSION, TRIALS_PER_SESSION};
use crate::classifier::ClassifierModel;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::human::{ParticipantParams, SortDecision, TrialParticipant, Zone};
use crate::kinematics::{CarefulnessClass, VelocityProfile, REST_FRACTION};
use crate::rng;
use crate::robot::{run_trial, SimConfig, TrialMeta, TrialTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionMode {
    Scripted,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial_idx: usize,
    pub block: usize,
    pub class: CarefulnessClass,
    pub profile_id: String,
    pub decision: Zone,
    pub perceived: Option<CarefulnessClass>,
    pub posterior: Option<f64>,
    /// `None` for `Unknown` decisions, which count as neither.
    pub correct: Option<bool>,
    pub reach_duration: Option<f64>,
    pub reach_median_speed: Option<f64>,
    pub release_time: Option<f64>,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: CarefulnessClass,
    pub trials: usize,
    pub correct: usize,
    pub wrong: usize,
    pub unknown: usize,
    pub mean_reach_duration: Option<f64>,
    pub mean_reach_median_speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub version: String,
    pub participant: usize,
    pub seed: u64,
    pub mode: SessionMode,
    pub trials: Vec<TrialRow>,
    pub per_class: Vec<ClassSummary>,
    pub total: usize,
    pub correct: usize,
    pub wrong: usize,
    pub unknown: usize,
    /// `correct / total`, with unknown decisions in the denominator.
    pub accuracy: f64,
    pub aborted_trials: Vec<usize>,
}

/// Reach segment extracted from a wrist track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachMeasure {
    pub onset: f64,
    pub offset: f64,
    pub duration: f64,
    pub median_speed: f64,
    pub peak_speed: f64,
}

/// Segment the reach from a trial's wrist track.
///
/// Speeds come from central differences. The peak is taken over ticks up
/// to the release; onset is the first tick above 5% of that peak and offset
/// the first tick at or after the release at or below it. The segment keeps
/// the sample before onset so both ends sit at rest.
pub fn measure_reach(trace: &TrialTrace, tick_rate: f64) -> Option<ReachMeasure> {
    let release = trace.release_time?;
    let first = trace.ticks.iter().position(|r| r.wrist.is_some())?;
    let mut last_seen = trace.ticks[first].wrist?;
    let track: Vec<Vec3> = trace.ticks[first..]
        .iter()
        .map(|r| {
            if let Some(w) = r.wrist {
                last_seen = w;
            }
            last_seen
        })
        .collect();
    let n = track.len();
    if n < 3 {
        return None;
    }
    let speeds: Vec<f64> = (0..n)
        .map(|k| {
            let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
            track[b].distance(track[a]) * tick_rate / (b - a) as f64
        })
        .collect();
    let r = trace.ticks[first..].iter().position(|t| t.t == release)?;
    let peak = speeds[..=r].iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return None;
    }
    let gate = REST_FRACTION * peak;
    let onset = speeds[..=r].iter().position(|&v| v > gate)?;
    let offset = speeds[r..].iter().position(|&v| v <= gate).map_or(n - 1, |k| r + k);
    let start = onset.saturating_sub(1);
    let segment = VelocityProfile::new(1.0 / tick_rate, speeds[start..=offset].to_vec(), None).ok()?;
    let f = segment.extract_features();
    let t0 = trace.ticks[first].t;
    Some(ReachMeasure {
        onset: t0 + onset as f64 / tick_rate,
        offset: t0 + offset as f64 / tick_rate,
        duration: f.duration,
        median_speed: f.median_speed,
        peak_speed: f.peak_speed,
    })
}

/// One table row from a trial's schedule slot, trace and decision.
pub fn trial_row(slot: &ScheduledTrial, trace: &TrialTrace, decision: &SortDecision, posterior: Option<f64>, tick_rate: f64) -> TrialRow {
    let reach = measure_reach(trace, tick_rate);
    TrialRow {
        trial_idx: slot.trial_idx,
        block: slot.block,
        class: slot.class,
        profile_id: slot.profile_id.clone(),
        decision: decision.zone,
        perceived: decision.perceived,
        posterior,
        correct: (decision.zone != Zone::Unknown).then(|| decision.zone == Zone::for_class(slot.class)),
        reach_duration: reach.map(|r| r.duration),
        reach_median_speed: reach.map(|r| r.median_speed),
        release_time: trace.release_time,
        aborted: trace.aborted.clone(),
    }
}

impl SessionReport {
    pub fn from_rows(participant: usize, seed: u64, mode: SessionMode, trials: Vec<TrialRow>) -> Self {
        let count = |rows: &[&TrialRow], want: Option<bool>| rows.iter().filter(|r| r.correct == want).count();
        let per_class = CarefulnessClass::ALL
            .iter()
            .map(|&class| {
                let rows: Vec<&TrialRow> = trials.iter().filter(|r| r.class == class).collect();
                let durations: Vec<f64> = rows.iter().filter_map(|r| r.reach_duration).collect();
                let speeds: Vec<f64> = rows.iter().filter_map(|r| r.reach_median_speed).collect();
                ClassSummary {
                    class,
                    trials: rows.len(),
                    correct: count(&rows, Some(true)),
                    wrong: count(&rows, Some(false)),
                    unknown: count(&rows, None),
                    mean_reach_duration: order_free_mean(&durations),
                    mean_reach_median_speed: order_free_mean(&speeds),
                }
            })
            .collect();
        let all: Vec<&TrialRow> = trials.iter().collect();
        let (correct, wrong, unknown) = (count(&all, Some(true)), count(&all, Some(false)), count(&all, None));
        let total = trials.len();
        SessionReport {
            version: SCHEMA_VERSION.to_string(),
            participant,
            seed,
            mode,
            aborted_trials: trials.iter().filter(|r| r.aborted.is_some()).map(|r| r.trial_idx).collect(),
            per_class,
            total,
            correct,
            wrong,
            unknown,
            accuracy: if total > 0 { correct as f64 / total as f64 } else { 0.0 },
            trials,
        }
    }

    pub fn class_summary(&self, class: CarefulnessClass) -> Option<&ClassSummary> {
        self.per_class.iter().find(|s| s.class == class)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Everything a scripted session needs besides the participant.
#[derive(Clone, Copy)]
pub struct SessionInputs<'a> {
    pub schedule: &'a Schedule,
    pub profiles: &'a DeploymentSet,
    pub sim: &'a SimConfig,
    pub classifier: &'a ClassifierModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutput {
    pub report: SessionReport,
    pub traces: Vec<TrialTrace>,
}

/// Run the 20 scheduled trials with a scripted participant.
///
/// Aborted trials are kept in the report with their reason; the session
/// always runs to the end of the schedule.
pub fn run_session(inputs: SessionInputs<'_>, participant: &ParticipantParams, participant_id: usize, seed: u64) -> Result<SessionOutput> {
    if inputs.schedule.trials.len() != TRIALS_PER_SESSION {
        return Err(Error::InvalidArgument(format!(
            "schedule has {} trials, expected {TRIALS_PER_SESSION}",
            inputs.schedule.trials.len()
        )));
    }
    let tick_rate = inputs.sim.tick_rate;
    let mut rows = Vec::with_capacity(TRIALS_PER_SESSION);
    let mut traces = Vec::with_capacity(TRIALS_PER_SESSION);
    for slot in &inputs.schedule.trials {
        let profile = inputs.profiles.get(&slot.profile_id)?;
        let trial_rng = rng::substream(seed, "trial", slot.trial_idx as u64);
        let mut who = TrialParticipant::new(participant, inputs.classifier, slot.trial_idx, tick_rate, trial_rng)?;
        let meta = TrialMeta {
            trial: slot.trial_idx,
            profile_id: slot.profile_id.clone(),
            class: Some(slot.class),
        };
        let trace = run_trial(profile, &mut who, inputs.sim, meta)?;
        let behavior = who.behavior()?;
        rows.push(trial_row(slot, &trace, &behavior.decision, behavior.posterior, tick_rate));
        traces.push(trace);
    }
    Ok(SessionOutput {
        report: SessionReport::from_rows(participant_id, seed, SessionMode::Scripted, rows),
        traces,
    })
}
