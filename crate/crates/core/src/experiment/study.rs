use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::analysis::{analyze, StudyReport};
use super::session::{run_session, SessionInputs, SessionOutput};
use super::{make_schedule, DeploymentSet, Schedule};
use crate::classifier::{self, ClassifierModel};
use crate::error::{Error, Result};
use crate::human::ParticipantParams;
use crate::kinematics::CarefulnessClass;
use crate::rng;
use crate::robot::{self, SimConfig, StaticWrist, TrialMeta};
use crate::surrogate::{build_dataset, ProfileFamilyParams};

/// Training set for the participants' perception classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceptionConfig {
    pub n_per_class: usize,
    pub seed: u64,
    pub family: ProfileFamilyParams,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        PerceptionConfig {
            n_per_class: 500,
            seed: 0,
            family: ProfileFamilyParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub participants: usize,
    pub seed: u64,
    pub participant: ParticipantParams,
    /// Between-participant standard deviation of the base reach duration, s.
    pub participant_duration_sd: f64,
    pub sim: SimConfig,
    pub perception: PerceptionConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            participants: 12,
            seed: 0,
            participant: ParticipantParams::default(),
            participant_duration_sd: 0.1,
            sim: SimConfig::default(),
            perception: PerceptionConfig::default(),
        }
    }
}

/// Fit the perception classifier on what a participant sees: the transport
/// speed of each surrogate profile as the robot plays it, tail cut at the
/// arrival tolerance included.
pub fn perception_classifier(config: &PerceptionConfig, sim: &SimConfig) -> Result<ClassifierModel> {
    let data = build_dataset(config.n_per_class, &config.family, config.seed)?;
    let seen = data
        .profiles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let meta = TrialMeta {
                trial: i,
                profile_id: String::new(),
                class: p.label(),
            };
            let trace = robot::run_trial(p, &mut StaticWrist(sim.handover_point), sim, meta)?;
            trace.observed_profile(sim.dt())
        })
        .collect::<Result<Vec<_>>>()?;
    classifier::fit_profiles(&seen, config.seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutput {
    pub schedule: Schedule,
    pub participants: Vec<ParticipantParams>,
    pub sessions: Vec<SessionOutput>,
    pub report: StudyReport,
}

impl StudyConfig {
    /// Parameters of participant `i`: the base participant with its own
    /// base reach duration and seed.
    pub fn participant_params(&self, i: usize) -> Result<ParticipantParams> {
        let mut p = self.participant.clone();
        p.seed = rng::derive_seed(self.seed, "participant", i as u64);
        if self.participant_duration_sd > 0.0 {
            let normal = Normal::new(0.0, self.participant_duration_sd)
                .map_err(|e| Error::InvalidArgument(format!("participant_duration_sd: {e}")))?;
            let mut r = rng::rng(p.seed);
            let shift: f64 = normal.sample(&mut r);
            p.base_reach_duration = (p.base_reach_duration + shift).max(0.5 * p.base_reach_duration);
        }
        p.validate()?;
        Ok(p)
    }
}

/// Run every participant on one shared schedule and analyze the sessions.
pub fn run_study(config: &StudyConfig, profiles: &DeploymentSet, classifier: &ClassifierModel) -> Result<StudyOutput> {
    if config.participants < 2 {
        return Err(Error::InvalidArgument("a study needs at least 2 participants".into()));
    }
    let schedule = make_schedule(
        &profiles.ids(CarefulnessClass::Careful),
        &profiles.ids(CarefulnessClass::NotCareful),
        rng::derive_seed(config.seed, "schedule", 0),
    )?;
    let inputs = SessionInputs {
        schedule: &schedule,
        profiles,
        sim: &config.sim,
        classifier,
    };
    let mut participants = Vec::with_capacity(config.participants);
    let mut sessions = Vec::with_capacity(config.participants);
    for i in 0..config.participants {
        let params = config.participant_params(i)?;
        sessions.push(run_session(inputs, &params, i, rng::derive_seed(config.seed, "session", i as u64))?);
        participants.push(params);
    }
    let reports: Vec<_> = sessions.iter().map(|s| s.report.clone()).collect();
    let report = analyze(&reports)?;
    Ok(StudyOutput {
        schedule,
        participants,
        sessions,
        report,
    })
}
