//! The sorting study: schedules, sessions, and the reach-kinematics analysis.
//!
//! A study runs one fixed schedule of 20 trials (10 careful, 10 not careful,
//! five blocks of four) for every participant. Each trial's reach is
//! segmented from the wrist track and summarized by duration and median
//! speed; [`analyze`] pools sessions into accuracy tallies and paired
//! `C - NC` effects across participants.

mod analysis;
mod report;
mod session;
pub mod stats;
mod study;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gan::{self, GanModel};
use crate::kinematics::{CarefulnessClass, VelocityProfile};
use crate::rng;
use crate::surrogate::{self, ProfileFamilyParams};

pub use analysis::{analyze, ClassMeans, ClassTally, Effects, IndexTally, StudyReport};
pub use report::{study_markdown, trial_rows_csv};
pub use session::{measure_reach, run_session, trial_row, ClassSummary, ReachMeasure, SessionInputs, SessionMode, SessionOutput, SessionReport, TrialRow};
pub use stats::PairedEffect;
pub use study::{perception_classifier, run_study, PerceptionConfig, StudyConfig, StudyOutput};

pub const TRIALS_PER_SESSION: usize = 20;
pub const BLOCK_SIZE: usize = 4;
pub const PER_CLASS: usize = TRIALS_PER_SESSION / 2;

/// Version tag of every exported report.
pub const SCHEMA_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledTrial {
    pub trial_idx: usize,
    pub block: usize,
    pub class: CarefulnessClass,
    pub profile_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub seed: u64,
    pub trials: Vec<ScheduledTrial>,
}

impl Schedule {
    pub fn blocks(&self) -> impl Iterator<Item = &[ScheduledTrial]> {
        self.trials.chunks(BLOCK_SIZE)
    }

    /// Whether a block pause follows this trial.
    pub fn block_ends_after(&self, trial_idx: usize) -> bool {
        (trial_idx + 1) % BLOCK_SIZE == 0 && trial_idx + 1 < self.trials.len()
    }
}

/// Random order of 10 careful and 10 not-careful slots, each slot taking a
/// distinct profile of its class.
pub fn make_schedule(careful_ids: &[String], not_careful_ids: &[String], seed: u64) -> Result<Schedule> {
    if careful_ids.len() < PER_CLASS || not_careful_ids.len() < PER_CLASS {
        return Err(Error::InvalidArgument(format!(
            "schedule needs {PER_CLASS} profiles per class, got {} C and {} NC",
            careful_ids.len(),
            not_careful_ids.len()
        )));
    }
    let mut rng = rng::substream(seed, "schedule", 0);
    let mut slots: Vec<CarefulnessClass> = [CarefulnessClass::Careful; PER_CLASS]
        .into_iter()
        .chain([CarefulnessClass::NotCareful; PER_CLASS])
        .collect();
    slots.shuffle(&mut rng);
    let mut pools = [careful_ids.to_vec(), not_careful_ids.to_vec()];
    for pool in &mut pools {
        pool.shuffle(&mut rng);
        pool.truncate(PER_CLASS);
    }
    let mut next = [0usize; 2];
    let trials = slots
        .into_iter()
        .enumerate()
        .map(|(trial_idx, class)| {
            let k = usize::from(class == CarefulnessClass::NotCareful);
            let profile_id = pools[k][next[k]].clone();
            next[k] += 1;
            ScheduledTrial {
                trial_idx,
                block: trial_idx / BLOCK_SIZE,
                class,
                profile_id,
            }
        })
        .collect();
    Ok(Schedule { seed, trials })
}

/// The profiles available to a study, keyed by id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeploymentSet {
    pub profiles: BTreeMap<String, VelocityProfile>,
}

impl DeploymentSet {
    fn id(class: CarefulnessClass, i: usize) -> String {
        format!("{}{i:02}", class.code())
    }

    pub fn insert(&mut self, id: String, profile: VelocityProfile) -> Result<()> {
        if profile.label().is_none() {
            return Err(Error::InvalidProfile(format!("deployment profile {id} has no class")));
        }
        profile.check_motion()?;
        self.profiles.insert(id, profile);
        Ok(())
    }

    /// Sample `n` profiles from each class model.
    pub fn from_models(careful: &GanModel, not_careful: &GanModel, n: usize, seed: u64) -> Result<Self> {
        let mut set = DeploymentSet::default();
        for (k, model) in [careful, not_careful].into_iter().enumerate() {
            let profiles = gan::sample(model, n, rng::derive_seed(seed, "deploy", k as u64))?;
            for (i, p) in profiles.into_iter().enumerate() {
                set.insert(Self::id(model.class, i), p)?;
            }
        }
        Ok(set)
    }

    /// Draw `n` profiles per class straight from the surrogate family.
    pub fn from_surrogate(params: &ProfileFamilyParams, n: usize, seed: u64) -> Result<Self> {
        let mut set = DeploymentSet::default();
        for class in CarefulnessClass::ALL {
            let mut rng = rng::substream(seed, "deploy-surrogate", u64::from(class == CarefulnessClass::NotCareful));
            for i in 0..n {
                let s = surrogate::sample_profile(class, params, &mut rng)?;
                set.insert(Self::id(class, i), s.profile)?;
            }
        }
        Ok(set)
    }

    pub fn ids(&self, class: CarefulnessClass) -> Vec<String> {
        self.profiles
            .iter()
            .filter(|(_, p)| p.label() == Some(class))
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn get(&self, id: &str) -> Result<&VelocityProfile> {
        self.profiles
            .get(id)
            .ok_or_else(|| Error::InvalidArgument(format!("no deployment profile {id:?}")))
    }

    /// Write one `{id}_{class}.csv` per profile.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (id, p) in &self.profiles {
            let class = p.label().expect("deployment profiles are labeled");
            p.write_csv(&dir.join(format!("{id}_{}.csv", class.code())))?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::io(dir, e))?;
        entries.sort_by_key(|e| e.file_name());
        let mut set = DeploymentSet::default();
        for entry in entries {
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("csv") {
                continue;
            }
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let id = stem.rsplit_once('_').map(|(id, _)| id).unwrap_or(stem).to_string();
            set.insert(id, VelocityProfile::read_csv(&path)?)?;
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn schedule_shape() {
        let s = make_schedule(&ids("c", 10), &ids("n", 12), 3).unwrap();
        assert_eq!(s.trials.len(), 20);
        let c = s.trials.iter().filter(|t| t.class == CarefulnessClass::Careful).count();
        assert_eq!(c, 10);
        assert_eq!(s.blocks().count(), 5);
        assert!(s.blocks().all(|b| b.len() == 4));
        let mut used: Vec<_> = s.trials.iter().map(|t| t.profile_id.clone()).collect();
        used.sort();
        used.dedup();
        assert_eq!(used.len(), 20);
        assert_eq!(s, make_schedule(&ids("c", 10), &ids("n", 12), 3).unwrap());
    }

    #[test]
    fn schedules_differ_across_seeds() {
        let a = make_schedule(&ids("c", 10), &ids("n", 10), 1).unwrap();
        let b = make_schedule(&ids("c", 10), &ids("n", 10), 2).unwrap();
        assert_ne!(a.trials, b.trials);
        let mut ma: Vec<_> = a.trials.iter().map(|t| t.profile_id.clone()).collect();
        let mut mb: Vec<_> = b.trials.iter().map(|t| t.profile_id.clone()).collect();
        ma.sort();
        mb.sort();
        assert_eq!(ma, mb);
    }

    #[test]
    fn short_pools_are_rejected() {
        assert!(make_schedule(&ids("c", 9), &ids("n", 10), 0).is_err());
    }

    #[test]
    fn block_pauses() {
        let s = make_schedule(&ids("c", 10), &ids("n", 10), 0).unwrap();
        let pauses: Vec<usize> = (0..20).filter(|&i| s.block_ends_after(i)).collect();
        assert_eq!(pauses, vec![3, 7, 11, 15]);
    }
}
