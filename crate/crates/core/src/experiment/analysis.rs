use serde::{Deserialize, Serialize};

use super::session::{SessionReport, TrialRow};
use super::stats::{order_free_mean, paired_effect, PairedEffect};
use super::{SCHEMA_VERSION, TRIALS_PER_SESSION};
use crate::error::{Error, Result};
use crate::kinematics::CarefulnessClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTally {
    pub class: CarefulnessClass,
    pub total: usize,
    pub correct: usize,
    pub wrong: usize,
    pub unknown: usize,
    pub accuracy: f64,
}

/// Three-way tally of one trial position across participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexTally {
    pub trial_idx: usize,
    pub correct: usize,
    pub wrong: usize,
    pub unknown: usize,
    pub accuracy: f64,
}

/// Grand means over participants of per-participant class means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMeans {
    pub class: CarefulnessClass,
    pub reach_duration: Option<f64>,
    pub reach_median_speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effects {
    pub reach_duration: PairedEffect,
    pub reach_median_speed: PairedEffect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub version: String,
    pub n_participants: usize,
    pub total_trials: usize,
    pub correct: usize,
    pub wrong: usize,
    pub unknown: usize,
    pub accuracy: f64,
    /// `accuracy` as a percentage with two decimals, e.g. `"78.75%"`.
    pub accuracy_percent: String,
    pub per_class: Vec<ClassTally>,
    pub per_trial_index: Vec<IndexTally>,
    pub class_means: Vec<ClassMeans>,
    /// Paired `C - NC` differences of per-participant means.
    pub effects: Effects,
    /// Participants left out of the accuracy tallies (all decisions unknown).
    pub excluded_sessions: Vec<usize>,
    pub notes: Vec<String>,
}

fn percent(correct: usize, total: usize) -> String {
    if total == 0 {
        return "n/a".into();
    }
    // Integer arithmetic, so 189/240 prints 78.75% with no float rounding.
    let hundredths = (correct as u128 * 10_000 * 2 + total as u128) / (2 * total as u128);
    format!("{}.{:02}%", hundredths / 100, hundredths % 100)
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn tally<'a>(rows: impl Iterator<Item = &'a TrialRow>) -> (usize, usize, usize, usize) {
    let (mut c, mut w, mut u, mut n) = (0, 0, 0, 0);
    for r in rows {
        n += 1;
        match r.correct {
            Some(true) => c += 1,
            Some(false) => w += 1,
            None => u += 1,
        }
    }
    (c, w, u, n)
}

fn class_mean(report: &SessionReport, class: CarefulnessClass, field: fn(&TrialRow) -> Option<f64>) -> Option<f64> {
    let values: Vec<f64> = report.trials.iter().filter(|r| r.class == class).filter_map(field).collect();
    order_free_mean(&values)
}

/// Pool sessions into a study report.
pub fn analyze(reports: &[SessionReport]) -> Result<StudyReport> {
    if reports.len() < 2 {
        return Err(Error::InvalidArgument(format!("analysis needs at least 2 sessions, got {}", reports.len())));
    }
    let mut notes = Vec::new();
    let mut excluded: Vec<usize> = reports
        .iter()
        .filter(|r| !r.trials.is_empty() && r.trials.iter().all(|t| t.correct.is_none()))
        .map(|r| r.participant)
        .collect();
    excluded.sort_unstable();
    if !excluded.is_empty() {
        notes.push(format!("{} session(s) with only unknown decisions excluded from accuracy", excluded.len()));
    }
    let included: Vec<&SessionReport> = reports.iter().filter(|r| !excluded.contains(&r.participant)).collect();
    let rows = || included.iter().flat_map(|r| r.trials.iter());

    let (correct, wrong, unknown, total) = tally(rows());
    let per_class = CarefulnessClass::ALL
        .iter()
        .map(|&class| {
            let (c, w, u, n) = tally(rows().filter(|r| r.class == class));
            ClassTally {
                class,
                total: n,
                correct: c,
                wrong: w,
                unknown: u,
                accuracy: ratio(c, n),
            }
        })
        .collect();
    let n_positions = included.iter().map(|r| r.trials.len()).max().unwrap_or(TRIALS_PER_SESSION);
    let per_trial_index = (0..n_positions)
        .map(|i| {
            let (c, w, u, n) = tally(rows().filter(|r| r.trial_idx == i));
            IndexTally {
                trial_idx: i,
                correct: c,
                wrong: w,
                unknown: u,
                accuracy: ratio(c, n),
            }
        })
        .collect();

    let duration = |r: &TrialRow| r.reach_duration;
    let speed = |r: &TrialRow| r.reach_median_speed;
    let class_means = CarefulnessClass::ALL
        .iter()
        .map(|&class| {
            let grand = |field: fn(&TrialRow) -> Option<f64>| {
                let means: Vec<f64> = reports.iter().filter_map(|r| class_mean(r, class, field)).collect();
                order_free_mean(&means)
            };
            ClassMeans {
                class,
                reach_duration: grand(duration),
                reach_median_speed: grand(speed),
            }
        })
        .collect();

    let differences = |field: fn(&TrialRow) -> Option<f64>| -> Vec<f64> {
        reports
            .iter()
            .filter_map(|r| {
                Some(class_mean(r, CarefulnessClass::Careful, field)? - class_mean(r, CarefulnessClass::NotCareful, field)?)
            })
            .collect()
    };
    let (d_dur, d_speed) = (differences(duration), differences(speed));
    if d_dur.len() < reports.len() {
        notes.push(format!(
            "{} session(s) lack reach measurements for one class and are left out of the paired effects",
            reports.len() - d_dur.len()
        ));
    }
    let effects = Effects {
        reach_duration: paired_effect(&d_dur)?,
        reach_median_speed: paired_effect(&d_speed)?,
    };
    for (name, e) in [("reach_duration", &effects.reach_duration), ("reach_median_speed", &effects.reach_median_speed)] {
        if e.degenerate {
            notes.push(format!("{name}: zero spread across participants, t is a sentinel"));
        }
    }

    Ok(StudyReport {
        version: SCHEMA_VERSION.to_string(),
        n_participants: reports.len(),
        total_trials: total,
        correct,
        wrong,
        unknown,
        accuracy: ratio(correct, total),
        accuracy_percent: percent(correct, total),
        per_class,
        per_trial_index,
        class_means,
        effects,
        excluded_sessions: excluded,
        notes,
    })
}

impl StudyReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_to_two_decimals() {
        assert_eq!(percent(189, 240), "78.75%");
        assert_eq!(percent(1, 3), "33.33%");
        assert_eq!(percent(2, 3), "66.67%");
        assert_eq!(percent(240, 240), "100.00%");
        assert_eq!(percent(0, 240), "0.00%");
    }
}
