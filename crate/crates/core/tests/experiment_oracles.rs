use carefulbot::experiment::stats::{regularized_incomplete_beta, t_cdf, t_two_sided_p};
use carefulbot::experiment::{
    analyze, make_schedule, perception_classifier, run_session, run_study, DeploymentSet, SessionInputs, SessionMode,
    SessionReport, StudyConfig, TrialRow,
};
use carefulbot::human::{ParticipantParams, Zone};
use carefulbot::kinematics::CarefulnessClass;
use carefulbot::surrogate::ProfileFamilyParams;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::beta::beta_reg;

#[test]
fn t_distribution_matches_statrs() {
    for df in [1.0, 2.0, 5.0, 11.0, 30.0, 200.0] {
        let reference = StudentsT::new(0.0, 1.0, df).unwrap();
        for i in -40..=40 {
            let t = i as f64 * 0.25;
            let (ours, theirs) = (t_cdf(t, df), reference.cdf(t));
            assert!((ours - theirs).abs() < 1e-10, "df={df} t={t}: {ours} vs {theirs}");
            let p = 2.0 * reference.cdf(-t.abs());
            assert!((t_two_sided_p(t, df) - p).abs() < 1e-10);
        }
    }
    for (a, b) in [(0.5, 0.5), (2.0, 3.0), (5.5, 0.5), (10.0, 10.0)] {
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            assert!((regularized_incomplete_beta(a, b, x) - beta_reg(a, b, x)).abs() < 1e-10);
        }
    }
}

fn row(trial_idx: usize, class: CarefulnessClass, decision: Zone, duration: f64, speed: f64) -> TrialRow {
    TrialRow {
        trial_idx,
        block: trial_idx / 4,
        class,
        profile_id: format!("{}{trial_idx:02}", class.code()),
        decision,
        perceived: decision.perceived(),
        posterior: None,
        correct: (decision != Zone::Unknown).then(|| decision == Zone::for_class(class)),
        reach_duration: Some(duration),
        reach_median_speed: Some(speed),
        release_time: Some(5.0),
        aborted: None,
    }
}

/// 12 sessions of 20 trials with exactly 189 correct and no unknowns.
fn synthetic_study() -> Vec<SessionReport> {
    let mut wrong_left = 240 - 189;
    (0..12)
        .map(|p| {
            let rows = (0..20)
                .map(|i| {
                    let class = if i % 2 == 0 { CarefulnessClass::Careful } else { CarefulnessClass::NotCareful };
                    let decision = if wrong_left > 0 && (i + p) % 4 != 0 {
                        wrong_left -= 1;
                        Zone::for_class(class.other())
                    } else {
                        Zone::for_class(class)
                    };
                    row(i, class, decision, 1.0 + 0.01 * i as f64, 0.2)
                })
                .collect();
            SessionReport::from_rows(p, p as u64, SessionMode::Scripted, rows)
        })
        .collect()
}

#[test]
fn accuracy_arithmetic_and_three_way_tallies() {
    let report = analyze(&synthetic_study()).unwrap();
    assert_eq!(report.total_trials, 240);
    assert_eq!(report.correct, 189);
    assert_eq!(report.accuracy_percent, "78.75%");
    assert_eq!(format!("{:.2}", report.accuracy * 100.0), "78.75");
    assert_eq!(report.per_trial_index.len(), 20);
    for t in &report.per_trial_index {
        assert_eq!(t.correct + t.wrong + t.unknown, 12);
    }
    let per_class: usize = report.per_class.iter().map(|c| c.correct).sum();
    assert_eq!(per_class, 189);
}

#[test]
fn unknown_only_sessions_are_excluded_and_noted() {
    let mut sessions = synthetic_study();
    let rows = sessions[3].trials.iter().map(|r| row(r.trial_idx, r.class, Zone::Unknown, 1.0, 0.2)).collect();
    sessions[3] = SessionReport::from_rows(3, 3, SessionMode::Scripted, rows);
    let report = analyze(&sessions).unwrap();
    assert_eq!(report.excluded_sessions, vec![3]);
    assert_eq!(report.total_trials, 220);
    assert!(!report.notes.is_empty());
}

#[test]
fn duplicated_sessions_are_degenerate() {
    let one = synthetic_study().remove(0);
    let shifted: Vec<TrialRow> = one
        .trials
        .iter()
        .map(|r| {
            let extra = if r.class == CarefulnessClass::Careful { 0.4 } else { 0.0 };
            TrialRow {
                reach_duration: r.reach_duration.map(|d| d + extra),
                ..r.clone()
            }
        })
        .collect();
    let base = SessionReport::from_rows(0, 0, SessionMode::Scripted, shifted);
    let sessions: Vec<SessionReport> = (0..4).map(|p| SessionReport { participant: p, ..base.clone() }).collect();
    let report = analyze(&sessions).unwrap();
    let e = &report.effects.reach_duration;
    assert!(e.degenerate && e.se == 0.0 && e.t == f64::INFINITY);
    assert!(report.to_json().unwrap().contains("\"+inf\""));
}

fn random_sessions(seed: u64, participants: usize) -> Vec<SessionReport> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    use rand::Rng;
    (0..participants)
        .map(|p| {
            let rows = (0..20)
                .map(|i| {
                    let class = if i < 10 { CarefulnessClass::Careful } else { CarefulnessClass::NotCareful };
                    let decision = [Zone::Serve, Zone::Wash, Zone::Unknown][rng.random_range(0..3)];
                    row(i, class, decision, rng.random_range(0.8..2.0), rng.random_range(0.1..0.4))
                })
                .collect();
            SessionReport::from_rows(p, p as u64, SessionMode::Scripted, rows)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn analysis_ignores_participant_and_row_order(seed in any::<u64>(), n in 2usize..10) {
        let sessions = random_sessions(seed, n);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut shuffled = sessions.clone();
        shuffled.shuffle(&mut rng);
        for s in &mut shuffled {
            s.trials.shuffle(&mut rng);
        }
        prop_assert_eq!(analyze(&sessions).unwrap(), analyze(&shuffled).unwrap());
    }

    #[test]
    fn paired_estimate_is_difference_of_grand_means(seed in any::<u64>(), n in 2usize..10) {
        let report = analyze(&random_sessions(seed, n)).unwrap();
        let mean = |c: usize| report.class_means[c].reach_duration.unwrap();
        let grand = mean(0) - mean(1);
        prop_assert!((report.effects.reach_duration.estimate - grand).abs() < 1e-12);
        prop_assert_eq!(report.class_means[0].class, CarefulnessClass::Careful);
    }

    #[test]
    fn accuracy_identity(seed in any::<u64>(), n in 2usize..10) {
        let report = analyze(&random_sessions(seed, n)).unwrap();
        prop_assert_eq!(report.correct + report.wrong + report.unknown, report.total_trials);
        prop_assert_eq!(report.accuracy, report.correct as f64 / report.total_trials as f64);
    }
}

#[test]
fn scripted_session_sorts_and_reaches() {
    let config = StudyConfig::default();
    let clf = perception_classifier(&config.perception, &config.sim).unwrap();
    let set = DeploymentSet::from_surrogate(&ProfileFamilyParams::default(), 10, 3).unwrap();
    let schedule = make_schedule(&set.ids(CarefulnessClass::Careful), &set.ids(CarefulnessClass::NotCareful), 1).unwrap();
    let inputs = SessionInputs {
        schedule: &schedule,
        profiles: &set,
        sim: &config.sim,
        classifier: &clf,
    };
    let out = run_session(inputs, &ParticipantParams::default(), 0, 5).unwrap();
    assert_eq!(out.traces.len(), 20);
    for class in CarefulnessClass::ALL {
        let s = out.report.class_summary(class).unwrap();
        assert!(s.correct as f64 / s.trials as f64 >= 0.9, "{class:?}: {s:?}");
    }
    let release = |class: CarefulnessClass| {
        let r: Vec<f64> = out.report.trials.iter().filter(|t| t.class == class).filter_map(|t| t.release_time).collect();
        r.iter().sum::<f64>() / r.len() as f64
    };
    assert!(release(CarefulnessClass::Careful) > release(CarefulnessClass::NotCareful));
    let c = out.report.class_summary(CarefulnessClass::Careful).unwrap();
    let nc = out.report.class_summary(CarefulnessClass::NotCareful).unwrap();
    assert!(c.mean_reach_duration.unwrap() > nc.mean_reach_duration.unwrap());
    assert!(c.mean_reach_median_speed.unwrap() < nc.mean_reach_median_speed.unwrap());
}

#[test]
fn studies_are_deterministic() {
    let config = StudyConfig {
        participants: 3,
        seed: 7,
        ..StudyConfig::default()
    };
    let clf = perception_classifier(&config.perception, &config.sim).unwrap();
    let set = DeploymentSet::from_surrogate(&ProfileFamilyParams::default(), 10, 3).unwrap();
    let a = run_study(&config, &set, &clf).unwrap().report.to_json().unwrap();
    let b = run_study(&config, &set, &clf).unwrap().report.to_json().unwrap();
    assert_eq!(a, b);
}
