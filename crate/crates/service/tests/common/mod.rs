#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use carefulbot::experiment::{make_schedule, perception_classifier, DeploymentSet, StudyConfig};
use carefulbot::kinematics::CarefulnessClass;
use carefulbot::surrogate::ProfileFamilyParams;
use carefulbot_service::protocol::Calibration;
use carefulbot_service::{AppState, ServiceConfig, SessionStore, StudySetup};

pub fn setup(block_pause_ticks: usize) -> (StudyConfig, Arc<StudySetup>) {
    let study = StudyConfig {
        seed: 11,
        ..StudyConfig::default()
    };
    let classifier = perception_classifier(&study.perception, &study.sim).unwrap();
    let profiles = DeploymentSet::from_surrogate(&ProfileFamilyParams::default(), 10, 4).unwrap();
    let schedule = make_schedule(
        &profiles.ids(CarefulnessClass::Careful),
        &profiles.ids(CarefulnessClass::NotCareful),
        study.seed,
    )
    .unwrap();
    let h = study.sim.handover_point;
    let setup = StudySetup {
        schedule,
        profiles: Arc::new(profiles),
        sim: study.sim.clone(),
        classifier: Arc::new(classifier),
        // 1 px = 1 mm, origin at the handover point.
        calibration: Calibration {
            origin_px: [500.0, 500.0],
            origin_m: [h.x, h.y],
            meters_per_px: 0.001,
            table_height: h.z,
        },
        block_pause_ticks,
    };
    (study, Arc::new(setup))
}

pub fn app(store: &std::path::Path) -> AppState {
    let (study, setup) = setup(4);
    AppState::new(ServiceConfig {
        setup,
        study,
        store: SessionStore::new(store).unwrap(),
        tick_interval: Duration::from_millis(1),
    })
}
