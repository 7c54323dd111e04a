use carefulbot::geom::Vec3;
use carefulbot::kinematics::VelocityProfile;
use carefulbot::robot::{run_trial, Phase, SimConfig, StaticWrist, Observation, TransportMode, WristSource, TrialMeta, TrialTrace};
use carefulbot::surrogate::bell;
use proptest::prelude::*;

fn meta() -> TrialMeta {
    TrialMeta {
        trial: 0,
        profile_id: "p".into(),
        class: None,
    }
}

fn bell_profile(n: usize, peak: f64, p: f64, q: f64) -> VelocityProfile {
    let speeds = (0..n).map(|i| peak * bell(i as f64 / (n - 1) as f64, p, q)).collect();
    VelocityProfile::new(0.025, speeds, None).unwrap()
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (-1.0f64..1.0, -1.0f64..1.0, 0.0f64..0.5).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn geometry() -> impl Strategy<Value = SimConfig> {
    (vec3(), vec3(), vec3()).prop_filter_map("short path", |(pick, grasp, handover)| {
        (grasp.distance(handover) > 0.1).then(|| SimConfig {
            pick_pose: pick,
            grasp_pose: grasp,
            handover_point: handover,
            ..SimConfig::default()
        })
    })
}

fn transport(trace: &TrialTrace) -> impl Iterator<Item = &carefulbot::robot::TickRecord> {
    trace.ticks.iter().filter(|r| r.phase == Phase::Transport)
}

/// Monotone straight approach at 0.1 m/s, starting once the robot waits.
struct Approach {
    from: Vec3,
    to: Vec3,
    start: Option<usize>,
}

impl WristSource for Approach {
    fn wrist(&mut self, obs: &Observation<'_>) -> Option<Vec3> {
        if obs.phase == Phase::HandoverWait && self.start.is_none() {
            self.start = Some(obs.tick);
        }
        let k = obs.tick - self.start.unwrap_or(obs.tick);
        let s = (0.1 * k as f64 / 40.0 / self.from.distance(self.to)).min(1.0);
        Some(self.from.lerp(self.to, s))
    }

    fn finished(&self, obs: &Observation<'_>) -> bool {
        obs.release_time.is_some()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transport_is_straight_and_decomposed(
        config in geometry(),
        n in 30usize..100,
        peak in 0.2f64..1.2,
        p in 1.5f64..3.0,
        q in 1.5f64..5.0,
    ) {
        let profile = bell_profile(n, peak, p, q);
        let trace = run_trial(&profile, &mut StaticWrist(config.handover_point), &config, meta()).unwrap();
        let axis = config.handover_point - config.grasp_pose;
        let played = carefulbot::robot::executed_profile(&profile, &config).unwrap();
        let t0 = trace.phase_start(Phase::Transport).unwrap();
        for r in transport(&trace) {
            let off = (r.ee - config.grasp_pose).cross(axis).norm() / axis.norm();
            prop_assert!(off < 1e-9, "off-line by {off}");
            if !r.snap {
                let want = played.speed_at(r.t - t0).unwrap();
                prop_assert!((r.v.norm() - want).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn trapezoidal_speed_matches_distance_travelled(config in geometry(), n in 30usize..100, peak in 0.2f64..1.2) {
        let profile = bell_profile(n, peak, 2.0, 3.0);
        let trace = run_trial(&profile, &mut StaticWrist(config.handover_point), &config, meta()).unwrap();
        let ticks: Vec<_> = transport(&trace).collect();
        // The speed held over the last tick of transport lands at the next
        // position, so the segment is closed with that rest sample.
        let mut speeds: Vec<f64> = ticks.iter().map(|r| r.v.norm()).collect();
        let rects: f64 = speeds.iter().sum::<f64>() * config.dt();
        speeds.push(0.0);
        let end = trace.ticks[trace.ticks.iter().position(|r| r.phase == Phase::HandoverWait).unwrap()].ee;
        let chord = end.distance(ticks[0].ee);
        prop_assert!((rects - chord).abs() < 1e-6, "{rects} vs {chord}");
        let trapezoid = carefulbot::kinematics::trapezoid(&speeds, config.dt());
        prop_assert!((trapezoid - chord).abs() <= speeds[0] * config.dt() / 2.0 + 1e-6);
    }

    #[test]
    fn phases_follow_the_chain_and_release_once(config in geometry(), approach in 0.1f64..0.5) {
        // Long picks at 0.1 m/s plus the approach can exceed the default timeout.
        let config = SimConfig { timeout: 120.0, ..config };
        let profile = bell_profile(60, 0.6, 2.0, 2.0);
        let mut wrist = Approach { from: config.handover_point + Vec3::new(approach, 0.0, 0.0), to: config.handover_point, start: None };
        let trace = run_trial(&profile, &mut wrist, &config, meta()).unwrap();
        prop_assert!(trace.aborted.is_none(), "{:?}", trace.aborted);
        let chain = trace.phase_chain();
        prop_assert!(chain.len() >= 5 && chain[..] == Phase::ORDER[..chain.len()], "{chain:?}");
        let releases = trace.ticks.windows(2).filter(|w| w[0].phase == Phase::HandoverWait && w[1].phase == Phase::Released).count();
        prop_assert_eq!(releases, 1);
    }
}

#[test]
fn as_is_stops_short_by_the_missing_distance() {
    let config = SimConfig {
        transport_mode: TransportMode::AsIs,
        ..SimConfig::default()
    };
    let profile = bell_profile(40, 0.5, 2.0, 2.0);
    let trace = run_trial(&profile, &mut StaticWrist(config.handover_point), &config, meta()).unwrap();
    let wait = trace.ticks.iter().find(|r| r.phase == Phase::HandoverWait).unwrap();
    let shortfall = wait.ee.distance(config.handover_point);
    let expected = config.path_length() - profile.integrate_distance();
    assert!(shortfall > config.arrival_epsilon);
    assert!((shortfall - expected).abs() <= 2.0 / config.tick_rate * profile.peak());
}

#[test]
fn zero_profile_waits_at_the_grasp_pose() {
    let config = SimConfig::default();
    let profile = VelocityProfile::new(0.025, vec![0.0; 20], None).unwrap();
    let trace = run_trial(&profile, &mut StaticWrist(config.handover_point), &config, meta()).unwrap();
    let wait = trace.ticks.iter().find(|r| r.phase == Phase::HandoverWait).unwrap();
    assert_eq!(wait.ee, config.grasp_pose);
    assert_eq!(transport(&trace).count(), 20);
}
