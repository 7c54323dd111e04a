//! Scripted participant: perceives the transport, reaches for the cup with
//! optional motor contagion, and sorts it.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierModel;
use crate::error::{Error, Result};
use crate::gan::gru::sigmoid;
use crate::geom::Vec3;
use crate::kinematics::{CarefulnessClass, VelocityProfile};
use crate::robot::{Observation, Phase, SimConfig, WristSource};
use crate::rng::Rng;

/// Peak of the minimum-jerk speed profile in units of `distance / duration`.
pub const MIN_JERK_PEAK_FACTOR: f64 = 1.875;

/// Median of the minimum-jerk speed over samples above 5% of peak, as a
/// fraction of the peak (continuous limit).
pub const MIN_JERK_MEDIAN_RATIO: f64 = 0.649_47;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParticipantParams {
    pub reaction_delay: f64,
    pub base_reach_duration: f64,
    /// Added to the reach duration when the transport is perceived careful.
    pub contagion_duration_gain: f64,
    /// Median-speed drop the default reach distance is calibrated to.
    pub contagion_speed_drop: f64,
    /// Standard deviation of the logistic noise added to the posterior logit.
    pub perception_noise: f64,
    pub unknown_margin: f64,
    pub rest_pos: Vec3,
    /// Standard deviation of per-trial reach-duration jitter, s.
    pub motor_noise: f64,
    /// How long the participant holds the cup after the reach before sorting.
    pub linger: f64,
    pub seed: u64,
}

impl Default for ParticipantParams {
    fn default() -> Self {
        let (base, gain, drop) = (1.2, 0.443, 0.055);
        let distance = calibrated_reach_distance(base, gain, drop);
        ParticipantParams {
            reaction_delay: 0.3,
            base_reach_duration: base,
            contagion_duration_gain: gain,
            contagion_speed_drop: drop,
            perception_noise: 0.0,
            unknown_margin: 0.05,
            rest_pos: SimConfig::default().handover_point + Vec3::new(distance, 0.0, 0.0),
            motor_noise: 0.02,
            linger: 0.25,
            seed: 0,
        }
    }
}

/// Reach distance at which a duration gain `gain` on a `base` reach lowers the
/// min-jerk median speed by `drop`.
pub fn calibrated_reach_distance(base: f64, gain: f64, drop: f64) -> f64 {
    let k = MIN_JERK_MEDIAN_RATIO * MIN_JERK_PEAK_FACTOR;
    drop * base * (base + gain) / (k * gain)
}

impl ParticipantParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("reaction_delay", self.reaction_delay),
            ("base_reach_duration", self.base_reach_duration),
            ("linger", self.linger),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
        let non_negative = [
            ("contagion_duration_gain", self.contagion_duration_gain),
            ("perception_noise", self.perception_noise),
            ("motor_noise", self.motor_noise),
        ];
        if let Some((name, v)) = non_negative.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
        }
        if !(0.0..0.5).contains(&self.unknown_margin) {
            return Err(Error::InvalidArgument(format!(
                "unknown_margin must be in [0, 0.5), got {}",
                self.unknown_margin
            )));
        }
        if !self.rest_pos.is_finite() {
            return Err(Error::InvalidArgument("rest_pos must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Zone {
    Serve,
    Wash,
    Unknown,
}

impl Zone {
    /// The correct zone for a class: careful cups are served.
    pub fn for_class(class: CarefulnessClass) -> Zone {
        match class {
            CarefulnessClass::Careful => Zone::Serve,
            CarefulnessClass::NotCareful => Zone::Wash,
        }
    }

    pub fn perceived(self) -> Option<CarefulnessClass> {
        match self {
            Zone::Serve => Some(CarefulnessClass::Careful),
            Zone::Wash => Some(CarefulnessClass::NotCareful),
            Zone::Unknown => None,
        }
    }
}

impl std::str::FromStr for Zone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "serve" => Ok(Zone::Serve),
            "wash" => Ok(Zone::Wash),
            "unknown" => Ok(Zone::Unknown),
            _ => Err(Error::InvalidArgument(format!("unknown zone {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SortDecision {
    pub zone: Zone,
    pub trial_idx: usize,
    pub perceived: Option<CarefulnessClass>,
}

/// Posterior that the observed transport was careful.
pub fn perceive(observed: &VelocityProfile, classifier: &ClassifierModel, params: &ParticipantParams, rng: &mut Rng) -> Result<f64> {
    let p = classifier.predict_proba(&observed.extract_features())?;
    if params.perception_noise == 0.0 {
        return Ok(p);
    }
    // Logistic noise with scale s has standard deviation s * pi / sqrt(3).
    let scale = params.perception_noise * 3f64.sqrt() / std::f64::consts::PI;
    let u: f64 = rng.random_range(f64::EPSILON..1.0 - f64::EPSILON);
    let q = p.clamp(1e-12, 1.0 - 1e-12);
    let logit = (q / (1.0 - q)).ln() + scale * (u / (1.0 - u)).ln();
    Ok(sigmoid(logit).clamp(0.0, 1.0))
}

pub fn decide(posterior: f64, trial_idx: usize, params: &ParticipantParams) -> SortDecision {
    let zone = if posterior > 0.5 + params.unknown_margin {
        Zone::Serve
    } else if posterior < 0.5 - params.unknown_margin {
        Zone::Wash
    } else {
        Zone::Unknown
    };
    SortDecision {
        zone,
        trial_idx,
        perceived: zone.perceived(),
    }
}

/// A minimum-jerk point-to-point wrist movement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachPlan {
    pub start_time: f64,
    pub duration: f64,
    pub from: Vec3,
    pub to: Vec3,
}

impl ReachPlan {
    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration
    }

    pub fn distance(&self) -> f64 {
        self.from.distance(self.to)
    }

    pub fn peak_speed(&self) -> f64 {
        MIN_JERK_PEAK_FACTOR * self.distance() / self.duration
    }

    fn phase(&self, t: f64) -> f64 {
        ((t - self.start_time) / self.duration).clamp(0.0, 1.0)
    }

    pub fn position_at(&self, t: f64) -> Vec3 {
        let s = self.phase(t);
        let x = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
        self.from.lerp(self.to, x)
    }

    pub fn speed_at(&self, t: f64) -> f64 {
        let s = self.phase(t);
        self.distance() * 30.0 * s * s * (1.0 - s) * (1.0 - s) / self.duration
    }

    /// Positions at `tick_rate` from the start of the reach to its end.
    pub fn ticks(&self, tick_rate: f64) -> Vec<(f64, Vec3)> {
        let n = (self.duration * tick_rate).ceil() as usize;
        (0..=n)
            .map(|k| {
                let t = self.start_time + k as f64 / tick_rate;
                (t, self.position_at(t))
            })
            .collect()
    }
}

/// Plan the reach toward the gripper once the cup is ready to be taken.
pub fn plan_reach(release_ready_time: f64, gripper_pos: Vec3, perceived_careful: bool, params: &ParticipantParams) -> ReachPlan {
    let gain = if perceived_careful { params.contagion_duration_gain } else { 0.0 };
    ReachPlan {
        start_time: release_ready_time + params.reaction_delay,
        duration: params.base_reach_duration + gain,
        from: params.rest_pos,
        to: gripper_pos,
    }
}

/// The participant during one trial, driving the wrist from the robot's
/// observable state.
pub struct TrialParticipant<'a> {
    params: ParticipantParams,
    classifier: &'a ClassifierModel,
    rng: Rng,
    trial_idx: usize,
    dt: f64,
    plan: Option<ReachPlan>,
    decision: Option<SortDecision>,
    posterior: Option<f64>,
    error: Option<Error>,
}

/// What the participant did in a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialBehavior {
    pub decision: SortDecision,
    pub posterior: Option<f64>,
    pub plan: Option<ReachPlan>,
}

impl<'a> TrialParticipant<'a> {
    /// `rng` drives this trial's perception noise and motor jitter.
    pub fn new(params: &ParticipantParams, classifier: &'a ClassifierModel, trial_idx: usize, tick_rate: f64, mut rng: Rng) -> Result<Self> {
        params.validate()?;
        let mut params = params.clone();
        if params.motor_noise > 0.0 {
            let jitter = Normal::new(0.0, params.motor_noise).expect("validated sd").sample(&mut rng);
            // Keep the reach strictly positive under large jitter.
            params.base_reach_duration = (params.base_reach_duration + jitter).max(0.2 * params.base_reach_duration);
        }
        Ok(TrialParticipant {
            params,
            classifier,
            rng,
            trial_idx,
            dt: 1.0 / tick_rate,
            plan: None,
            decision: None,
            posterior: None,
            error: None,
        })
    }

    fn react(&mut self, obs: &Observation<'_>) {
        let mut speeds = obs.transport_speeds.to_vec();
        speeds.push(0.0);
        let posterior = VelocityProfile::new(self.dt, speeds, None)
            .and_then(|observed| perceive(&observed, self.classifier, &self.params, &mut self.rng));
        let decision = match posterior {
            Ok(p) => {
                self.posterior = Some(p);
                decide(p, self.trial_idx, &self.params)
            }
            Err(e) => {
                self.error = Some(e);
                SortDecision {
                    zone: Zone::Unknown,
                    trial_idx: self.trial_idx,
                    perceived: None,
                }
            }
        };
        let careful = decision.perceived == Some(CarefulnessClass::Careful);
        self.plan = Some(plan_reach(obs.handover_ready.unwrap_or(obs.t), obs.ee, careful, &self.params));
        self.decision = Some(decision);
    }

    pub fn behavior(self) -> Result<TrialBehavior> {
        if let Some(e) = self.error {
            return Err(e);
        }
        Ok(TrialBehavior {
            decision: self.decision.unwrap_or(SortDecision {
                zone: Zone::Unknown,
                trial_idx: self.trial_idx,
                perceived: None,
            }),
            posterior: self.posterior,
            plan: self.plan,
        })
    }
}

impl WristSource for TrialParticipant<'_> {
    fn wrist(&mut self, obs: &Observation<'_>) -> Option<Vec3> {
        if self.plan.is_none() && obs.phase == Phase::HandoverWait {
            self.react(obs);
        }
        Some(match &self.plan {
            Some(plan) => plan.position_at(obs.t),
            None => self.params.rest_pos,
        })
    }

    fn finished(&self, obs: &Observation<'_>) -> bool {
        self.plan.is_some_and(|p| obs.t >= p.end_time() + self.params.linger)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_jerk_peak_closed_form() {
        let params = ParticipantParams {
            base_reach_duration: 0.9,
            rest_pos: Vec3::ZERO,
            ..ParticipantParams::default()
        };
        let plan = plan_reach(0.0, Vec3::new(0.3, 0.0, 0.0), false, &params);
        assert!((plan.peak_speed() - 0.625).abs() < 1e-12);
        let mid = plan.start_time + plan.duration / 2.0;
        assert!((plan.speed_at(mid) - 0.625).abs() < 1e-12);
    }

    #[test]
    fn reach_is_symmetric_and_starts_and_ends_at_rest() {
        let plan = plan_reach(0.5, Vec3::new(0.6, 0.25, 0.1), true, &ParticipantParams::default());
        let (t0, t1) = (plan.start_time, plan.end_time());
        assert!(plan.speed_at(t0).abs() < 1e-9 && plan.speed_at(t1).abs() < 1e-9);
        for k in 0..=50 {
            let u = k as f64 / 100.0 * plan.duration;
            assert!((plan.speed_at(t0 + u) - plan.speed_at(t1 - u)).abs() < 1e-6);
        }
        assert_eq!(plan.position_at(t1), plan.to);
    }

    #[test]
    fn contagion_adds_exactly_the_gain() {
        let params = ParticipantParams::default();
        let g = Vec3::new(0.6, 0.25, 0.1);
        let c = plan_reach(1.0, g, true, &params);
        let nc = plan_reach(1.0, g, false, &params);
        assert!((c.duration - nc.duration - 0.443).abs() < 1e-12);
        let zero = ParticipantParams {
            contagion_duration_gain: 0.0,
            ..params
        };
        assert_eq!(plan_reach(1.0, g, true, &zero), plan_reach(1.0, g, false, &zero));
    }

    #[test]
    fn zero_distance_reach_is_stationary() {
        let params = ParticipantParams::default();
        let plan = plan_reach(0.0, params.rest_pos, false, &params);
        assert!(plan.ticks(40.0).iter().all(|(_, p)| *p == params.rest_pos));
        assert_eq!(plan.peak_speed(), 0.0);
    }

    #[test]
    fn decision_margin() {
        let p = ParticipantParams::default();
        assert_eq!(decide(0.9, 0, &p).zone, Zone::Serve);
        assert_eq!(decide(0.52, 0, &p).zone, Zone::Unknown);
        assert_eq!(decide(0.1, 0, &p).zone, Zone::Wash);
        assert_eq!(decide(0.52, 0, &p).perceived, None);
    }

    #[test]
    fn median_ratio_matches_numeric_integration() {
        // Fine grid over the normalized min-jerk speed 16 s^2 (1 - s)^2.
        let n = 200_001;
        let mut above: Vec<f64> = (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                16.0 * s * s * (1.0 - s) * (1.0 - s)
            })
            .filter(|&v| v > 0.05)
            .collect();
        above.sort_by(f64::total_cmp);
        let median = above[above.len() / 2];
        assert!((median - MIN_JERK_MEDIAN_RATIO).abs() < 1e-4, "{median}");
    }
}
