//! Per-class TimeGAN over normalized speed shapes.
//!
//! A training profile is factored into a fixed-length *shape* (resampled
//! to `seq_len` points and divided by its peak) and a *tempo*: duration
//! and peak speed. The recurrent GAN learns the shape distribution; a
//! Gaussian static head over normalized tempo supplies `(T, A)` at
//! sampling time. Playback stretches the shape over `T` at 40 Hz and
//! scales it by `A`.

mod adam;
mod gradcheck;
pub mod gru;
mod io;
mod sample;
pub mod timegan;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{CarefulnessClass, VelocityProfile, REST_FRACTION};
use timegan::{LossWeights, Networks};

pub use adam::Adam;
pub use gradcheck::{gradient_check, GradCheckReport, LossCheck, GRADCHECK_TOLERANCE};
pub use io::{load, save, MODEL_FORMAT_VERSION};
pub use sample::{novelty_distances, sample, sample_shapes};
pub use train::{train, write_loss_curve};

/// Smallest class dataset accepted by [`train`].
pub const MIN_TRAINING_EXAMPLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSteps {
    pub embed: usize,
    pub supervise: usize,
    pub joint: usize,
}

impl PhaseSteps {
    pub fn total(&self) -> usize {
        self.embed + self.supervise + self.joint
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanConfig {
    pub seq_len: usize,
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub phase_steps: PhaseSteps,
    pub weights: LossWeights,
    /// Loss curve sampling interval in steps.
    pub log_every: usize,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            seq_len: 64,
            latent_dim: 8,
            hidden_dim: 24,
            batch_size: 32,
            learning_rate: 1e-3,
            phase_steps: PhaseSteps {
                embed: 2000,
                supervise: 2000,
                joint: 4000,
            },
            weights: LossWeights::default(),
            log_every: 10,
            seed: 0,
        }
    }
}

impl GanConfig {
    /// The small configuration used for finite-difference checks.
    pub fn tiny() -> Self {
        GanConfig {
            seq_len: 16,
            latent_dim: 3,
            hidden_dim: 4,
            batch_size: 3,
            ..GanConfig::default()
        }
    }

    /// A random configuration within the bounds of [`gradient_check`].
    pub fn random_small(seed: u64) -> Self {
        let mut r = crate::rng::substream(seed, "small-config", 0);
        GanConfig {
            seq_len: r.random_range(16..=24),
            latent_dim: r.random_range(1..=4),
            hidden_dim: r.random_range(2..=6),
            batch_size: r.random_range(1..=4),
            ..GanConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("latent_dim", self.latent_dim),
            ("hidden_dim", self.hidden_dim),
            ("batch_size", self.batch_size),
            ("log_every", self.log_every),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be positive")));
        }
        if self.seq_len < 16 {
            return Err(Error::InvalidArgument(format!("seq_len must be >= 16, got {}", self.seq_len)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// One normalized training sequence with its static tempo features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    /// `seq_len` speeds divided by their maximum.
    pub shape: Vec<f64>,
    pub duration: f64,
    pub peak: f64,
}

impl TrainingExample {
    pub fn from_profile(profile: &VelocityProfile, seq_len: usize) -> Result<Self> {
        let resampled = profile.resample(seq_len)?;
        let max = resampled.peak();
        if max <= 0.0 {
            return Err(Error::InvalidProfile("cannot normalize an all-zero profile".into()));
        }
        let shape: Vec<f64> = resampled.speeds().iter().map(|v| v / max).collect();
        let (first, last) = (shape[0], shape[shape.len() - 1]);
        if first > REST_FRACTION || last > REST_FRACTION {
            return Err(Error::InvalidProfile(format!(
                "normalized shape endpoints {first:.4}/{last:.4} are not at rest"
            )));
        }
        Ok(TrainingExample {
            shape,
            duration: profile.duration(),
            peak: profile.peak(),
        })
    }
}

/// Min/max of a feature over the training data, widened if degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            min = min.min(v);
            max = max.max(v);
        }
        if max - min <= 1e-9 * min.abs().max(1.0) {
            // All values equal: keep the range strictly ordered.
            max = min + 1e-6 * min.abs().max(1.0);
        }
        MinMax { min, max }
    }

    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    pub fn denormalize(&self, u: f64) -> f64 {
        self.min + u * (self.max - self.min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub shape: MinMax,
    pub duration: MinMax,
    pub peak: MinMax,
}

/// Bivariate Gaussian over normalized `(duration, peak)`, stored as mean
/// and lower Cholesky factor `[l11, l21, l22]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticHead {
    pub mean: [f64; 2],
    pub cholesky: [f64; 3],
}

impl StaticHead {
    pub fn fit(points: &[[f64; 2]]) -> Self {
        let n = points.len() as f64;
        let mut mean = [0.0; 2];
        for p in points {
            mean[0] += p[0] / n;
            mean[1] += p[1] / n;
        }
        let (mut s00, mut s01, mut s11) = (0.0, 0.0, 0.0);
        for p in points {
            let (a, b) = (p[0] - mean[0], p[1] - mean[1]);
            s00 += a * a / n;
            s01 += a * b / n;
            s11 += b * b / n;
        }
        let l11 = s00.max(0.0).sqrt();
        let l21 = if l11 > 0.0 { s01 / l11 } else { 0.0 };
        let l22 = (s11 - l21 * l21).max(0.0).sqrt();
        StaticHead {
            mean,
            cholesky: [l11, l21, l22],
        }
    }

    /// Map standard normal draws to normalized tempo, clamped to the
    /// training range.
    pub fn transform(&self, e0: f64, e1: f64) -> [f64; 2] {
        let [l11, l21, l22] = self.cholesky;
        [
            (self.mean[0] + l11 * e0).clamp(0.0, 1.0),
            (self.mean[1] + l21 * e0 + l22 * e1).clamp(0.0, 1.0),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Embed,
    Supervise,
    Joint,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Embed => "embed",
            Phase::Supervise => "supervise",
            Phase::Joint => "joint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub phase: Phase,
    pub loss: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanModel {
    pub class: CarefulnessClass,
    pub config: GanConfig,
    pub stats: NormStats,
    pub static_head: StaticHead,
    pub nets: Networks,
    pub trained_steps: usize,
    pub loss_curve: Vec<LossRecord>,
}

impl GanModel {
    /// Fresh, untrained model; refuses to sample until trained.
    pub fn untrained(class: CarefulnessClass, config: GanConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = crate::rng::rng(config.seed);
        let nets = Networks::new(config.latent_dim, config.hidden_dim, &mut rng);
        let unit = MinMax { min: 0.0, max: 1.0 };
        Ok(GanModel {
            class,
            config,
            stats: NormStats {
                shape: unit,
                duration: unit,
                peak: unit,
            },
            static_head: StaticHead {
                mean: [0.5, 0.5],
                cholesky: [0.0; 3],
            },
            nets,
            trained_steps: 0,
            loss_curve: Vec::new(),
        })
    }

    /// Last logged value of a named loss.
    pub fn final_loss(&self, name: &str) -> Option<f64> {
        self.loss_curve.iter().rev().find(|r| r.loss == name).map(|r| r.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(GanConfig::default().validate().is_ok());
        assert!(GanConfig::tiny().validate().is_ok());
        let c = GanConfig {
            seq_len: 15,
            ..GanConfig::default()
        };
        assert!(c.validate().is_err());
        let c = GanConfig {
            hidden_dim: 0,
            ..GanConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn degenerate_minmax_stays_ordered() {
        let m = MinMax::fit([0.7, 0.7, 0.7]);
        assert!(m.min < m.max);
        assert_eq!(m.normalize(0.7), 0.0);
    }

    #[test]
    fn static_head_recovers_moments() {
        let pts: Vec<[f64; 2]> = (0..100).map(|i| [i as f64 / 99.0, 0.5]).collect();
        let head = StaticHead::fit(&pts);
        assert!((head.mean[0] - 0.5).abs() < 1e-12);
        assert!(head.cholesky[2].abs() < 1e-12);
        let t = head.transform(0.0, 3.0);
        assert!((t[0] - 0.5).abs() < 1e-12 && (t[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn example_normalization() {
        let p = VelocityProfile::new(0.025, vec![0.0, 0.1, 0.3, 0.4, 0.3, 0.2, 0.1, 0.0], None).unwrap();
        let ex = TrainingExample::from_profile(&p, 16).unwrap();
        assert_eq!(ex.shape.len(), 16);
        let max = ex.shape.iter().copied().fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-6);
        assert!((ex.peak - 0.4).abs() < 1e-15);
    }
}
