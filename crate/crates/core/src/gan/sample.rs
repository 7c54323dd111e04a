use rand_distr::{Distribution, StandardNormal};

use super::GanModel;
use crate::error::{Error, Result};
use crate::kinematics::{VelocityProfile, REST_FRACTION};
use crate::rng::{self, Rng};
use crate::TICK_RATE_HZ;

const MAX_ATTEMPTS: usize = 10;

struct Draw {
    shape: Vec<f64>,
    profile: VelocityProfile,
}

fn draw_one(model: &GanModel, rng: &mut Rng) -> Result<Draw> {
    let seq_len = model.config.seq_len;
    let mut last_err = None;
    for _ in 0..MAX_ATTEMPTS {
        let z = model.nets.draw_noise(1, seq_len, rng);
        let raw = model.nets.synthesize(&z).remove(0);
        let e0: f64 = StandardNormal.sample(rng);
        let e1: f64 = StandardNormal.sample(rng);

        let denorm: Vec<f64> = raw.iter().map(|&u| model.stats.shape.denormalize(u).max(0.0)).collect();
        let max = denorm.iter().copied().fold(0.0, f64::max);
        if !(max.is_finite() && max > 0.0) {
            last_err = Some("generated an all-zero shape".to_string());
            continue;
        }
        let shape: Vec<f64> = denorm.iter().map(|v| v / max).collect();
        if shape[0] > REST_FRACTION || shape[seq_len - 1] > REST_FRACTION {
            last_err = Some(format!(
                "generated shape endpoints {:.3}/{:.3} not at rest",
                shape[0],
                shape[seq_len - 1]
            ));
            continue;
        }

        let [u_dur, u_peak] = model.static_head.transform(e0, e1);
        let duration = model.stats.duration.denormalize(u_dur);
        let peak = model.stats.peak.denormalize(u_peak);
        let n = ((duration * TICK_RATE_HZ).round() as usize + 1).max(crate::kinematics::MIN_MOTION_SAMPLES);
        let stretched = VelocityProfile::new(1.0, shape.clone(), None)?.resample(n)?;
        let speeds: Vec<f64> = stretched.speeds().iter().map(|v| v * peak).collect();
        let profile = VelocityProfile::new(1.0 / TICK_RATE_HZ, speeds, Some(model.class))?;
        match profile.check_motion() {
            Ok(()) => return Ok(Draw { shape, profile }),
            Err(e) => last_err = Some(e.to_string()),
        }
    }
    Err(Error::InvalidProfile(format!(
        "no valid sample in {MAX_ATTEMPTS} attempts: {}",
        last_err.unwrap_or_default()
    )))
}

fn draws(model: &GanModel, n: usize, seed: u64) -> Result<Vec<Draw>> {
    if model.trained_steps == 0 {
        return Err(Error::Untrained);
    }
    let mut rng = rng::substream(seed, "gan-sample", 0);
    (0..n).map(|_| draw_one(model, &mut rng)).collect()
}

/// Draw `n` novel 40 Hz profiles labeled with the model's class.
pub fn sample(model: &GanModel, n: usize, seed: u64) -> Result<Vec<VelocityProfile>> {
    Ok(draws(model, n, seed)?.into_iter().map(|d| d.profile).collect())
}

/// The normalized (unit-peak, `seq_len`) shapes behind [`sample`] for the
/// same seed.
pub fn sample_shapes(model: &GanModel, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    Ok(draws(model, n, seed)?.into_iter().map(|d| d.shape).collect())
}

/// For each sample, the max-abs distance to its nearest training shape.
pub fn novelty_distances(samples: &[Vec<f64>], training: &[Vec<f64>]) -> Vec<f64> {
    samples
        .iter()
        .map(|s| {
            training
                .iter()
                .map(|t| s.iter().zip(t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}
