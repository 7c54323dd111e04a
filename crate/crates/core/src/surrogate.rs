//! Synthetic stand-in for motion-capture transport profiles.
//!
//! Each profile is a skewed bell `tau^p (1 - tau)^q`, scaled to a peak
//! speed `A` and stretched over a duration `T`, plus low-pass noise. The
//! per-class parameter ranges make careful transports slower, longer and
//! more decelerating than not-careful ones.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{CarefulnessClass, VelocityProfile};
use crate::rng::{self, Rng};
use crate::TICK_RATE_HZ;

const NOISE_WINDOW: usize = 5;
const MAX_REDRAWS: usize = 10;
pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    fn sample(&self, rng: &mut Rng) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo > 0.0 && self.hi >= self.lo) {
            return Err(Error::InvalidArgument(format!(
                "{name} must be a positive non-empty range, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// Shape family of one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassFamily {
    pub duration_range: Range,
    pub peak_range: Range,
    pub rise_exponent_range: Range,
    pub fall_exponent_range: Range,
    pub noise_sigma_rel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileFamilyParams {
    pub careful: ClassFamily,
    pub not_careful: ClassFamily,
}

impl Default for ProfileFamilyParams {
    fn default() -> Self {
        ProfileFamilyParams {
            careful: ClassFamily {
                duration_range: Range::new(1.6, 2.4),
                peak_range: Range::new(0.25, 0.45),
                rise_exponent_range: Range::new(1.5, 2.5),
                fall_exponent_range: Range::new(3.0, 5.0),
                noise_sigma_rel: 0.02,
            },
            not_careful: ClassFamily {
                duration_range: Range::new(0.9, 1.4),
                peak_range: Range::new(0.55, 0.85),
                rise_exponent_range: Range::new(1.8, 2.6),
                fall_exponent_range: Range::new(1.8, 2.6),
                noise_sigma_rel: 0.02,
            },
        }
    }
}

impl ProfileFamilyParams {
    pub fn family(&self, class: CarefulnessClass) -> &ClassFamily {
        match class {
            CarefulnessClass::Careful => &self.careful,
            CarefulnessClass::NotCareful => &self.not_careful,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, fam) in [("careful", &self.careful), ("not_careful", &self.not_careful)] {
            fam.duration_range.check(&format!("{name}.duration_range"))?;
            fam.peak_range.check(&format!("{name}.peak_range"))?;
            fam.rise_exponent_range.check(&format!("{name}.rise_exponent_range"))?;
            fam.fall_exponent_range.check(&format!("{name}.fall_exponent_range"))?;
            if !(fam.noise_sigma_rel.is_finite() && fam.noise_sigma_rel >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name}.noise_sigma_rel must be >= 0")));
            }
        }
        if self.careful.duration_range.lo <= self.not_careful.duration_range.midpoint() {
            return Err(Error::InvalidArgument(
                "careful durations must lie above the not-careful midpoint".into(),
            ));
        }
        if self.careful.peak_range.hi >= self.not_careful.peak_range.midpoint() {
            return Err(Error::InvalidArgument(
                "careful peaks must lie below the not-careful midpoint".into(),
            ));
        }
        Ok(())
    }
}

/// Drawn shape parameters of one profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub duration: f64,
    pub peak: f64,
    pub rise_exponent: f64,
    pub fall_exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledProfile {
    pub params: ShapeParams,
    pub profile: VelocityProfile,
}

/// Unit-peak bell `tau^p (1 - tau)^q / max`, peak at `tau = p / (p + q)`.
pub fn bell(tau: f64, p: f64, q: f64) -> f64 {
    let tau_star = p / (p + q);
    let max = tau_star.powf(p) * (1.0 - tau_star).powf(q);
    tau.powf(p) * (1.0 - tau).powf(q) / max
}

/// Noise-free profile sampled at the controller rate.
pub fn clean_profile(shape: &ShapeParams, class: Option<CarefulnessClass>) -> Result<VelocityProfile> {
    let n = sample_count(shape.duration);
    let speeds = (0..n)
        .map(|i| shape.peak * bell(i as f64 / (n - 1) as f64, shape.rise_exponent, shape.fall_exponent))
        .collect();
    VelocityProfile::new(1.0 / TICK_RATE_HZ, speeds, class)
}

fn sample_count(duration: f64) -> usize {
    ((duration * TICK_RATE_HZ).round() as usize + 1).max(2)
}

/// Zero-mean Gaussian noise smoothed by a moving average, with output
/// standard deviation `sigma`.
fn smooth_noise(n: usize, sigma: f64, rng: &mut Rng) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; n];
    }
    let white = Normal::new(0.0, sigma * (NOISE_WINDOW as f64).sqrt()).expect("finite sigma");
    let raw: Vec<f64> = (0..n + NOISE_WINDOW - 1).map(|_| white.sample(rng)).collect();
    raw.windows(NOISE_WINDOW)
        .map(|w| w.iter().sum::<f64>() / NOISE_WINDOW as f64)
        .collect()
}

pub fn sample_profile(class: CarefulnessClass, params: &ProfileFamilyParams, rng: &mut Rng) -> Result<SampledProfile> {
    params.validate()?;
    let fam = params.family(class);
    let shape = ShapeParams {
        duration: fam.duration_range.sample(rng),
        peak: fam.peak_range.sample(rng),
        rise_exponent: fam.rise_exponent_range.sample(rng),
        fall_exponent: fam.fall_exponent_range.sample(rng),
    };
    let clean = clean_profile(&shape, Some(class))?;
    let sigma = fam.noise_sigma_rel * shape.peak;
    for _ in 0..MAX_REDRAWS {
        let noise = smooth_noise(clean.len(), sigma, rng);
        let speeds = clean
            .speeds()
            .iter()
            .zip(noise)
            .map(|(v, e)| (v + e).max(0.0))
            .collect();
        let profile = VelocityProfile::new(clean.dt(), speeds, Some(class))?;
        if profile.check_motion().is_ok() {
            return Ok(SampledProfile { params: shape, profile });
        }
    }
    Err(Error::InvalidProfile(format!(
        "noise violated the rest-endpoint rule in {MAX_REDRAWS} redraws (sigma {sigma:.4} m/s)"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub class: CarefulnessClass,
    pub duration: f64,
    pub peak: f64,
    pub rise_exponent: f64,
    pub fall_exponent: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub n_per_class: usize,
    pub params: ProfileFamilyParams,
    pub profiles: Vec<ManifestEntry>,
}

/// Labeled surrogate profiles, `n_per_class` of each class.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub profiles: Vec<VelocityProfile>,
}

impl Dataset {
    pub fn of_class(&self, class: CarefulnessClass) -> impl Iterator<Item = &VelocityProfile> {
        self.profiles.iter().filter(move |p| p.label() == Some(class))
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Write one CSV per profile plus `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (entry, profile) in self.manifest.profiles.iter().zip(&self.profiles) {
            profile.write_csv(&dir.join(&entry.file))?;
        }
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.manifest_json()?).map_err(|e| Error::io(&path, e))
    }

    pub fn manifest_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.manifest)? + "\n")
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Parse {
                path,
                message: format!("unsupported manifest version {}", manifest.version),
            });
        }
        let profiles = manifest
            .profiles
            .iter()
            .map(|entry| {
                let file: PathBuf = dir.join(&entry.file);
                Ok(VelocityProfile::read_csv(&file)?.with_label(Some(entry.class)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { manifest, profiles })
    }
}

pub fn build_dataset(n_per_class: usize, params: &ProfileFamilyParams, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::InvalidArgument("n_per_class must be >= 1".into()));
    }
    params.validate()?;
    let mut entries = Vec::with_capacity(2 * n_per_class);
    let mut profiles = Vec::with_capacity(2 * n_per_class);
    for class in CarefulnessClass::ALL {
        for i in 0..n_per_class {
            let profile_seed = rng::derive_seed(seed, class.code(), i as u64);
            let sampled = sample_profile(class, params, &mut rng::rng(profile_seed))?;
            entries.push(ManifestEntry {
                file: format!("s{:04}_{}.csv", entries.len(), class.code()),
                class,
                duration: sampled.params.duration,
                peak: sampled.params.peak,
                rise_exponent: sampled.params.rise_exponent,
                fall_exponent: sampled.params.fall_exponent,
                seed: profile_seed,
            });
            profiles.push(sampled.profile);
        }
    }
    Ok(Dataset {
        manifest: Manifest {
            version: MANIFEST_VERSION,
            seed,
            n_per_class,
            params: *params,
            profiles: entries,
        },
        profiles,
    })
}
