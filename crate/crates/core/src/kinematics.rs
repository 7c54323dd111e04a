//! Velocity-norm profiles and the kinematic features that carry carefulness.
//!
//! A [`VelocityProfile`] is a uniformly sampled scalar speed signal. The
//! numeric operations (resampling, integration, feature extraction) accept
//! any well-formed series of at least two samples; the stricter motion
//! invariants (at least 8 samples, starting and ending near rest) are
//! checked by [`VelocityProfile::check_motion`] wherever a profile is
//! produced for the robot or read from disk.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of peak speed below which a sample counts as "at rest".
pub const REST_FRACTION: f64 = 0.05;

/// Minimum number of samples of a motion profile.
pub const MIN_MOTION_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CarefulnessClass {
    #[serde(rename = "C")]
    Careful,
    #[serde(rename = "NC")]
    NotCareful,
}

impl CarefulnessClass {
    pub const ALL: [CarefulnessClass; 2] = [CarefulnessClass::Careful, CarefulnessClass::NotCareful];

    pub fn code(self) -> &'static str {
        match self {
            CarefulnessClass::Careful => "C",
            CarefulnessClass::NotCareful => "NC",
        }
    }

    /// 1.0 for careful, 0.0 otherwise; the classifier's positive class.
    pub fn target(self) -> f64 {
        match self {
            CarefulnessClass::Careful => 1.0,
            CarefulnessClass::NotCareful => 0.0,
        }
    }

    pub fn other(self) -> Self {
        match self {
            CarefulnessClass::Careful => CarefulnessClass::NotCareful,
            CarefulnessClass::NotCareful => CarefulnessClass::Careful,
        }
    }
}

impl fmt::Display for CarefulnessClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for CarefulnessClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c" | "careful" => Ok(CarefulnessClass::Careful),
            "nc" | "not-careful" | "notcareful" | "not_careful" => Ok(CarefulnessClass::NotCareful),
            _ => Err(Error::InvalidArgument(format!("unknown class {s:?} (expected C or NC)"))),
        }
    }
}

/// Uniformly sampled speed-over-time signal, m/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityProfile {
    dt: f64,
    speeds: Vec<f64>,
    label: Option<CarefulnessClass>,
}

impl VelocityProfile {
    pub fn new(dt: f64, speeds: Vec<f64>, label: Option<CarefulnessClass>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidProfile(format!("dt must be positive, got {dt}")));
        }
        if speeds.len() < 2 {
            return Err(Error::InvalidProfile(format!(
                "need at least 2 samples, got {}",
                speeds.len()
            )));
        }
        if let Some((i, v)) = speeds.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidProfile(format!("sample {i} is {v}, speeds must be finite and >= 0")));
        }
        Ok(VelocityProfile { dt, speeds, label })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn len(&self) -> usize {
        self.speeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speeds.is_empty()
    }

    pub fn label(&self) -> Option<CarefulnessClass> {
        self.label
    }

    pub fn with_label(mut self, label: Option<CarefulnessClass>) -> Self {
        self.label = label;
        self
    }

    pub fn duration(&self) -> f64 {
        self.dt * (self.speeds.len() - 1) as f64
    }

    pub fn peak(&self) -> f64 {
        self.speeds.iter().copied().fold(0.0, f64::max)
    }

    /// Index of the first sample attaining the peak.
    pub fn peak_index(&self) -> usize {
        let peak = self.peak();
        self.speeds.iter().position(|&v| v == peak).unwrap_or(0)
    }

    /// Enforce the motion invariants: enough samples, rest at both ends.
    pub fn check_motion(&self) -> Result<()> {
        if self.speeds.len() < MIN_MOTION_SAMPLES {
            return Err(Error::InvalidProfile(format!(
                "motion profile needs at least {MIN_MOTION_SAMPLES} samples, got {}",
                self.speeds.len()
            )));
        }
        let limit = REST_FRACTION * self.peak();
        let first = self.speeds[0];
        let last = self.speeds[self.speeds.len() - 1];
        if first > limit || last > limit {
            return Err(Error::InvalidProfile(format!(
                "endpoints {first:.4}/{last:.4} m/s exceed {:.0}% of peak {:.4} m/s",
                REST_FRACTION * 100.0,
                self.peak()
            )));
        }
        Ok(())
    }

    /// Speed at time `t` by linear interpolation; `None` past the end.
    pub fn speed_at(&self, t: f64) -> Option<f64> {
        if t < 0.0 || t > self.duration() {
            return None;
        }
        let x = t / self.dt;
        let i = (x.floor() as usize).min(self.speeds.len() - 1);
        if i + 1 >= self.speeds.len() {
            return Some(self.speeds[self.speeds.len() - 1]);
        }
        let frac = x - i as f64;
        Some(self.speeds[i] + (self.speeds[i + 1] - self.speeds[i]) * frac)
    }

    /// Uniformly scale every speed by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(Error::InvalidArgument(format!("scale factor must be >= 0, got {factor}")));
        }
        Ok(VelocityProfile {
            dt: self.dt,
            speeds: self.speeds.iter().map(|v| v * factor).collect(),
            label: self.label,
        })
    }

    /// Linear resampling to `n` samples spanning the same duration.
    pub fn resample(&self, n: usize) -> Result<Self> {
        if n < MIN_MOTION_SAMPLES {
            return Err(Error::InvalidArgument(format!(
                "resample target must be >= {MIN_MOTION_SAMPLES} samples, got {n}"
            )));
        }
        Ok(VelocityProfile {
            dt: self.duration() / (n - 1) as f64,
            speeds: linear_grid(&self.speeds, n),
            label: self.label,
        })
    }

    /// Distance covered, by the trapezoidal rule.
    pub fn integrate_distance(&self) -> f64 {
        trapezoid(&self.speeds, self.dt)
    }

    pub fn extract_features(&self) -> KinematicFeatures {
        let peak = self.peak();
        let duration = self.duration();
        let gate = REST_FRACTION * peak;
        let moving: Vec<f64> = self.speeds.iter().copied().filter(|&v| v > gate).collect();
        let median_speed = median(moving).unwrap_or(0.0);
        let t_peak = self.dt * self.peak_index() as f64;
        KinematicFeatures {
            peak_speed: peak,
            duration,
            median_speed,
            decel_fraction: ((duration - t_peak) / duration).clamp(0.0, 1.0),
            path_length: self.integrate_distance(),
        }
    }

    /// Write as CSV with header `t,speed`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["t", "speed"]).map_err(|e| csv_err(path, e))?;
        for (i, v) in self.speeds.iter().enumerate() {
            let t = self.dt * i as f64;
            w.write_record([t.to_string(), v.to_string()]).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Read a `t,speed` CSV. The label is taken from a `_C.csv` / `_NC.csv`
    /// filename suffix when present.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
        if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "speed" {
            return Err(parse_err(path, format!("expected header t,speed, found {headers:?}")));
        }
        let mut ts = Vec::new();
        let mut speeds = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| parse_err(path, format!("row {}: bad number in column {k}", row + 1)))
            };
            ts.push(field(0)?);
            speeds.push(field(1)?);
        }
        if ts.len() < 2 {
            return Err(parse_err(path, "need at least 2 rows".into()));
        }
        if ts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(parse_err(path, "t must be strictly increasing".into()));
        }
        let dt = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
        let tol = 1e-6 * dt.max(1.0);
        if ts.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > tol) {
            return Err(parse_err(path, "t must be uniformly spaced".into()));
        }
        let label = label_from_filename(path);
        VelocityProfile::new(dt, speeds, label).map_err(|e| parse_err(path, e.to_string()))
    }
}

/// Class encoded in a `..._C.csv` / `..._NC.csv` filename.
/// `n >= 2` points spanning `src` end to end, linearly interpolated.
fn linear_grid(src: &[f64], n: usize) -> Vec<f64> {
    let last = src.len() - 1;
    (0..n)
        .map(|k| {
            // Position on the source grid, computed without accumulating dt.
            let x = (k * last) as f64 / (n - 1) as f64;
            let i = (x.floor() as usize).min(last);
            if i == last {
                src[last]
            } else {
                src[i] + (src[i + 1] - src[i]) * (x - i as f64)
            }
        })
        .collect()
}

pub fn label_from_filename(path: &Path) -> Option<CarefulnessClass> {
    let name = path.file_name()?.to_str()?;
    if name.ends_with("_NC.csv") {
        Some(CarefulnessClass::NotCareful)
    } else if name.ends_with("_C.csv") {
        Some(CarefulnessClass::Careful)
    } else {
        None
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    parse_err(path, e.to_string())
}

fn parse_err(path: &Path, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message,
    }
}

/// Trapezoidal integral of uniformly sampled values.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    values.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum()
}

pub fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Summary of one speed profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicFeatures {
    pub peak_speed: f64,
    pub duration: f64,
    /// Median over samples above 5% of peak, so rest padding does not count.
    pub median_speed: f64,
    /// Fraction of the duration after the (first) speed peak.
    pub decel_fraction: f64,
    pub path_length: f64,
}

impl KinematicFeatures {
    pub const CLASSIFIER_FEATURES: [&'static str; 4] = ["peak_speed", "duration", "median_speed", "decel_fraction"];

    /// The feature vector used by the classifier.
    pub fn classifier_vector(&self) -> [f64; 4] {
        [self.peak_speed, self.duration, self.median_speed, self.decel_fraction]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(dt: f64, speeds: &[f64]) -> VelocityProfile {
        VelocityProfile::new(dt, speeds.to_vec(), None).unwrap()
    }

    #[test]
    fn resample_constant() {
        let p = profile(0.1, &[0.2; 5]);
        let r = p.resample(10).unwrap();
        assert_eq!(r.len(), 10);
        assert!(r.speeds().iter().all(|&v| (v - 0.2).abs() < 1e-15));
        assert!((r.dt() - 0.4 / 9.0).abs() < 1e-15);
        assert!((r.dt() - 0.0444).abs() < 1e-4);
    }

    #[test]
    fn resample_identity() {
        let p = profile(0.025, &[0.0, 0.1, 0.3, 0.5, 0.4, 0.2, 0.1, 0.05, 0.0]);
        let r = p.resample(p.len()).unwrap();
        assert_eq!(r.speeds(), p.speeds());
        assert_eq!(r.dt(), p.dt());
    }

    #[test]
    fn resample_triangle_by_hand() {
        let r = profile(0.5, &[0.0, 1.0, 0.0]).resample(8).unwrap();
        assert!((r.duration() - 1.0).abs() < 1e-15);
        // Hand interpolation at k/7 of the way: 0, 2/7, 4/7, 6/7, 6/7, 4/7, 2/7, 0.
        let expect = [0.0, 2.0 / 7.0, 4.0 / 7.0, 6.0 / 7.0, 6.0 / 7.0, 4.0 / 7.0, 2.0 / 7.0, 0.0];
        for (a, b) in r.speeds().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn resample_triangle_to_five_points() {
        // Five points sit below the motion floor, so the grid is checked directly.
        assert_eq!(linear_grid(&[0.0, 1.0, 0.0], 5), vec![0.0, 0.5, 1.0, 0.5, 0.0]);
        assert_eq!(profile(0.5, &[0.0, 1.0, 0.0]).duration() / 4.0, 0.25);
    }

    #[test]
    fn resample_rejects_short_targets() {
        let p = profile(0.5, &[0.0, 1.0, 0.0]);
        assert!(matches!(p.resample(7), Err(Error::InvalidArgument(_))));
        assert!(matches!(p.resample(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn empty_and_bad_profiles_rejected() {
        assert!(VelocityProfile::new(0.1, vec![], None).is_err());
        assert!(VelocityProfile::new(0.1, vec![0.1], None).is_err());
        assert!(VelocityProfile::new(0.0, vec![0.1, 0.2], None).is_err());
        assert!(VelocityProfile::new(0.1, vec![0.1, -0.2], None).is_err());
        assert!(VelocityProfile::new(0.1, vec![0.1, f64::NAN], None).is_err());
    }

    #[test]
    fn triangle_features() {
        let f = profile(0.5, &[0.0, 1.0, 0.0]).extract_features();
        assert_eq!(f.peak_speed, 1.0);
        assert_eq!(f.duration, 1.0);
        assert_eq!(f.decel_fraction, 0.5);
        assert_eq!(f.path_length, 0.5);
        assert_eq!(f.median_speed, 1.0);
    }

    #[test]
    fn plateau_median_and_rest_gate() {
        let f = profile(0.1, &[0.0, 0.0, 0.3, 0.3, 0.3, 0.3, 0.0, 0.0, 0.0]).extract_features();
        assert_eq!(f.median_speed, 0.3);
        // Leading/trailing zeros do not change the median.
        let g = profile(0.1, &[0.0, 0.3, 0.3, 0.3, 0.3, 0.0]).extract_features();
        assert_eq!(f.median_speed, g.median_speed);
    }

    #[test]
    fn ties_break_to_first_peak() {
        let f = profile(1.0, &[0.0, 1.0, 0.5, 1.0, 0.0]).extract_features();
        assert_eq!(f.decel_fraction, 0.75);
    }

    #[test]
    fn distances() {
        assert_eq!(profile(0.5, &[0.0, 1.0, 0.0]).integrate_distance(), 0.5);
        assert_eq!(profile(0.25, &[0.0; 9]).integrate_distance(), 0.0);
        let c = profile(0.25, &[0.2; 9]);
        assert!((c.integrate_distance() - 0.4).abs() < 1e-15);
        assert_eq!(c.integrate_distance(), c.extract_features().path_length);
    }

    #[test]
    fn motion_invariants() {
        assert!(profile(0.1, &[0.0, 0.1, 0.3, 0.5, 0.4, 0.2, 0.1, 0.0]).check_motion().is_ok());
        assert!(profile(0.1, &[0.2; 8]).check_motion().is_err());
        assert!(profile(0.5, &[0.0, 1.0, 0.0]).check_motion().is_err());
    }

    #[test]
    fn speed_interpolation() {
        let p = profile(0.5, &[0.0, 1.0, 0.0]);
        assert_eq!(p.speed_at(0.25), Some(0.5));
        assert_eq!(p.speed_at(1.0), Some(0.0));
        assert_eq!(p.speed_at(1.01), None);
    }

    #[test]
    fn csv_roundtrip_and_label() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p003_NC.csv");
        let p = profile(0.025, &[0.0, 0.1, 0.3, 0.5, 0.4, 0.2, 0.1, 0.0]);
        p.write_csv(&path).unwrap();
        let q = VelocityProfile::read_csv(&path).unwrap();
        assert_eq!(q.label(), Some(CarefulnessClass::NotCareful));
        assert_eq!(q.speeds(), p.speeds());
        assert!((q.dt() - p.dt()).abs() < 1e-12);
    }

    #[test]
    fn csv_rejects_non_increasing_time() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t,speed\n0,0\n0.1,0.2\n0.1,0.1\n").unwrap();
        let err = VelocityProfile::read_csv(&path).unwrap_err();
        assert!(err.to_string().contains("bad.csv"), "{err}");
    }
}
