//! Logistic-regression carefulness classifier over kinematic features.
//!
//! Features are z-scored with statistics from the training set, then fitted
//! by full-batch gradient descent on binary cross-entropy from zero weights.
//! The positive class is [`CarefulnessClass::Careful`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gan::gru::sigmoid;
use crate::gan::timegan::bce_with_logit;
use crate::kinematics::{CarefulnessClass, KinematicFeatures, VelocityProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        // With z-scored inputs the loss curvature is at most (d + 1) / 4, so a
        // unit step stays below the monotone-descent bound for d <= 6.
        FitConfig {
            learning_rate: 1.0,
            epochs: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    /// Population standard deviation; 1.0 for constant features.
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    /// SHA-256 over the training vectors and labels.
    pub dataset_hash: String,
    pub seed: u64,
    pub n_careful: usize,
    pub n_not_careful: usize,
    pub config: FitConfig,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub features: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub stats: FeatureStats,
    pub metadata: TrainingMetadata,
    /// BCE after every epoch.
    #[serde(skip)]
    pub loss_curve: Vec<f64>,
}

/// Feature names and vectors for [`fit_vectors`].
pub struct LabeledVectors<'a> {
    pub names: &'a [&'a str],
    pub rows: &'a [(Vec<f64>, CarefulnessClass)],
}

fn dataset_hash(rows: &[(Vec<f64>, CarefulnessClass)]) -> String {
    let mut h = Sha256::new();
    for (x, c) in rows {
        for v in x {
            h.update(v.to_le_bytes());
        }
        h.update(c.code().as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

fn mean_bce(weights: &[f64], bias: f64, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(x, &y)| bce_with_logit(bias + dot(weights, x), y))
        .sum::<f64>()
        / xs.len() as f64
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fit on arbitrary feature vectors.
pub fn fit_vectors(data: LabeledVectors<'_>, seed: u64, config: FitConfig) -> Result<ClassifierModel> {
    let rows = data.rows;
    let d = data.names.len();
    let n_careful = rows.iter().filter(|(_, c)| *c == CarefulnessClass::Careful).count();
    let n_not_careful = rows.len() - n_careful;
    if n_careful == 0 || n_not_careful == 0 {
        return Err(Error::Classifier("training set must contain both classes".into()));
    }
    if let Some((x, _)) = rows.iter().find(|(x, _)| x.len() != d || x.iter().any(|v| !v.is_finite())) {
        return Err(Error::Classifier(format!("bad feature vector {x:?} (expected {d} finite values)")));
    }

    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|(x, _)| x[j]).sum::<f64>() / n).collect();
    let std: Vec<f64> = (0..d)
        .map(|j| {
            let var = rows.iter().map(|(x, _)| (x[j] - mean[j]).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let stats = FeatureStats { mean, std };
    let xs: Vec<Vec<f64>> = rows.iter().map(|(x, _)| stats.normalize(x)).collect();
    let ys: Vec<f64> = rows.iter().map(|(_, c)| c.target()).collect();

    let mut weights = vec![0.0; d];
    let mut bias = 0.0;
    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut gw = vec![0.0; d];
    for _ in 0..config.epochs {
        gw.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for (x, &y) in xs.iter().zip(&ys) {
            let e = sigmoid(bias + dot(&weights, x)) - y;
            gb += e;
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += e * xi;
            }
        }
        for (w, g) in weights.iter_mut().zip(&gw) {
            *w -= config.learning_rate * g / n;
        }
        bias -= config.learning_rate * gb / n;
        loss_curve.push(mean_bce(&weights, bias, &xs, &ys));
    }
    let final_loss = loss_curve.last().copied().unwrap_or_else(|| mean_bce(&weights, bias, &xs, &ys));

    Ok(ClassifierModel {
        features: data.names.iter().map(|s| s.to_string()).collect(),
        weights,
        bias,
        stats,
        metadata: TrainingMetadata {
            dataset_hash: dataset_hash(rows),
            seed,
            n_careful,
            n_not_careful,
            config,
            final_loss,
        },
        loss_curve,
    })
}

/// Fit on the four classifier features of labeled feature sets.
///
/// Full-batch descent from zero weights has no random component; `seed` is
/// recorded in the metadata so exported models name their provenance.
pub fn fit(dataset: &[(KinematicFeatures, CarefulnessClass)], seed: u64) -> Result<ClassifierModel> {
    fit_with(dataset, seed, FitConfig::default())
}

pub fn fit_with(dataset: &[(KinematicFeatures, CarefulnessClass)], seed: u64, config: FitConfig) -> Result<ClassifierModel> {
    let rows: Vec<(Vec<f64>, CarefulnessClass)> =
        dataset.iter().map(|(f, c)| (f.classifier_vector().to_vec(), *c)).collect();
    fit_vectors(
        LabeledVectors {
            names: &KinematicFeatures::CLASSIFIER_FEATURES,
            rows: &rows,
        },
        seed,
        config,
    )
}

/// Fit on labeled profiles; unlabeled profiles are rejected.
pub fn fit_profiles(profiles: &[VelocityProfile], seed: u64) -> Result<ClassifierModel> {
    fit(&labeled_features(profiles)?, seed)
}

fn labeled_features(profiles: &[VelocityProfile]) -> Result<Vec<(KinematicFeatures, CarefulnessClass)>> {
    profiles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.label()
                .map(|c| (p.extract_features(), c))
                .ok_or_else(|| Error::Classifier(format!("profile {i} has no class label")))
        })
        .collect()
}

impl FeatureStats {
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }
}

impl ClassifierModel {
    /// P(Careful) for a raw feature vector in the model's feature order.
    pub fn predict_vector(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::Classifier(format!(
                "expected {} features, got {}",
                self.weights.len(),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Classifier(format!("non-finite features {x:?}")));
        }
        Ok(sigmoid(self.bias + dot(&self.weights, &self.stats.normalize(x))))
    }

    /// P(Careful | features).
    pub fn predict_proba(&self, features: &KinematicFeatures) -> Result<f64> {
        self.predict_vector(&features.classifier_vector())
    }

    /// P(NotCareful | features), exactly `1 - predict_proba`.
    pub fn predict_proba_complement(&self, features: &KinematicFeatures) -> Result<f64> {
        Ok(1.0 - self.predict_proba(features)?)
    }

    /// Hard label: Careful iff the probability exceeds 0.5.
    pub fn predict(&self, features: &KinematicFeatures) -> Result<CarefulnessClass> {
        Ok(if self.predict_proba(features)? > 0.5 {
            CarefulnessClass::Careful
        } else {
            CarefulnessClass::NotCareful
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: ClassifierModel = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let finite = model.stats.mean.iter().chain(&model.stats.std).all(|v| v.is_finite());
        if !finite || model.stats.std.iter().any(|&s| s <= 0.0) || model.weights.len() != model.stats.mean.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: "inconsistent normalization stats".into(),
            });
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub class: CarefulnessClass,
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// `confusion[true][predicted]`, index 0 = C, 1 = NC.
    pub confusion: [[usize; 2]; 2],
    /// Rows only for classes present in the evaluation set.
    pub per_class: Vec<ClassAccuracy>,
    pub missing_classes: Vec<CarefulnessClass>,
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

fn class_index(c: CarefulnessClass) -> usize {
    match c {
        CarefulnessClass::Careful => 0,
        CarefulnessClass::NotCareful => 1,
    }
}

pub fn evaluate(model: &ClassifierModel, profiles: &[VelocityProfile]) -> Result<Evaluation> {
    if profiles.is_empty() {
        return Err(Error::Classifier("evaluation set is empty".into()));
    }
    let mut confusion = [[0usize; 2]; 2];
    for (f, truth) in labeled_features(profiles)? {
        confusion[class_index(truth)][class_index(model.predict(&f)?)] += 1;
    }
    let mut per_class = Vec::new();
    let mut missing_classes = Vec::new();
    for class in CarefulnessClass::ALL {
        let row = confusion[class_index(class)];
        let total = row[0] + row[1];
        if total == 0 {
            missing_classes.push(class);
            continue;
        }
        let correct = row[class_index(class)];
        per_class.push(ClassAccuracy {
            class,
            total,
            correct,
            accuracy: correct as f64 / total as f64,
        });
    }
    let total = profiles.len();
    let correct = confusion[0][0] + confusion[1][1];
    Ok(Evaluation {
        confusion,
        per_class,
        missing_classes,
        total,
        correct,
        accuracy: correct as f64 / total as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use CarefulnessClass::*;

    fn toy() -> Vec<(Vec<f64>, CarefulnessClass)> {
        vec![
            (vec![0.1], Careful),
            (vec![0.2], Careful),
            (vec![0.3], Careful),
            (vec![0.7], NotCareful),
            (vec![0.8], NotCareful),
            (vec![0.9], NotCareful),
        ]
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let rows = toy();
        let m = fit_vectors(LabeledVectors { names: &["x"], rows: &rows }, 0, FitConfig::default()).unwrap();
        for (x, c) in &rows {
            let p = m.predict_vector(x).unwrap();
            assert_eq!(p > 0.5, *c == Careful);
        }
        assert!(m.weights[0] < 0.0);
    }

    #[test]
    fn loss_decreases_every_epoch() {
        let rows = toy();
        let m = fit_vectors(LabeledVectors { names: &["x"], rows: &rows }, 0, FitConfig::default()).unwrap();
        assert!(m.loss_curve.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn single_class_is_rejected() {
        let rows = vec![(vec![0.1], Careful), (vec![0.2], Careful)];
        let err = fit_vectors(LabeledVectors { names: &["x"], rows: &rows }, 0, FitConfig::default());
        assert!(matches!(err, Err(Error::Classifier(_))));
    }

    #[test]
    fn zero_weights_predict_half() {
        let rows = toy();
        let mut m = fit_vectors(LabeledVectors { names: &["x"], rows: &rows }, 0, FitConfig::default()).unwrap();
        m.weights = vec![0.0];
        m.bias = 0.0;
        for x in [-10.0, 0.0, 0.5, 3.0] {
            assert_eq!(m.predict_vector(&[x]).unwrap(), 0.5);
        }
    }

    #[test]
    fn non_finite_features_are_rejected() {
        let rows = toy();
        let m = fit_vectors(LabeledVectors { names: &["x"], rows: &rows }, 0, FitConfig::default()).unwrap();
        assert!(m.predict_vector(&[f64::NAN]).is_err());
        assert!(m.predict_vector(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let rows = toy();
        let m = fit_vectors(LabeledVectors { names: &["x"], rows: &rows }, 9, FitConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clf.json");
        m.save(&path).unwrap();
        let back = ClassifierModel::load(&path).unwrap();
        assert_eq!(back.weights, m.weights);
        assert_eq!(back.metadata, m.metadata);
        assert_eq!(back.metadata.seed, 9);
    }
}
