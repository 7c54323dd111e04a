use carefulbot::classifier::{self, evaluate, fit_vectors, FitConfig, LabeledVectors};
use carefulbot::kinematics::{CarefulnessClass, KinematicFeatures, VelocityProfile};
use carefulbot::surrogate::{build_dataset, ProfileFamilyParams};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn rows(profiles: &[VelocityProfile]) -> Vec<(Vec<f64>, CarefulnessClass)> {
    profiles
        .iter()
        .map(|p| (p.extract_features().classifier_vector().to_vec(), p.label().unwrap()))
        .collect()
}

fn accuracy(model: &classifier::ClassifierModel, data: &[(Vec<f64>, CarefulnessClass)]) -> f64 {
    let hits = data
        .iter()
        .filter(|(x, c)| (model.predict_vector(x).unwrap() > 0.5) == (*c == CarefulnessClass::Careful))
        .count();
    hits as f64 / data.len() as f64
}

#[test]
fn peak_threshold_separates_the_surrogate() {
    let data = build_dataset(1000, &ProfileFamilyParams::default(), 5).unwrap();
    let mut peaks: Vec<(f64, bool)> = data
        .profiles
        .iter()
        .map(|p| (p.peak(), p.label() == Some(CarefulnessClass::Careful)))
        .collect();
    peaks.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Sweep every cut "careful below": count careful left of the cut and
    // not-careful right of it.
    let n_nc = peaks.iter().filter(|p| !p.1).count();
    let (mut c_left, mut nc_left, mut best) = (0usize, 0usize, 0usize);
    for &(_, careful) in &peaks {
        if careful {
            c_left += 1;
        } else {
            nc_left += 1;
        }
        best = best.max(c_left + (n_nc - nc_left));
    }
    assert!(best as f64 / peaks.len() as f64 >= 0.95, "best cut {best}/{}", peaks.len());
}

#[test]
fn held_out_accuracy_on_the_surrogate() {
    let params = ProfileFamilyParams::default();
    let train = build_dataset(500, &params, 1).unwrap();
    let test = build_dataset(500, &params, 2).unwrap();
    let model = classifier::fit_profiles(&train.profiles, 0).unwrap();
    let ev = evaluate(&model, &test.profiles).unwrap();
    assert!(ev.accuracy >= 0.95, "held-out accuracy {}", ev.accuracy);
    let recount: usize = (0..2).map(|i| ev.confusion[i][i]).sum();
    let total: usize = ev.confusion.iter().flatten().sum();
    assert_eq!(ev.correct, recount);
    assert_eq!(ev.total, total);
    assert_eq!(ev.accuracy, recount as f64 / total as f64);
}

fn shuffle_labels(data: &mut [(Vec<f64>, CarefulnessClass)], seed: u64) {
    let mut labels: Vec<CarefulnessClass> = data.iter().map(|r| r.1).collect();
    labels.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    for (row, label) in data.iter_mut().zip(labels) {
        row.1 = label;
    }
}

#[test]
fn shuffled_labels_give_chance_accuracy() {
    // Labels are permuted on both sides; a held-out set with true labels
    // would still be perfectly separable by any faint learned direction.
    let params = ProfileFamilyParams::default();
    let mut train = rows(&build_dataset(500, &params, 1).unwrap().profiles);
    let mut test = rows(&build_dataset(500, &params, 2).unwrap().profiles);
    shuffle_labels(&mut train, 9);
    shuffle_labels(&mut test, 10);
    let model = fit_vectors(
        LabeledVectors {
            names: &KinematicFeatures::CLASSIFIER_FEATURES,
            rows: &train,
        },
        0,
        FitConfig::default(),
    )
    .unwrap();
    let acc = accuracy(&model, &test);
    assert!((acc - 0.5).abs() <= 0.05, "shuffled accuracy {acc}");
}

#[test]
fn careful_centroid_is_careful() {
    let train = build_dataset(500, &ProfileFamilyParams::default(), 1).unwrap();
    let data = rows(&train.profiles);
    let model = classifier::fit_profiles(&train.profiles, 0).unwrap();
    for class in CarefulnessClass::ALL {
        let members: Vec<&Vec<f64>> = data.iter().filter(|r| r.1 == class).map(|r| &r.0).collect();
        let centroid: Vec<f64> = (0..4).map(|j| members.iter().map(|x| x[j]).sum::<f64>() / members.len() as f64).collect();
        let p = model.predict_vector(&centroid).unwrap();
        assert_eq!(p > 0.5, class == CarefulnessClass::Careful, "{class:?} centroid p={p}");
    }
}

#[test]
fn slower_peak_never_lowers_the_careful_probability() {
    let train = build_dataset(200, &ProfileFamilyParams::default(), 1).unwrap();
    let model = classifier::fit_profiles(&train.profiles, 0).unwrap();
    assert!(model.weights[0] < 0.0);
    let mut f = train.profiles[0].extract_features();
    let mut last = model.predict_proba(&f).unwrap();
    for _ in 0..50 {
        f.peak_speed *= 0.95;
        let p = model.predict_proba(&f).unwrap();
        assert!(p >= last);
        assert_eq!(p + model.predict_proba_complement(&f).unwrap(), 1.0);
        last = p;
    }
}

#[test]
fn empty_class_is_flagged() {
    let train = build_dataset(100, &ProfileFamilyParams::default(), 1).unwrap();
    let model = classifier::fit_profiles(&train.profiles, 0).unwrap();
    let careful: Vec<VelocityProfile> = train.of_class(CarefulnessClass::Careful).cloned().collect();
    let ev = evaluate(&model, &careful).unwrap();
    assert_eq!(ev.per_class.len(), 1);
    assert_eq!(ev.missing_classes, vec![CarefulnessClass::NotCareful]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fit_ignores_uniform_feature_rescaling(feature in 0usize..4, scale in 1e-3f64..1e3) {
        let params = ProfileFamilyParams::default();
        let train = rows(&build_dataset(60, &params, 3).unwrap().profiles);
        let test = rows(&build_dataset(30, &params, 4).unwrap().profiles);
        let rescale = |data: &[(Vec<f64>, CarefulnessClass)]| -> Vec<(Vec<f64>, CarefulnessClass)> {
            data.iter().map(|(x, c)| {
                let mut x = x.clone();
                x[feature] *= scale;
                (x, *c)
            }).collect()
        };
        let cfg = FitConfig { epochs: 300, ..FitConfig::default() };
        let fit = |rows: &[(Vec<f64>, CarefulnessClass)]| fit_vectors(
            LabeledVectors { names: &KinematicFeatures::CLASSIFIER_FEATURES, rows },
            0,
            cfg,
        ).unwrap();
        let (a, b) = (fit(&train), fit(&rescale(&train)));
        for ((x, _), (y, _)) in test.iter().zip(rescale(&test)) {
            let (pa, pb) = (a.predict_vector(x).unwrap(), b.predict_vector(&y).unwrap());
            prop_assert!((pa - pb).abs() < 1e-6, "{pa} vs {pb}");
        }
    }
}
