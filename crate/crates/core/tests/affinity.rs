use jpa_core::affinity::classifier::fit_classifier;
use jpa_core::affinity::features::same_features;
use jpa_core::affinity::{platt_fit, train_pairwise, ClassifierKind, Standardizer, TrainConfig};
use jpa_core::synth::{generate_scenes, SynthConfig};
use jpa_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Offsets in two far-apart boxes: positives near (10, 0), negatives near (60, 40).
fn separable(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let pos = i % 2 == 0;
        let (cu, cv) = if pos { (10.0, 0.0) } else { (60.0, 40.0) };
        let du = cu + rng.gen_range(-8.0..8.0);
        let dv = cv + rng.gen_range(-8.0..8.0);
        rows.push(same_features(du / 100.0, dv / 100.0).to_vec());
        labels.push(pos);
    }
    (rows, labels)
}

fn check_separable(kind: ClassifierKind) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (train, train_y) = separable(&mut rng, 400);
    let (calib, calib_y) = separable(&mut rng, 200);
    let (test, test_y) = separable(&mut rng, 200);
    let st = Standardizer::fit(&train);
    let z: Vec<Vec<f64>> = train.iter().map(|r| st.apply(r)).collect();
    let clf = fit_classifier(kind, &z, &train_y);
    let margins = |rows: &[Vec<f64>]| rows.iter().map(|r| clf.margin(&st.apply(r))).collect::<Vec<_>>();
    let platt = platt_fit(&margins(&calib), &calib_y).unwrap();
    let probs: Vec<f64> = margins(&test).into_iter().map(|m| platt.probability(m)).collect();
    let correct = probs.iter().zip(&test_y).filter(|(p, &y)| (**p > 0.5) == y).count();
    let accuracy = correct as f64 / test.len() as f64;
    assert!(accuracy >= 0.95, "{kind:?}: accuracy {accuracy}");
    let mean = |want: bool| {
        let v: Vec<f64> = probs
            .iter()
            .zip(&test_y)
            .filter(|(_, &y)| y == want)
            .map(|(p, _)| *p)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(true) > mean(false));
}

#[test]
fn separable_pairs_are_classified_logistic() {
    check_separable(ClassifierKind::default());
}

#[test]
fn separable_pairs_are_classified_rbf() {
    check_separable(ClassifierKind::Rbf { c: 1.0, gamma: 0.5 });
}

#[test]
fn a_single_visible_joint_is_degenerate() {
    let cfg = SynthConfig {
        seed: 3,
        ..SynthConfig::preset("clean").unwrap()
    };
    let mut scenes = generate_scenes(&cfg, 4).unwrap();
    for s in &mut scenes {
        for p in &mut s.persons {
            for (i, j) in p.joints.iter_mut().enumerate() {
                if i > 0 {
                    j.visible = false;
                    j.strength = 0.0;
                }
            }
        }
        // maps are rendered again from the edited annotations
        s.maps = None;
    }
    let err = train_pairwise(&scenes, &TrainConfig::default()).unwrap_err();
    match err {
        Error::DegenerateClass { pair, positives, .. } => {
            assert!(!pair.is_empty());
            assert!(positives < 2, "{pair}: {positives} positives");
        }
        other => panic!("unexpected {other:?}"),
    }
}
