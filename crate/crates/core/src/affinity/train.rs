//! Training the pair models from annotated scenes.
//!
//! Candidates are sampled from every region's maps exactly as at inference
//! time. A candidate pair is positive when both candidates lie within the
//! match radius of the corresponding joints of one ground-truth person.
//! Each (pair, class) stream is reservoir-sampled, the majority class is
//! subsampled to the minority count, and a stratified split provides the
//! held-out margins for calibration.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classifier::{fit_classifier, ClassifierKind, Standardizer};
use super::features::{extract_features, Endpoint};
use super::platt::platt_fit;
use super::{joint_pairs, pair_name, pair_slot, threshold_detections, PairModel, PairwiseModel, NUM_PAIR_MODELS};
use crate::error::{Error, Result};
use crate::model::{Detection, Scene};
use crate::synth::{derive_seed, region_maps, sample_region, SamplingParams};

/// Scenes are featurized this many at a time.
const CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub sampling: SamplingParams,
    /// Candidates below this confidence are not used, as at inference.
    pub min_confidence: f64,
    /// Match radius as a fraction of the person's head length.
    pub match_fraction: f64,
    /// Share of each class held out for calibration.
    pub holdout: f64,
    pub classifier: ClassifierKind,
    /// Reservoir size per pair and class.
    pub max_per_class: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            sampling: SamplingParams::default(),
            min_confidence: 0.2,
            match_fraction: 0.5,
            holdout: 0.2,
            classifier: ClassifierKind::default(),
            max_per_class: 2000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sampling.n_candidates == 0 {
            return Err(Error::Config("n_candidates must be at least 1".into()));
        }
        if !(self.match_fraction > 0.0) {
            return Err(Error::Config("match_fraction must be positive".into()));
        }
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return Err(Error::Config("holdout must lie strictly between 0 and 1".into()));
        }
        if self.max_per_class < 2 {
            return Err(Error::Config("max_per_class must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::Config("min_confidence must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

struct Reservoir {
    seen: u64,
    items: Vec<Vec<f64>>,
    cap: usize,
    rng: ChaCha8Rng,
}

impl Reservoir {
    fn new(cap: usize, seed: u64) -> Self {
        Self {
            seen: 0,
            items: Vec::new(),
            cap,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn push(&mut self, x: Vec<f64>) {
        self.seen += 1;
        if self.items.len() < self.cap {
            self.items.push(x);
        } else {
            let k = self.rng.gen_range(0..self.seen);
            if (k as usize) < self.cap {
                self.items[k as usize] = x;
            }
        }
    }
}

/// `(slot, positive, features)` for every candidate pair of a scene.
pub(crate) fn scene_samples(scene: &Scene, cfg: &TrainConfig) -> Result<Vec<(usize, bool, Vec<f64>)>> {
    let mut out = Vec::new();
    for (ri, region) in scene.regions.iter().enumerate() {
        let maps = region_maps(scene, ri)?;
        let dets = threshold_detections(&sample_region(&maps, &cfg.sampling), cfg.min_confidence);
        let matches: Vec<Vec<usize>> = dets
            .iter()
            .map(|d| matched_persons(scene, region.to_image(d.location), d, cfg.match_fraction))
            .collect();
        for a in 0..dets.len() {
            for b in a + 1..dets.len() {
                let positive = matches[a].iter().any(|p| matches[b].contains(p));
                let f = extract_features(Endpoint::from(&dets[a]), Endpoint::from(&dets[b]), &maps)?;
                out.push((pair_slot(dets[a].joint, dets[b].joint), positive, f.as_slice().to_vec()));
            }
        }
    }
    Ok(out)
}

fn matched_persons(scene: &Scene, at: crate::model::Point, d: &Detection, fraction: f64) -> Vec<usize> {
    scene
        .persons
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let gt = p.joint(d.joint);
            gt.visible && gt.location().distance(at) <= fraction * p.head_length()
        })
        .map(|(i, _)| i)
        .collect()
}

/// Trains all 105 pair models.
pub fn train_pairwise(scenes: &[Scene], cfg: &TrainConfig) -> Result<PairwiseModel> {
    cfg.validate()?;
    if scenes.iter().all(|s| s.persons.is_empty()) {
        return Err(Error::Config("training needs at least one scene with a person".into()));
    }
    let mut reservoirs: Vec<[Reservoir; 2]> = (0..NUM_PAIR_MODELS)
        .map(|slot| {
            let s = slot as u64 * 2;
            [
                Reservoir::new(cfg.max_per_class, derive_seed(cfg.seed, s)),
                Reservoir::new(cfg.max_per_class, derive_seed(cfg.seed, s + 1)),
            ]
        })
        .collect();
    for chunk in scenes.chunks(CHUNK) {
        let samples: Vec<_> = chunk.par_iter().map(|s| scene_samples(s, cfg)).collect::<Result<_>>()?;
        for (slot, positive, f) in samples.into_iter().flatten() {
            reservoirs[slot][positive as usize].push(f);
        }
    }
    let fitted: Vec<Result<PairModel>> = reservoirs
        .into_par_iter()
        .zip(joint_pairs().collect::<Vec<_>>())
        .enumerate()
        .map(|(slot, ([neg, pos], joints))| {
            fit_pair(
                joints,
                pos.items,
                neg.items,
                cfg,
                derive_seed(cfg.seed ^ 0x5eed, slot as u64),
            )
        })
        .collect();
    let pairs = fitted.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(PairwiseModel {
        classifier: cfg.classifier,
        pairs,
    })
}

fn fit_pair(
    joints: (crate::model::JointType, crate::model::JointType),
    mut pos: Vec<Vec<f64>>,
    mut neg: Vec<Vec<f64>>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<PairModel> {
    // each class needs one sample on both sides of the split
    if pos.len() < 2 || neg.len() < 2 {
        return Err(Error::DegenerateClass {
            pair: pair_name(joints.0, joints.1),
            positives: pos.len(),
            negatives: neg.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = pos.len().min(neg.len());
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    pos.truncate(n);
    neg.truncate(n);
    let held = ((n as f64 * cfg.holdout).round() as usize).clamp(1, n - 1);
    let mut train_rows = Vec::with_capacity(2 * (n - held));
    let mut train_labels = Vec::with_capacity(2 * (n - held));
    let mut test_rows = Vec::with_capacity(2 * held);
    let mut test_labels = Vec::with_capacity(2 * held);
    for (class, rows) in [(true, pos), (false, neg)] {
        for (i, r) in rows.into_iter().enumerate() {
            if i < held {
                test_rows.push(r);
                test_labels.push(class);
            } else {
                train_rows.push(r);
                train_labels.push(class);
            }
        }
    }
    let standardizer = Standardizer::fit(&train_rows);
    let z: Vec<Vec<f64>> = train_rows.iter().map(|r| standardizer.apply(r)).collect();
    let classifier = fit_classifier(cfg.classifier, &z, &train_labels);
    let margins: Vec<f64> = test_rows
        .iter()
        .map(|r| classifier.margin(&standardizer.apply(r)))
        .collect();
    let platt = platt_fit(&margins, &test_labels).map_err(|e| match e {
        Error::DegenerateClass {
            positives, negatives, ..
        } => Error::DegenerateClass {
            pair: pair_name(joints.0, joints.1),
            positives,
            negatives,
        },
        other => other,
    })?;
    let correct = margins
        .iter()
        .zip(&test_labels)
        .filter(|(&m, &l)| (platt.probability(m) >= 0.5) == l)
        .count();
    if !platt.is_increasing() {
        log::warn!(
            "pair {}: calibrated probability does not increase with the margin (a = {})",
            pair_name(joints.0, joints.1),
            platt.a
        );
    }
    Ok(PairModel {
        joints,
        standardizer,
        classifier,
        platt,
        heldout_accuracy: correct as f64 / margins.len() as f64,
        samples_per_class: n,
    })
}
