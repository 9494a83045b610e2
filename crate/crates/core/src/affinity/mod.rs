//! Unary and pairwise costs for the association problems.
//!
//! Detector confidences become unary costs through the log-odds
//! `log((1 - p) / p)` after thresholding. Pairwise costs come from one
//! calibrated classifier per unordered pair of joint types, 105 in all.

pub mod classifier;
pub mod features;
pub mod platt;
pub mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use classifier::{Classifier, ClassifierKind, Standardizer};
pub use features::{canonical, extract_features, schema_hash, Endpoint, PairFeatures};
pub use platt::{platt_fit, platt_gradient, platt_nll, PlattScaler};
pub use train::{train_pairwise, TrainConfig};

use crate::error::{check_version, Error, Result};
use crate::model::{
    clamp_probability, log_odds_cost, AssociationInstance, Detection, JointType, PairTable, RegionMaps, NUM_JOINTS,
};

pub const MODEL_FORMAT: &str = "jpa-model";
pub const MODEL_MAJOR: u32 = 1;

/// Number of pair models: every unordered pair of joint types, including a
/// type with itself.
pub const NUM_PAIR_MODELS: usize = NUM_JOINTS * (NUM_JOINTS + 1) / 2;

/// `s` if `s >= tau`, else 0.
pub fn threshold_confidence(s: f64, tau: f64) -> f64 {
    if s >= tau {
        s
    } else {
        0.0
    }
}

/// Log-odds cost of a detection confidence.
pub fn unary_cost(p: f64) -> f64 {
    log_odds_cost(p)
}

/// Applies the confidence threshold, drops detections it zeroes and
/// renumbers the rest densely in their original order.
pub fn threshold_detections(detections: &[Detection], tau: f64) -> Vec<Detection> {
    detections
        .iter()
        .filter_map(|d| {
            let s = threshold_confidence(d.confidence, tau);
            (s > 0.0).then(|| Detection {
                confidence: s,
                ..d.clone()
            })
        })
        .enumerate()
        .map(|(id, d)| Detection { id, ..d })
        .collect()
}

/// Slot of the unordered joint pair `{a, b}` in canonical order.
pub fn pair_slot(a: JointType, b: JointType) -> usize {
    let (a, b) = if a.index() <= b.index() {
        (a.index(), b.index())
    } else {
        (b.index(), a.index())
    };
    a * (2 * NUM_JOINTS - a + 1) / 2 + (b - a)
}

/// Joint pairs in slot order.
pub fn joint_pairs() -> impl Iterator<Item = (JointType, JointType)> {
    (0..NUM_JOINTS).flat_map(|a| (a..NUM_JOINTS).map(move |b| (JointType::ALL[a], JointType::ALL[b])))
}

pub fn pair_name(a: JointType, b: JointType) -> String {
    format!("{}-{}", a.name(), b.name())
}

/// Classifier and calibration for one joint-type pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub joints: (JointType, JointType),
    pub standardizer: Standardizer,
    pub classifier: Classifier,
    pub platt: PlattScaler,
    /// Accuracy of the calibrated output on the held-out split.
    pub heldout_accuracy: f64,
    /// Balanced samples per class used for fitting.
    pub samples_per_class: usize,
}

impl PairModel {
    pub fn probability(&self, features: &[f64]) -> f64 {
        let z = self.standardizer.apply(features);
        clamp_probability(self.platt.probability(self.classifier.margin(&z)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseModel {
    pub classifier: ClassifierKind,
    /// In slot order.
    pub pairs: Vec<PairModel>,
}

impl PairwiseModel {
    pub fn get(&self, a: JointType, b: JointType) -> Result<&PairModel> {
        let key = if a.index() <= b.index() { (a, b) } else { (b, a) };
        self.pairs
            .get(pair_slot(a, b))
            .filter(|p| p.joints == key)
            .or_else(|| self.pairs.iter().find(|p| p.joints == key))
            .ok_or_else(|| Error::ModelIncomplete(pair_name(key.0, key.1)))
    }

    /// Every pair present once, in slot order, with consistent dimensions.
    pub fn validate(&self) -> Result<()> {
        if self.pairs.len() != NUM_PAIR_MODELS {
            return Err(Error::ModelIncomplete(format!(
                "expected {NUM_PAIR_MODELS} pair models, found {}",
                self.pairs.len()
            )));
        }
        for (p, (a, b)) in self.pairs.iter().zip(joint_pairs()) {
            if p.joints != (a, b) {
                return Err(Error::ModelIncomplete(pair_name(a, b)));
            }
            let want = if a == b { features::SAME_DIM } else { features::DIFF_DIM };
            let dims_ok = p.standardizer.dim() == want
                && p.standardizer.std.len() == want
                && p.classifier.dim().is_none_or(|d| d == want);
            if !dims_ok {
                return Err(Error::Structure(format!(
                    "pair model {} has the wrong dimension",
                    pair_name(a, b)
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, ModelFile::new(self.clone()).to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(ModelFile::from_json(&std::fs::read_to_string(path)?)?.model)
    }
}

/// Probability that two detections of one region belong to the same person.
pub fn pairwise_probability(model: &PairwiseModel, d: &Detection, d2: &Detection, maps: &RegionMaps) -> Result<f64> {
    endpoint_probability(model, d.into(), d2.into(), maps)
}

/// As [`pairwise_probability`], for arbitrary typed endpoints.
pub fn endpoint_probability(model: &PairwiseModel, a: Endpoint, b: Endpoint, maps: &RegionMaps) -> Result<f64> {
    let pm = model.get(a.joint, b.joint)?;
    let f = extract_features(a, b, maps)?;
    Ok(pm.probability(f.as_slice()))
}

/// Assembles the local instance of one region from already thresholded
/// detections.
pub fn build_instance(
    detections: Vec<Detection>,
    model: &PairwiseModel,
    maps: &RegionMaps,
) -> Result<AssociationInstance> {
    if detections.is_empty() {
        return Ok(AssociationInstance::empty());
    }
    let alpha = detections.iter().map(|d| unary_cost(d.confidence)).collect();
    let mut beta = PairTable::filled(detections.len(), 0.0);
    for a in 0..detections.len() {
        for b in a + 1..detections.len() {
            let p = pairwise_probability(model, &detections[a], &detections[b], maps)?;
            beta.set(a, b, log_odds_cost(p));
        }
    }
    AssociationInstance::new(detections, alpha, beta)
}

/// On-disk model with format version and feature-schema digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: String,
    pub schema_hash: String,
    #[serde(flatten)]
    pub model: PairwiseModel,
}

#[derive(Deserialize)]
struct ModelProbe {
    schema_hash: String,
}

impl ModelFile {
    pub fn new(model: PairwiseModel) -> Self {
        Self {
            version: format!("{MODEL_FORMAT}/{MODEL_MAJOR}"),
            schema_hash: schema_hash(),
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: crate::model::scene::VersionProbe = serde_json::from_str(text)?;
        check_version(&v.version, MODEL_FORMAT, MODEL_MAJOR)?;
        let probe: ModelProbe = serde_json::from_str(text)?;
        let expected = schema_hash();
        if probe.schema_hash != expected {
            return Err(Error::SchemaMismatch {
                expected,
                found: probe.schema_hash,
            });
        }
        let file: ModelFile = serde_json::from_str(text)?;
        file.model.validate()?;
        Ok(file)
    }
}
