//! Per-joint average precision of predicted poses against ground truth.
//!
//! For each joint type, predictions from all scenes are ranked by
//! confidence and matched greedily, in that order, to the nearest unmatched
//! ground-truth joint of the same type and scene within a radius
//! proportional to that person's head length. Left and right joints are
//! pooled into seven columns before computing AP.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_version, Error, Result};
use crate::model::{JointGroup, JointType, PersonPose, Point, Scene, NUM_JOINTS};

pub const PRED_FORMAT: &str = "jpa-pred";
pub const PRED_MAJOR: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Match radius as a fraction of the ground-truth head length.
    pub match_fraction: f64,
    /// Regions with an area at or below this are ignored.
    pub min_region_area: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            match_fraction: 0.5,
            min_region_area: 80 * 80,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.match_fraction > 0.0) {
            return Err(Error::Config("match_fraction must be positive".into()));
        }
        Ok(())
    }

    pub fn keeps(&self, region: &crate::model::Region) -> bool {
        region.area() > self.min_region_area
    }
}

/// The pose predicted for one region, or `None` when the region was skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPrediction {
    pub region: usize,
    pub pose: Option<PersonPose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePredictions {
    pub scene: String,
    pub regions: Vec<RegionPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub version: String,
    pub mode: String,
    pub tau: f64,
    pub n_candidates: usize,
    pub scenes: Vec<ScenePredictions>,
}

#[derive(Deserialize)]
struct PredProbe {
    version: String,
}

impl Predictions {
    pub fn new(mode: &str, tau: f64, n_candidates: usize, scenes: Vec<ScenePredictions>) -> Self {
        Self {
            version: format!("{PRED_FORMAT}/{PRED_MAJOR}"),
            mode: mode.to_string(),
            tau,
            n_candidates,
            scenes,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: PredProbe = serde_json::from_str(text)?;
        check_version(&probe.version, PRED_FORMAT, PRED_MAJOR)?;
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Ranked detections of one joint type (or pooled group) with their match
/// outcome, plus the number of ground-truth joints.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrData {
    /// `(confidence, true positive)`, highest confidence first.
    pub ranked: Vec<(f64, bool)>,
    pub num_gt: usize,
}

impl PrData {
    /// Merges several sets and re-ranks them; ties keep the input order.
    pub fn pooled<'a>(parts: impl IntoIterator<Item = &'a PrData>) -> PrData {
        let mut out = PrData::default();
        for p in parts {
            out.ranked.extend_from_slice(&p.ranked);
            out.num_gt += p.num_gt;
        }
        out.ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
        out
    }

    /// `(precision, recall)` after each ranked prediction.
    pub fn curve(&self) -> Vec<(f64, f64)> {
        let mut tp = 0usize;
        self.ranked
            .iter()
            .enumerate()
            .map(|(k, &(_, hit))| {
                tp += hit as usize;
                let recall = if self.num_gt == 0 {
                    0.0
                } else {
                    tp as f64 / self.num_gt as f64
                };
                (tp as f64 / (k + 1) as f64, recall)
            })
            .collect()
    }

    pub fn average_precision(&self) -> Option<f64> {
        if self.num_gt == 0 {
            return None;
        }
        Some(average_precision(&self.curve()))
    }
}

/// Area under the precision envelope of `(precision, recall)` points in
/// rank order, summed over recall increments.
pub fn average_precision(curve: &[(f64, f64)]) -> f64 {
    let mut envelope: Vec<f64> = curve.iter().map(|c| c.0).collect();
    for k in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for (&(_, r), p) in curve.iter().zip(&envelope) {
        ap += (r - prev_recall) * p;
        prev_recall = r;
    }
    ap.clamp(0.0, 1.0)
}

struct GtJoint {
    at: Point,
    radius: f64,
}

/// Matches all predictions and returns ranked outcomes per joint type.
///
/// Scenes absent from `preds` contribute ground truth only. A prediction for
/// an unknown scene or region is an error.
pub fn match_and_score(preds: &Predictions, scenes: &[(String, Scene)], cfg: &EvalConfig) -> Result<Vec<PrData>> {
    cfg.validate()?;
    let index: HashMap<&str, usize> = scenes.iter().enumerate().map(|(i, (id, _))| (id.as_str(), i)).collect();
    if index.len() != scenes.len() {
        return Err(Error::Structure("duplicate scene ids".into()));
    }
    // gt[joint][scene] lists the primary persons' visible joints of kept regions
    let mut gt: Vec<Vec<Vec<GtJoint>>> = (0..NUM_JOINTS)
        .map(|_| (0..scenes.len()).map(|_| Vec::new()).collect())
        .collect();
    for (si, (_, scene)) in scenes.iter().enumerate() {
        for region in scene.regions.iter().filter(|r| cfg.keeps(r)) {
            let person = scene
                .persons
                .get(region.person)
                .ok_or_else(|| Error::Structure(format!("region refers to missing person {}", region.person)))?;
            let radius = cfg.match_fraction * person.head_length();
            for j in JointType::ALL {
                let g = person.joint(j);
                if g.visible {
                    gt[j.index()][si].push(GtJoint {
                        at: g.location(),
                        radius,
                    });
                }
            }
        }
    }
    let mut candidates: Vec<Vec<(f64, usize, Point)>> = vec![Vec::new(); NUM_JOINTS];
    for sp in &preds.scenes {
        let &si = index
            .get(sp.scene.as_str())
            .ok_or_else(|| Error::Structure(format!("prediction for unknown scene {}", sp.scene)))?;
        let scene = &scenes[si].1;
        for rp in &sp.regions {
            let region = scene
                .regions
                .get(rp.region)
                .ok_or_else(|| Error::Structure(format!("scene {} has no region {}", sp.scene, rp.region)))?;
            if !cfg.keeps(region) {
                continue;
            }
            let Some(pose) = &rp.pose else { continue };
            for j in JointType::ALL {
                if let Some(kp) = pose.get(j) {
                    candidates[j.index()].push((kp.confidence, si, kp.location));
                }
            }
        }
    }
    let mut out = Vec::with_capacity(NUM_JOINTS);
    for (j, mut cands) in candidates.into_iter().enumerate() {
        cands.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut used: Vec<Vec<bool>> = gt[j].iter().map(|g| vec![false; g.len()]).collect();
        let mut ranked = Vec::with_capacity(cands.len());
        for (conf, si, at) in cands {
            let mut best: Option<(usize, f64)> = None;
            for (k, g) in gt[j][si].iter().enumerate() {
                let d = g.at.distance(at);
                if used[si][k] || d > g.radius {
                    continue;
                }
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((k, d));
                }
            }
            if let Some((k, _)) = best {
                used[si][k] = true;
            }
            ranked.push((conf, best.is_some()));
        }
        out.push(PrData {
            ranked,
            num_gt: gt[j].iter().map(Vec::len).sum(),
        });
    }
    Ok(out)
}

/// AP per pooled column and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MapReport {
    /// In [`JointGroup::ALL`] order; `None` when the column has no ground truth.
    pub columns: [Option<f64>; 7],
    pub total: Option<f64>,
}

pub const REPORT_HEADER: &str = "setting,head,shoulder,elbow,wrist,hip,knee,ankle,total,median_solve_ms";

/// Pools left/right joints (and head/neck) and averages the columns.
pub fn map_report(per_joint: &[PrData]) -> MapReport {
    assert_eq!(per_joint.len(), NUM_JOINTS);
    let mut columns = [None; 7];
    for (c, g) in columns.iter_mut().zip(JointGroup::ALL) {
        let pooled = PrData::pooled(g.members().map(|j| &per_joint[j.index()]));
        *c = pooled.average_precision();
        if c.is_none() {
            log::warn!("no ground truth for {}; column excluded from the total", g.name());
        }
    }
    let present: Vec<f64> = columns.iter().flatten().copied().collect();
    let total = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
    MapReport { columns, total }
}

fn fmt_ap(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |v| format!("{:.4}", v))
}

impl MapReport {
    pub fn csv_row(&self, setting: &str, median_solve_ms: Option<f64>) -> String {
        let mut s = setting.to_string();
        for c in &self.columns {
            s.push(',');
            s.push_str(&fmt_ap(*c));
        }
        s.push(',');
        s.push_str(&fmt_ap(self.total));
        s.push(',');
        s.push_str(&median_solve_ms.map_or_else(String::new, |m| format!("{m:.3}")));
        s
    }

    /// Percentages in a fixed-width table.
    pub fn pretty(&self, setting: &str) -> String {
        let mut s = format!("{:<16}", "Setting");
        for g in JointGroup::ALL {
            let _ = write!(s, "{:>9}", g.title());
        }
        let _ = writeln!(s, "{:>9}", "Total");
        let _ = write!(s, "{setting:<16}");
        let pct = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{:.1}", 100.0 * v));
        for c in &self.columns {
            let _ = write!(s, "{:>9}", pct(*c));
        }
        let _ = writeln!(s, "{:>9}", pct(self.total));
        s
    }
}

/// Matches, pools and averages in one step.
pub fn evaluate(preds: &Predictions, scenes: &[(String, Scene)], cfg: &EvalConfig) -> Result<MapReport> {
    Ok(map_report(&match_and_score(preds, scenes, cfg)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pr(ranked: &[(f64, bool)], num_gt: usize) -> PrData {
        PrData {
            ranked: ranked.to_vec(),
            num_gt,
        }
    }

    #[test]
    fn envelope_example() {
        assert_eq!(average_precision(&[(1.0, 0.5), (0.5, 0.5)]), 0.5);
    }

    #[test]
    fn perfect_and_empty() {
        assert_eq!(pr(&[(0.9, true), (0.8, true)], 2).average_precision(), Some(1.0));
        assert_eq!(pr(&[(0.9, false), (0.8, false)], 2).average_precision(), Some(0.0));
        assert_eq!(pr(&[], 3).average_precision(), Some(0.0));
        assert_eq!(pr(&[(0.9, false)], 0).average_precision(), None);
    }

    #[test]
    fn envelope_uses_later_precision() {
        // ranks: miss, hit, hit against 2 GT; precision 0, 1/2, 2/3
        let d = pr(&[(0.9, false), (0.8, true), (0.7, true)], 2);
        let ap = d.average_precision().unwrap();
        assert!((ap - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn report_header_order() {
        let titles: Vec<&str> = JointGroup::ALL.iter().map(|g| g.name()).collect();
        assert_eq!(titles, ["head", "shoulder", "elbow", "wrist", "hip", "knee", "ankle"]);
        assert!(REPORT_HEADER.starts_with("setting,head,shoulder,elbow,wrist,hip,knee,ankle,total"));
    }

    #[test]
    fn all_ones_report() {
        let d = pr(&[(1.0, true)], 1);
        let r = map_report(&vec![d; NUM_JOINTS]);
        assert!(r.columns.iter().all(|c| *c == Some(1.0)));
        assert_eq!(r.total, Some(1.0));
        assert_eq!(
            r.csv_row("x", Some(1.5)),
            "x,1.0000,1.0000,1.0000,1.0000,1.0000,1.0000,1.0000,1.0000,1.500"
        );
    }

    #[test]
    fn missing_column_is_excluded_from_total() {
        let mut per = vec![pr(&[(1.0, true)], 1); NUM_JOINTS];
        per[JointType::Head.index()] = pr(&[], 0);
        per[JointType::Neck.index()] = pr(&[], 0);
        let r = map_report(&per);
        assert_eq!(r.columns[0], None);
        assert_eq!(r.total, Some(1.0));
        assert!(r.pretty("t").contains('-'));
    }
}
