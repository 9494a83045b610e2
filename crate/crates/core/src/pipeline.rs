//! Region-by-region pose estimation: candidate sampling, thresholding,
//! cost construction, solving and pose extraction.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::{build_instance, endpoint_probability, threshold_detections, Endpoint, PairwiseModel};
use crate::error::{Error, Result};
use crate::eval::{Predictions, RegionPrediction, ScenePredictions};
use crate::global::{build_global_instance, solve_global_exact_with, GlobalSolverConfig};
use crate::ljpa::{extract_pose, solve_exact_with, SolverConfig};
use crate::model::{
    clamp_probability, Detection, JointType, Keypoint, PairTable, PersonPose, Region, RegionMaps, Scene, NUM_JOINTS,
};
use crate::synth::{argmax_baseline, region_maps, sample_region, SamplingParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Argmax,
    Ljpa,
    Global,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Argmax => "argmax",
            Mode::Ljpa => "ljpa",
            Mode::Global => "global",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "argmax" => Ok(Mode::Argmax),
            "ljpa" => Ok(Mode::Ljpa),
            "global" => Ok(Mode::Global),
            _ => Err(Error::Config(format!(
                "unknown mode {s:?} (expected argmax, ljpa or global)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub mode: Mode,
    pub tau: f64,
    pub sampling: SamplingParams,
    pub max_detections: usize,
    pub max_proposals: usize,
    pub max_labels: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Ljpa,
            tau: 0.2,
            sampling: SamplingParams::default(),
            max_detections: crate::ljpa::DEFAULT_MAX_DETECTIONS,
            max_proposals: crate::global::DEFAULT_MAX_PROPOSALS,
            max_labels: crate::global::DEFAULT_MAX_LABELS,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config("tau must lie in [0, 1]".into()));
        }
        if self.sampling.n_candidates == 0 {
            return Err(Error::Config("n_candidates must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome for one region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionResult {
    /// `None` when the region was too large for the global solver.
    pub pose: Option<PersonPose>,
    pub detections: usize,
    pub solve_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionTiming {
    pub scene: String,
    pub region: usize,
    pub detections: usize,
    pub solve_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutput {
    pub predictions: Predictions,
    pub timings: Vec<RegionTiming>,
    pub skipped: usize,
}

impl SolveOutput {
    pub fn median_solve_ms(&self) -> Option<f64> {
        median(self.timings.iter().map(|t| t.solve_ms).collect())
    }
}

pub fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    })
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs the configured method on one region.
pub fn solve_region(
    scene: &Scene,
    region_index: usize,
    model: Option<&PairwiseModel>,
    cfg: &SolveConfig,
) -> Result<RegionResult> {
    let maps = region_maps(scene, region_index)?;
    let region = &scene.regions[region_index];
    if cfg.mode == Mode::Argmax {
        let t = Instant::now();
        let pose = argmax_baseline(&maps, region);
        return Ok(RegionResult {
            pose: Some(pose),
            detections: NUM_JOINTS,
            solve_ms: elapsed_ms(t),
        });
    }
    let model = model.ok_or_else(|| Error::Config(format!("mode {} needs a pairwise model", cfg.mode)))?;
    let dets = threshold_detections(&sample_region(&maps, &cfg.sampling), cfg.tau);
    let n = dets.len();
    match cfg.mode {
        Mode::Ljpa => {
            let inst = build_instance(dets, model, &maps)?;
            let t = Instant::now();
            let (sol, _) = solve_exact_with(
                &inst,
                &SolverConfig {
                    max_detections: cfg.max_detections,
                },
            )?;
            let solve_ms = elapsed_ms(t);
            Ok(RegionResult {
                pose: Some(extract_pose(&inst, &sol, region)),
                detections: n,
                solve_ms,
            })
        }
        Mode::Global => {
            let mut types: Vec<JointType> = dets.iter().map(|d| d.joint).collect();
            types.sort_by_key(|j| j.index());
            types.dedup();
            if n > cfg.max_proposals || types.len() > cfg.max_labels {
                return Ok(RegionResult {
                    pose: None,
                    detections: n,
                    solve_ms: 0.0,
                });
            }
            let (pose, solve_ms) = solve_global_region(&dets, &types, model, &maps, region, cfg)?;
            Ok(RegionResult {
                pose: Some(pose),
                detections: n,
                solve_ms,
            })
        }
        Mode::Argmax => unreachable!(),
    }
}

/// Builds the untyped global instance over `dets` with the given label set.
pub fn global_instance_for(
    dets: &[Detection],
    labels: &[JointType],
    model: &PairwiseModel,
    maps: &RegionMaps,
    single_person: bool,
) -> Result<crate::model::GlobalInstance> {
    let k = labels.len();
    let proposals = dets.iter().map(|d| d.location).collect();
    let p_label = dets
        .iter()
        .map(|d| {
            labels
                .iter()
                .map(|&j| maps.joint(j).value_at(d.location).map(clamp_probability))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut p_pair = PairTable::filled(dets.len(), vec![0.5; k * k]);
    for a in 0..dets.len() {
        for b in a + 1..dets.len() {
            let block = p_pair.get_mut(a, b);
            for (ja, &la) in labels.iter().enumerate() {
                for (jb, &lb) in labels.iter().enumerate() {
                    let ea = Endpoint {
                        joint: la,
                        id: a,
                        location: dets[a].location,
                    };
                    let eb = Endpoint {
                        joint: lb,
                        id: b,
                        location: dets[b].location,
                    };
                    block[ja * k + jb] = endpoint_probability(model, ea, eb, maps)?;
                }
            }
        }
    }
    build_global_instance(proposals, p_label, p_pair, single_person)
}

fn solve_global_region(
    dets: &[Detection],
    types: &[JointType],
    model: &PairwiseModel,
    maps: &RegionMaps,
    region: &Region,
    cfg: &SolveConfig,
) -> Result<(PersonPose, f64)> {
    let inst = global_instance_for(dets, types, model, maps, true)?;
    let t = Instant::now();
    let (sol, _) = solve_global_exact_with(
        &inst,
        &GlobalSolverConfig {
            max_proposals: cfg.max_proposals,
            max_labels: cfg.max_labels,
        },
    )?;
    let solve_ms = elapsed_ms(t);
    let mut pose = PersonPose::default();
    for d in 0..inst.len() {
        let Some(l) = sol.label_of(d) else { continue };
        let joint = types[l];
        let conf = inst.p_label[d][l];
        let better = pose.get(joint).is_none_or(|kp| conf > kp.confidence);
        if better {
            pose.set(
                joint,
                Some(Keypoint {
                    location: region.to_image(dets[d].location),
                    confidence: conf,
                }),
            );
        }
    }
    Ok((pose, solve_ms))
}

/// Solves every region of every scene on the current rayon pool. Output
/// order follows `(scene, region)` regardless of completion order.
pub fn solve_scenes(
    scenes: &[(String, Scene)],
    model: Option<&PairwiseModel>,
    cfg: &SolveConfig,
) -> Result<SolveOutput> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = scenes
        .iter()
        .enumerate()
        .flat_map(|(si, (_, s))| (0..s.regions.len()).map(move |ri| (si, ri)))
        .collect();
    let results: Vec<Result<RegionResult>> = jobs
        .par_iter()
        .map(|&(si, ri)| solve_region(&scenes[si].1, ri, model, cfg))
        .collect();
    let mut per_scene: Vec<ScenePredictions> = scenes
        .iter()
        .map(|(id, _)| ScenePredictions {
            scene: id.clone(),
            regions: Vec::new(),
        })
        .collect();
    let mut timings = Vec::with_capacity(jobs.len());
    let mut skipped = 0;
    for (&(si, ri), r) in jobs.iter().zip(results) {
        let r = r?;
        if r.pose.is_none() {
            skipped += 1;
        } else {
            timings.push(RegionTiming {
                scene: scenes[si].0.clone(),
                region: ri,
                detections: r.detections,
                solve_ms: r.solve_ms,
            });
        }
        per_scene[si].regions.push(RegionPrediction {
            region: ri,
            pose: r.pose,
        });
    }
    if skipped > 0 {
        log::warn!("{skipped} regions exceeded the global solver caps and were skipped");
    }
    Ok(SolveOutput {
        predictions: Predictions::new(cfg.mode.name(), cfg.tau, cfg.sampling.n_candidates, per_scene),
        timings,
        skipped,
    })
}

/// Joints kept in benchmark instances so that the global label count stays
/// within its cap.
pub const BENCH_JOINTS: [JointType; 4] = [
    JointType::Head,
    JointType::Neck,
    JointType::RShoulder,
    JointType::LShoulder,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub size: usize,
    pub solver: String,
    pub median_ms: f64,
    pub trials: usize,
}

pub const BENCH_HEADER: &str = "size,solver,median_ms,trials";

impl BenchRow {
    pub fn csv(&self) -> String {
        format!("{},{},{:.6},{}", self.size, self.solver, self.median_ms, self.trials)
    }
}

/// The `size` most confident candidates of the benchmark joints in a
/// region, renumbered, or `None` if the region has fewer.
pub fn bench_detections(maps: &RegionMaps, size: usize, sampling: &SamplingParams) -> Option<Vec<Detection>> {
    let mut dets: Vec<Detection> = BENCH_JOINTS
        .iter()
        .flat_map(|&j| crate::synth::sample_candidates(maps.joint(j), sampling.n_candidates, sampling.nms_radius))
        .collect();
    if dets.len() < size {
        return None;
    }
    // most confident first, then joint order for ties
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence).then(a.cmp(&b)));
    let mut keep: Vec<usize> = order.into_iter().take(size).collect();
    keep.sort_unstable();
    let mut out = Vec::with_capacity(size);
    for (id, i) in keep.into_iter().enumerate() {
        let mut d = std::mem::replace(
            &mut dets[i],
            Detection {
                id: 0,
                joint: JointType::Head,
                location: Default::default(),
                confidence: 0.0,
            },
        );
        d.id = id;
        out.push(d);
    }
    Some(out)
}

/// Median local and global solve times over the first `trials` regions
/// that provide `size` benchmark candidates, per size. Both solvers see the
/// same detections; the global problem partitions them into any number of
/// persons over the four benchmark labels.
pub fn benchmark_local_vs_global(
    scenes: &[Scene],
    model: &PairwiseModel,
    sizes: &[usize],
    trials: usize,
    sampling: &SamplingParams,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    let gcfg = GlobalSolverConfig {
        max_proposals: sizes
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
            .max(crate::global::DEFAULT_MAX_PROPOSALS),
        max_labels: BENCH_JOINTS.len(),
    };
    for &size in sizes {
        let mut local = Vec::new();
        let mut global = Vec::new();
        'scenes: for scene in scenes {
            for ri in 0..scene.regions.len() {
                if local.len() >= trials {
                    break 'scenes;
                }
                let maps = region_maps(scene, ri)?;
                let Some(dets) = bench_detections(&maps, size, sampling) else {
                    continue;
                };
                let inst = build_instance(dets.clone(), model, &maps)?;
                let t = Instant::now();
                solve_exact_with(&inst, &SolverConfig::default())?;
                local.push(elapsed_ms(t));
                let ginst = global_instance_for(&dets, &BENCH_JOINTS, model, &maps, false)?;
                let t = Instant::now();
                solve_global_exact_with(&ginst, &gcfg)?;
                global.push(elapsed_ms(t));
            }
        }
        for (name, times) in [("local", local), ("global", global)] {
            let n = times.len();
            rows.push(BenchRow {
                size,
                solver: name.to_string(),
                median_ms: median(times).unwrap_or(f64::NAN),
                trials: n,
            });
        }
    }
    Ok(rows)
}
