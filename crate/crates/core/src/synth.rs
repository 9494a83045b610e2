//! Synthetic multi-person scenes and the per-region score maps a
//! single-person detector would emit for them.
//!
//! A region's map for joint `j` is the pixelwise maximum over persons whose
//! joint `j` is visible of `scale * strength * exp(-d^2 / 2 sigma^2)`,
//! where `scale` is 1 for the region's primary person and the distractor
//! attenuation otherwise, plus uniform noise, clipped to `[0, 1]`. The
//! background channel is one minus the largest joint response.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Channel, Detection, GroundTruthPerson, GtJoint, JointType, Keypoint, PersonPose, Point, Region, RegionMaps,
    RenderParams, Scene, ScoreMap, NUM_JOINTS, SCENE_FORMAT,
};

/// Gaussians are evaluated out to this many sigmas.
const GAUSSIAN_SUPPORT: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub image_width: usize,
    pub image_height: usize,
    /// Inclusive range of persons per scene.
    pub persons: (usize, usize),
    /// Inclusive range of person heights in pixels.
    pub person_height: (f64, f64),
    /// 0 places neighbours about half a body height apart; larger values
    /// pull them closer.
    pub overlap: f64,
    pub sigma: f64,
    /// Peak scale for joints of non-primary persons.
    pub attenuation: f64,
    pub noise_amplitude: f64,
    /// Probability that a joint is occluded.
    pub visibility_dropout: f64,
    /// Visible joints peak at a strength drawn from `[1 - jitter, 1]`.
    pub strength_jitter: f64,
    /// Region size relative to the person's bounding box (> 1).
    pub region_margin: f64,
    /// Region centre offset as a fraction of the region size.
    pub region_jitter: f64,
    /// Spread of limb angles; 0 gives the rest pose.
    pub articulation: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            image_width: 640,
            image_height: 400,
            persons: (1, 3),
            person_height: (160.0, 200.0),
            overlap: 0.5,
            sigma: 5.0,
            attenuation: 0.7,
            noise_amplitude: 0.1,
            visibility_dropout: 0.1,
            strength_jitter: 0.3,
            region_margin: 1.2,
            region_jitter: 0.03,
            articulation: 1.0,
            seed: 0,
        }
    }
}

pub const PRESETS: [&str; 3] = ["clean", "occluded", "crowded"];

impl SynthConfig {
    /// Named configurations: `clean`, `occluded` and `crowded`.
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self::default();
        match name {
            "clean" => Ok(Self {
                persons: (1, 1),
                noise_amplitude: 0.0,
                visibility_dropout: 0.0,
                strength_jitter: 0.0,
                region_jitter: 0.0,
                ..base
            }),
            "occluded" => Ok(Self {
                persons: (1, 3),
                overlap: 0.8,
                noise_amplitude: 0.15,
                visibility_dropout: 0.3,
                strength_jitter: 0.5,
                ..base
            }),
            "crowded" => Ok(Self {
                persons: (2, 4),
                overlap: 1.5,
                noise_amplitude: 0.1,
                visibility_dropout: 0.15,
                strength_jitter: 0.3,
                ..base
            }),
            other => Err(Error::Config(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.image_width == 0 || self.image_height == 0 {
            return fail("image size must be positive");
        }
        if self.persons.0 == 0 || self.persons.0 > self.persons.1 {
            return fail("person count range must satisfy 1 <= min <= max");
        }
        if !(self.person_height.0 > 0.0 && self.person_height.0 <= self.person_height.1) {
            return fail("person height range must be positive and ordered");
        }
        if self.person_height.1 * self.region_margin >= self.image_height as f64 {
            return fail("persons do not fit in the image");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return fail("sigma must be positive");
        }
        for (name, v) in [
            ("attenuation", self.attenuation),
            ("visibility_dropout", self.visibility_dropout),
            ("strength_jitter", self.strength_jitter),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.noise_amplitude >= 0.0
            && self.overlap >= 0.0
            && self.region_jitter >= 0.0
            && self.articulation >= 0.0)
        {
            return fail("noise, overlap, jitter and articulation must be non-negative");
        }
        if !(self.region_margin > 1.0) {
            return fail("region margin must exceed 1");
        }
        Ok(())
    }

    pub fn render_params(&self) -> RenderParams {
        RenderParams {
            sigma: self.sigma,
            attenuation: self.attenuation,
            noise_amplitude: self.noise_amplitude,
        }
    }
}

/// SplitMix64 step; derives independent seeds from a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rotate(du: f64, dv: f64, angle: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    (du * c - dv * s, du * s + dv * c)
}

/// Joint locations of one person relative to the hip centre.
fn sample_skeleton(rng: &mut ChaCha8Rng, height: f64, articulation: f64) -> [Point; NUM_JOINTS] {
    let h = height;
    let mut jit = |s: f64| rng.gen_range(-s..=s) * articulation;
    let neck = Point::new(jit(0.02 * h), -0.30 * h + jit(0.01 * h));
    let (hu, hv) = rotate(0.0, -0.12 * h, jit(0.25));
    let head = neck.offset(hu, hv);
    let mut pts = [Point::default(); NUM_JOINTS];
    pts[JointType::Head.index()] = head;
    pts[JointType::Neck.index()] = neck;
    // side = -1 for the person's right, which appears on the image left
    for (side, shoulder, elbow, wrist, hip, knee, ankle) in [
        (
            -1.0,
            JointType::RShoulder,
            JointType::RElbow,
            JointType::RWrist,
            JointType::RHip,
            JointType::RKnee,
            JointType::RAnkle,
        ),
        (
            1.0,
            JointType::LShoulder,
            JointType::LElbow,
            JointType::LWrist,
            JointType::LHip,
            JointType::LKnee,
            JointType::LAnkle,
        ),
    ] {
        let sh = neck.offset(side * 0.10 * h, 0.03 * h);
        let upper = side * (0.15 + (jit(0.7) + 0.7 * articulation).max(-0.3));
        let (eu, ev) = rotate(0.0, 0.17 * h, -upper);
        let el = sh.offset(eu, ev);
        let fore = upper + side * (jit(1.0) + 0.6 * articulation);
        let (wu, wv) = rotate(0.0, 0.15 * h, -fore);
        let wr = el.offset(wu, wv);
        let hp = Point::new(side * 0.06 * h, 0.0);
        let thigh = side * 0.05 + jit(0.2);
        let (ku, kv) = rotate(0.0, 0.21 * h, -thigh);
        let kn = hp.offset(ku, kv);
        let (au, av) = rotate(0.0, 0.22 * h, -(thigh + jit(0.25)));
        let an = kn.offset(au, av);
        pts[shoulder.index()] = sh;
        pts[elbow.index()] = el;
        pts[wrist.index()] = wr;
        pts[hip.index()] = hp;
        pts[knee.index()] = kn;
        pts[ankle.index()] = an;
    }
    pts
}

fn person_region(
    person: &GroundTruthPerson,
    index: usize,
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
    image: (usize, usize),
) -> Region {
    let (lo, hi) = person.bounds();
    let bw = (hi.u - lo.u).max(0.4 * (hi.v - lo.v));
    let bh = hi.v - lo.v;
    let w = (bw * cfg.region_margin).round().max(1.0);
    let h = (bh * cfg.region_margin).round().max(1.0);
    let cu = 0.5 * (lo.u + hi.u) + cfg.region_jitter * w * rng.gen_range(-1.0..=1.0);
    let cv = 0.5 * (lo.v + hi.v) + cfg.region_jitter * h * rng.gen_range(-1.0..=1.0);
    let clamp = |start: f64, size: f64, limit: usize| -> (usize, usize) {
        let size = (size as usize).min(limit).max(1);
        let start = start.round().max(0.0) as usize;
        (start.min(limit - size), size)
    };
    let (x, width) = clamp(cu - 0.5 * w, w, image.0);
    let (y, height) = clamp(cv - 0.5 * h, h, image.1);
    Region {
        person: index,
        x,
        y,
        width,
        height,
        noise_seed: rng.gen(),
    }
}

/// Generates one scene from `cfg.seed`, with rendered maps attached.
pub fn generate_scene(cfg: &SynthConfig) -> Result<Scene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let count = rng.gen_range(cfg.persons.0..=cfg.persons.1);
    let heights: Vec<f64> = (0..count)
        .map(|_| rng.gen_range(cfg.person_height.0..=cfg.person_height.1))
        .collect();
    let mean_h = heights.iter().sum::<f64>() / count as f64;
    let spacing = 0.45 * mean_h / (1.0 + cfg.overlap);
    let span = spacing * (count - 1) as f64;
    let (iw, ih) = (cfg.image_width as f64, cfg.image_height as f64);
    let slack = ((iw - span) * 0.5 - 0.3 * mean_h).max(0.0);
    let start = 0.5 * iw - 0.5 * span + rng.gen_range(-1.0..=1.0) * slack * 0.5;
    let mut persons = Vec::with_capacity(count);
    for (i, &h) in heights.iter().enumerate() {
        let skeleton = sample_skeleton(&mut rng, h, cfg.articulation);
        let cu = start + spacing * i as f64 + rng.gen_range(-0.1..=0.1) * spacing;
        let cv = 0.5 * ih + rng.gen_range(-0.05..=0.05) * h;
        let mut joints = [GtJoint {
            u: 0.0,
            v: 0.0,
            visible: false,
            strength: 0.0,
        }; NUM_JOINTS];
        for (gt, p) in joints.iter_mut().zip(skeleton) {
            let (u, v) = (cu + p.u, cv + p.v);
            let inside = u >= 0.0 && v >= 0.0 && u <= iw - 1.0 && v <= ih - 1.0;
            let visible = inside && !rng.gen_bool(cfg.visibility_dropout);
            let strength = if visible {
                1.0 - cfg.strength_jitter * rng.gen::<f64>()
            } else {
                0.0
            };
            *gt = GtJoint {
                u,
                v,
                visible,
                strength,
            };
        }
        persons.push(GroundTruthPerson { joints });
    }
    let regions = persons
        .iter()
        .enumerate()
        .map(|(i, p)| person_region(p, i, cfg, &mut rng, (cfg.image_width, cfg.image_height)))
        .collect();
    let mut scene = Scene {
        version: format!("{SCENE_FORMAT}/1"),
        width: cfg.image_width,
        height: cfg.image_height,
        persons,
        regions,
        render: cfg.render_params(),
        maps: None,
    };
    let maps = (0..scene.regions.len())
        .map(|r| render_region(&scene, r))
        .collect::<Result<_>>()?;
    scene.maps = Some(maps);
    scene.validate()?;
    Ok(scene)
}

/// Generates `count` scenes with seeds derived from `cfg.seed`.
pub fn generate_scenes(cfg: &SynthConfig, count: usize) -> Result<Vec<Scene>> {
    (0..count)
        .map(|i| {
            let cfg = SynthConfig {
                seed: derive_seed(cfg.seed, i as u64),
                ..cfg.clone()
            };
            generate_scene(&cfg)
        })
        .collect()
}

/// Renders the J+1 maps of one region from the scene's ground truth.
pub fn render_region(scene: &Scene, region_index: usize) -> Result<RegionMaps> {
    let region = scene
        .regions
        .get(region_index)
        .ok_or_else(|| Error::Structure(format!("scene has no region {region_index}")))?;
    let params = &scene.render;
    if !(params.sigma > 0.0) {
        return Err(Error::Config("sigma must be positive".into()));
    }
    let (w, h) = (region.width, region.height);
    let mut rng = ChaCha8Rng::seed_from_u64(region.noise_seed);
    let reach = GAUSSIAN_SUPPORT * params.sigma;
    let inv = 1.0 / (2.0 * params.sigma * params.sigma);
    let mut maps = Vec::with_capacity(NUM_JOINTS + 1);
    let mut peak = vec![0.0f32; w * h];
    for joint in JointType::ALL {
        let mut map = ScoreMap::zeros(Channel::Joint(joint), w, h);
        for (pi, person) in scene.persons.iter().enumerate() {
            let gt = person.joint(joint);
            if !gt.visible {
                continue;
            }
            let scale = if pi == region.person { 1.0 } else { params.attenuation };
            let amp = scale * gt.strength;
            let c = region.to_local(gt.location());
            let c0 = ((c.u - reach).floor().max(0.0)) as usize;
            let r0 = ((c.v - reach).floor().max(0.0)) as usize;
            let c1 = (c.u + reach).ceil().min(w as f64 - 1.0);
            let r1 = (c.v + reach).ceil().min(h as f64 - 1.0);
            if c1 < 0.0 || r1 < 0.0 {
                continue;
            }
            for row in r0..=r1 as usize {
                for col in c0..=c1 as usize {
                    let d2 = (col as f64 - c.u).powi(2) + (row as f64 - c.v).powi(2);
                    let val = (amp * (-d2 * inv).exp()) as f32;
                    if val > map.get(col, row) {
                        map.set(col, row, val);
                    }
                }
            }
        }
        if params.noise_amplitude > 0.0 {
            for v in map.values.iter_mut() {
                *v += rng.gen_range(0.0..params.noise_amplitude) as f32;
            }
        }
        for (v, p) in map.values.iter_mut().zip(peak.iter_mut()) {
            *v = v.clamp(0.0, 1.0);
            *p = p.max(*v);
        }
        maps.push(map);
    }
    let background = ScoreMap {
        channel: Channel::Background,
        width: w,
        height: h,
        values: peak.iter().map(|p| 1.0 - p).collect(),
    };
    maps.push(background);
    RegionMaps::new(maps)
}

/// The scene's stored maps for a region, or a fresh rendering.
pub fn region_maps(scene: &Scene, region_index: usize) -> Result<Cow<'_, RegionMaps>> {
    match scene.maps.as_ref().and_then(|m| m.get(region_index)) {
        Some(m) => Ok(Cow::Borrowed(m)),
        None => render_region(scene, region_index).map(Cow::Owned),
    }
}

/// Whether pixel `(col, row)` is a local maximum: positive, no smaller than
/// any 8-neighbour, and strictly above the neighbours that precede it in
/// row-major order so a plateau yields one representative.
fn is_local_max(map: &ScoreMap, col: usize, row: usize) -> bool {
    let v = map.get(col, row);
    if v <= 0.0 {
        return false;
    }
    for dr in -1i64..=1 {
        for dc in -1i64..=1 {
            if dr == 0 && dc == 0 {
                continue;
            }
            let (r, c) = (row as i64 + dr, col as i64 + dc);
            if r < 0 || c < 0 || r >= map.height as i64 || c >= map.width as i64 {
                continue;
            }
            let n = map.get(c as usize, r as usize);
            let precedes = dr < 0 || (dr == 0 && dc < 0);
            if n > v || (precedes && n == v) {
                return false;
            }
        }
    }
    true
}

/// Up to `n` candidates: local maxima taken greedily by descending score,
/// skipping any closer than `nms_radius` to one already taken.
///
/// Candidates carry ids `0..` in output order and the map value as their
/// confidence. A background map yields no candidates.
pub fn sample_candidates(map: &ScoreMap, n: usize, nms_radius: f64) -> Vec<Detection> {
    let Channel::Joint(joint) = map.channel else {
        return Vec::new();
    };
    let mut maxima: Vec<(f32, usize)> = Vec::new();
    for row in 0..map.height {
        for col in 0..map.width {
            if is_local_max(map, col, row) {
                maxima.push((map.get(col, row), row * map.width + col));
            }
        }
    }
    maxima.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<Detection> = Vec::new();
    for (value, idx) in maxima {
        if out.len() >= n {
            break;
        }
        let p = Point::new((idx % map.width) as f64, (idx / map.width) as f64);
        if out.iter().any(|d| d.location.distance(p) < nms_radius) {
            continue;
        }
        out.push(Detection {
            id: out.len(),
            joint,
            location: p,
            confidence: value as f64,
        });
    }
    out
}

/// Candidate extraction settings shared by training and inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    /// Candidates per joint map.
    pub n_candidates: usize,
    /// About two Gaussian widths at the default sigma, so that noise on the
    /// flank of one peak does not yield extra candidates.
    pub nms_radius: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            n_candidates: 5,
            nms_radius: 10.0,
        }
    }
}

/// Candidates of every joint map of a region, joint by joint, with ids
/// renumbered densely in that order.
pub fn sample_region(maps: &RegionMaps, params: &SamplingParams) -> Vec<Detection> {
    let mut out = Vec::new();
    for joint in JointType::ALL {
        for mut d in sample_candidates(maps.joint(joint), params.n_candidates, params.nms_radius) {
            d.id = out.len();
            out.push(d);
        }
    }
    out
}

/// The single-person baseline: every joint at its map's global maximum
/// (first in row-major order on ties), mapped to image coordinates.
pub fn argmax_baseline(maps: &RegionMaps, region: &Region) -> PersonPose {
    let mut pose = PersonPose::default();
    for joint in JointType::ALL {
        let map = maps.joint(joint);
        let (idx, value) =
            map.values.iter().enumerate().fold(
                (0usize, f32::NEG_INFINITY),
                |best, (i, &v)| if v > best.1 { (i, v) } else { best },
            );
        let local = Point::new((idx % map.width) as f64, (idx / map.width) as f64);
        pose.set(
            joint,
            Some(Keypoint {
                location: region.to_image(local),
                confidence: value as f64,
            }),
        );
    }
    pose
}
