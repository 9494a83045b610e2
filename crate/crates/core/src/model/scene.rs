use std::path::Path;

use serde::{Deserialize, Serialize};

use super::joint::{Channel, JointType, NUM_CHANNELS, NUM_JOINTS};
use crate::error::{check_version, Error, Result};

pub const SCENE_FORMAT: &str = "jpa-scene";
pub const SCENE_MAJOR: u32 = 1;

/// A 2D location in pixels; `u` is the column and `v` the row.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub u: f64,
    pub v: f64,
}

impl Point {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    pub fn offset(self, du: f64, dv: f64) -> Point {
        Point::new(self.u + du, self.v + dv)
    }

    pub fn is_finite(self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// Per-pixel confidences for one channel over a region, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMap {
    pub channel: Channel,
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

impl ScoreMap {
    pub fn zeros(channel: Channel, width: usize, height: usize) -> Self {
        Self {
            channel,
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn from_values(channel: Channel, width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Structure("score map dimensions must be positive".into()));
        }
        if values.len() != width * height {
            return Err(Error::Structure(format!(
                "score map of {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Structure("score map values must lie in [0, 1]".into()));
        }
        Ok(Self {
            channel,
            width,
            height,
            values,
        })
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f32 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, value: f32) {
        self.values[row * self.width + col] = value;
    }

    /// Pixel containing `p`, or an out-of-bounds error.
    pub fn pixel_of(&self, p: Point) -> Result<(usize, usize)> {
        let col = p.u.round();
        let row = p.v.round();
        if !p.is_finite() || col < 0.0 || row < 0.0 || col >= self.width as f64 || row >= self.height as f64 {
            return Err(Error::OutOfBounds {
                u: p.u,
                v: p.v,
                width: self.width,
                height: self.height,
            });
        }
        Ok((col as usize, row as usize))
    }

    pub fn value_at(&self, p: Point) -> Result<f64> {
        let (c, r) = self.pixel_of(p)?;
        Ok(self.get(c, r) as f64)
    }
}

/// The J+1 score maps of one region, indexed by channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionMaps {
    maps: Vec<ScoreMap>,
}

impl RegionMaps {
    pub fn new(maps: Vec<ScoreMap>) -> Result<Self> {
        if maps.len() != NUM_CHANNELS {
            return Err(Error::Structure(format!(
                "a region needs {NUM_CHANNELS} score maps, got {}",
                maps.len()
            )));
        }
        let (w, h) = (maps[0].width, maps[0].height);
        for (i, m) in maps.iter().enumerate() {
            if m.channel.index() != i || m.width != w || m.height != h {
                return Err(Error::Structure(format!("score map {i} has wrong channel or size")));
            }
        }
        Ok(Self { maps })
    }

    pub fn joint(&self, j: JointType) -> &ScoreMap {
        &self.maps[j.index()]
    }

    pub fn background(&self) -> &ScoreMap {
        &self.maps[NUM_JOINTS]
    }

    pub fn channels(&self) -> &[ScoreMap] {
        &self.maps
    }

    pub fn width(&self) -> usize {
        self.maps[0].width
    }

    pub fn height(&self) -> usize {
        self.maps[0].height
    }

    /// Confidences of all joints and the background at `p`.
    pub fn score_vector(&self, p: Point) -> Result<[f64; NUM_CHANNELS]> {
        let (c, r) = self.maps[0].pixel_of(p)?;
        let mut out = [0.0; NUM_CHANNELS];
        for (o, m) in out.iter_mut().zip(&self.maps) {
            *o = m.get(c, r) as f64;
        }
        Ok(out)
    }
}

/// A predicted joint with its confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub location: Point,
    pub confidence: f64,
}

/// A single person's pose; `None` marks an invisible or truncated joint.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PersonPose {
    pub joints: [Option<Keypoint>; NUM_JOINTS],
}

impl PersonPose {
    pub fn get(&self, j: JointType) -> Option<&Keypoint> {
        self.joints[j.index()].as_ref()
    }

    pub fn set(&mut self, j: JointType, kp: Option<Keypoint>) {
        self.joints[j.index()] = kp;
    }

    pub fn visible_count(&self) -> usize {
        self.joints.iter().flatten().count()
    }
}

/// Ground-truth joint annotation. Location is known even when occluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtJoint {
    pub u: f64,
    pub v: f64,
    pub visible: bool,
    /// Peak height of this joint's response in the rendered score map.
    #[serde(default = "one")]
    pub strength: f64,
}

fn one() -> f64 {
    1.0
}

impl GtJoint {
    pub fn location(&self) -> Point {
        Point::new(self.u, self.v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthPerson {
    pub joints: [GtJoint; NUM_JOINTS],
}

impl GroundTruthPerson {
    pub fn joint(&self, j: JointType) -> &GtJoint {
        &self.joints[j.index()]
    }

    /// Head-segment length (head top to neck), the normaliser for match radii.
    pub fn head_length(&self) -> f64 {
        self.joint(JointType::Head)
            .location()
            .distance(self.joint(JointType::Neck).location())
    }

    /// Tight bounding box over all joints, visible or not: (min, max).
    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for j in &self.joints {
            lo.u = lo.u.min(j.u);
            lo.v = lo.v.min(j.v);
            hi.u = hi.u.max(j.u);
            hi.v = hi.v.max(j.v);
        }
        (lo, hi)
    }
}

/// Axis-aligned box around one primary person, in integer image pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Index of the primary person in `Scene::persons`.
    pub person: usize,
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
    /// Seed for the additive noise of this region's rendered maps.
    pub noise_seed: u64,
}

impl Region {
    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }

    pub fn to_image(&self, p: Point) -> Point {
        p.offset(self.x as f64, self.y as f64)
    }

    pub fn to_local(&self, p: Point) -> Point {
        p.offset(-(self.x as f64), -(self.y as f64))
    }
}

/// Parameters that turn ground truth into score maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderParams {
    pub sigma: f64,
    pub attenuation: f64,
    pub noise_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub version: String,
    pub width: usize,
    pub height: usize,
    pub persons: Vec<GroundTruthPerson>,
    pub regions: Vec<Region>,
    pub render: RenderParams,
    /// Rendered maps per region; omitted from files unless requested since
    /// they are reproducible from `render` and each region's noise seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maps: Option<Vec<RegionMaps>>,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        check_version(&self.version, SCENE_FORMAT, SCENE_MAJOR)?;
        if self.width == 0 || self.height == 0 {
            return Err(Error::Structure("scene image size must be positive".into()));
        }
        if self.regions.len() != self.persons.len() {
            return Err(Error::Structure(format!(
                "{} regions for {} persons",
                self.regions.len(),
                self.persons.len()
            )));
        }
        for (i, r) in self.regions.iter().enumerate() {
            if r.person != i {
                return Err(Error::Structure(format!("region {i} belongs to person {}", r.person)));
            }
            if r.width == 0 || r.height == 0 || r.x + r.width > self.width || r.y + r.height > self.height {
                return Err(Error::Structure(format!("region {i} is empty or leaves the image")));
            }
        }
        if let Some(maps) = &self.maps {
            if maps.len() != self.regions.len() {
                return Err(Error::Structure("one set of maps per region required".into()));
            }
            for (m, r) in maps.iter().zip(&self.regions) {
                if m.width() != r.width || m.height() != r.height {
                    return Err(Error::Structure("map size differs from its region".into()));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        check_version(&probe.version, SCENE_FORMAT, SCENE_MAJOR)?;
        let scene: Scene = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// The scene without its rendered maps.
    pub fn without_maps(&self) -> Scene {
        Scene {
            maps: None,
            ..self.clone()
        }
    }
}

/// Reads only the format tag so the version can be checked before the body.
#[derive(Deserialize)]
pub(crate) struct VersionProbe {
    pub version: String,
}
