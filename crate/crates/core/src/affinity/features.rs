//! Pair features for the same-person classifiers.
//!
//! Same-type pairs use the offset in units of the region diagonal together
//! with its componentwise exponential and square. Different-type pairs use
//! the pixel offset, its length and direction, and the full score vector
//! read at both locations.

use std::f64::consts::PI;

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::model::{Detection, JointType, Point, RegionMaps, NUM_CHANNELS};

pub const SAME_DIM: usize = 6;
pub const DIFF_DIM: usize = 4 + 2 * NUM_CHANNELS;

/// Human-readable layout of both feature vectors; its digest is stored in
/// model files.
pub const FEATURE_SCHEMA: &str = "same[6]=du/diag,dv/diag,exp(du/diag),exp(dv/diag),(du/diag)^2,(dv/diag)^2;\
diff[34]=du,dv,norm,atan2(dv,du) in (-pi,pi],scores(first)[15],scores(second)[15];\
order=(joint index,id);diag=region diagonal";

pub fn schema_hash() -> String {
    hex::encode(Sha256::digest(FEATURE_SCHEMA.as_bytes()))
}

/// The endpoint of a pair: a joint type at a location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint {
    pub joint: JointType,
    pub id: usize,
    pub location: Point,
}

impl From<&Detection> for Endpoint {
    fn from(d: &Detection) -> Self {
        Self {
            joint: d.joint,
            id: d.id,
            location: d.location,
        }
    }
}

/// Orders two endpoints by (joint index, id).
pub fn canonical(a: Endpoint, b: Endpoint) -> (Endpoint, Endpoint) {
    if (b.joint.index(), b.id) < (a.joint.index(), a.id) {
        (b, a)
    } else {
        (a, b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairFeatures {
    Same([f64; SAME_DIM]),
    Diff([f64; DIFF_DIM]),
}

impl PairFeatures {
    pub fn as_slice(&self) -> &[f64] {
        match self {
            PairFeatures::Same(f) => f,
            PairFeatures::Diff(f) => f,
        }
    }
}

pub fn same_features(du: f64, dv: f64) -> [f64; SAME_DIM] {
    [du, dv, du.exp(), dv.exp(), du * du, dv * dv]
}

/// Direction of `(du, dv)` in `(-pi, pi]`.
pub fn angle(du: f64, dv: f64) -> f64 {
    let a = dv.atan2(du);
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Features of a pair after putting it in canonical order.
pub fn extract_features(a: Endpoint, b: Endpoint, maps: &RegionMaps) -> Result<PairFeatures> {
    let (a, b) = canonical(a, b);
    let sa = maps.score_vector(a.location)?;
    let sb = maps.score_vector(b.location)?;
    let du = b.location.u - a.location.u;
    let dv = b.location.v - a.location.v;
    if a.joint == b.joint {
        let diag = (maps.width() as f64).hypot(maps.height() as f64);
        return Ok(PairFeatures::Same(same_features(du / diag, dv / diag)));
    }
    let mut f = [0.0; DIFF_DIM];
    f[0] = du;
    f[1] = dv;
    f[2] = du.hypot(dv);
    f[3] = angle(du, dv);
    f[4..4 + NUM_CHANNELS].copy_from_slice(&sa);
    f[4 + NUM_CHANNELS..].copy_from_slice(&sb);
    Ok(PairFeatures::Diff(f))
}
