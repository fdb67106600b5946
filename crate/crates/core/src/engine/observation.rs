//! Observation channels and their discretizations.

use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::AgentPose;
use crate::panograph::{normalize_deg, Bounds, LatLng, PanoRecord, StreetGraph};

pub const YAW_BINS: u32 = 16;
pub const LATLNG_BINS_PER_AXIS: u32 = 32;
pub const NEIGHBOR_BINS: usize = 16;
const BIN_WIDTH_DEG: f64 = 360.0 / YAW_BINS as f64;

/// Names of the channels an environment can be asked to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    ViewImage,
    GraphImage,
    Pitch,
    Yaw,
    YawLabel,
    Metadata,
    TargetMetadata,
    Latlng,
    LatlngLabel,
    TargetLatlng,
    TargetLatlngLabel,
    Thumbnails,
    Instructions,
    Neighbors,
    GroundTruthDirection,
}

impl ObservationKind {
    pub const ALL: [ObservationKind; 15] = [
        Self::ViewImage,
        Self::GraphImage,
        Self::Pitch,
        Self::Yaw,
        Self::YawLabel,
        Self::Metadata,
        Self::TargetMetadata,
        Self::Latlng,
        Self::LatlngLabel,
        Self::TargetLatlng,
        Self::TargetLatlngLabel,
        Self::Thumbnails,
        Self::Instructions,
        Self::Neighbors,
        Self::GroundTruthDirection,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::ViewImage => "view_image",
            Self::GraphImage => "graph_image",
            Self::Pitch => "pitch",
            Self::Yaw => "yaw",
            Self::YawLabel => "yaw_label",
            Self::Metadata => "metadata",
            Self::TargetMetadata => "target_metadata",
            Self::Latlng => "latlng",
            Self::LatlngLabel => "latlng_label",
            Self::TargetLatlng => "target_latlng",
            Self::TargetLatlngLabel => "target_latlng_label",
            Self::Thumbnails => "thumbnails",
            Self::Instructions => "instructions",
            Self::Neighbors => "neighbors",
            Self::GroundTruthDirection => "ground_truth_direction",
        }
    }
}

impl fmt::Display for ObservationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObservationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown observation {s:?}"))
    }
}

/// Value of one observation channel.
#[derive(Debug, Clone, PartialEq)]
pub enum ObsValue {
    Image(RgbImage),
    Images(Vec<RgbImage>),
    Scalar(f64),
    Label(u32),
    LatLng(LatLng),
    Pano(Box<PanoRecord>),
    Texts(Vec<String>),
    Bins(Vec<u8>),
    /// A target channel in a game without a target.
    Missing,
}

/// The requested channels, in request order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Observation {
    pub channels: Vec<(ObservationKind, ObsValue)>,
}

impl Observation {
    pub fn get(&self, kind: ObservationKind) -> Option<&ObsValue> {
        self.channels.iter().find(|(k, _)| *k == kind).map(|(_, v)| v)
    }

    pub fn kinds(&self) -> Vec<ObservationKind> {
        self.channels.iter().map(|(k, _)| *k).collect()
    }

    pub fn view_image(&self) -> Option<&RgbImage> {
        match self.get(ObservationKind::ViewImage) {
            Some(ObsValue::Image(img)) => Some(img),
            _ => None,
        }
    }

    pub fn graph_image(&self) -> Option<&RgbImage> {
        match self.get(ObservationKind::GraphImage) {
            Some(ObsValue::Image(img)) => Some(img),
            _ => None,
        }
    }

    pub fn scalar(&self, kind: ObservationKind) -> Option<f64> {
        match self.get(kind) {
            Some(ObsValue::Scalar(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn label(&self, kind: ObservationKind) -> Option<u32> {
        match self.get(kind) {
            Some(ObsValue::Label(v)) => Some(*v),
            _ => None,
        }
    }
}

/// 16 yaw bins centered on multiples of 22.5°, bin 0 centered on North.
pub fn discretize_yaw(yaw: f64) -> u32 {
    let bin = (normalize_deg(yaw + BIN_WIDTH_DEG / 2.0) / BIN_WIDTH_DEG).floor() as u32;
    bin.min(YAW_BINS - 1)
}

/// Row-major `lat_bin * 32 + lng_bin` over a uniform grid spanning `bounds`;
/// positions outside are clamped.
pub fn discretize_latlng(p: LatLng, bounds: &Bounds) -> u32 {
    let axis = |v: f64, lo: f64, hi: f64| -> u32 {
        if hi <= lo {
            return 0;
        }
        let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        ((t * LATLNG_BINS_PER_AXIS as f64).floor() as u32).min(LATLNG_BINS_PER_AXIS - 1)
    };
    axis(p.lat, bounds.min_lat, bounds.max_lat) * LATLNG_BINS_PER_AXIS + axis(p.lng, bounds.min_lng, bounds.max_lng)
}

/// Egocentric traversability: bin `k` covers relative bearings
/// `[k*22.5 - 11.25, k*22.5 + 11.25)`, bin 0 straight ahead.
pub fn neighbors_vector(pose: &AgentPose, graph: &StreetGraph) -> [u8; NEIGHBOR_BINS] {
    let mut bins = [0u8; NEIGHBOR_BINS];
    for &n in graph.neighbors(pose.node) {
        let rel = graph.bearing(pose.node, n) - pose.yaw;
        bins[discretize_yaw(rel) as usize] = 1;
    }
    bins
}
