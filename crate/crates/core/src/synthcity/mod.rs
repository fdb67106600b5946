//! Procedural street grids standing in for real panorama datasets.
//!
//! A city is a jittered grid of `blocks_x` × `blocks_y` blocks. Every block
//! side is a straight street segment subdivided into edges of roughly
//! `node_spacing_m`. Everything is a pure function of [`CityParams`].

mod render;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panograph::{self, GraphError, LatLng, PanoRecord, StreetGraph, TangentPlane};

pub use render::{render_node, render_panorama, SyntheticPanos, CORRIDOR_HALF_WIDTH_DEG};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid city parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CityParams {
    pub seed: u64,
    pub blocks_x: u32,
    pub blocks_y: u32,
    pub block_len_m: f64,
    pub node_spacing_m: f64,
    /// Fraction in `[0, 1]`; intersections move by up to a quarter block.
    pub irregularity: f64,
    /// South-west corner of the unjittered grid.
    pub origin: LatLng,
    /// Panorama height in pixels; width is twice this.
    pub pano_height: u32,
    /// Altitude gain per kilometer northward.
    pub altitude_ramp_m_per_km: f64,
}

impl Default for CityParams {
    fn default() -> Self {
        Self {
            seed: 0,
            blocks_x: 4,
            blocks_y: 4,
            block_len_m: 80.0,
            node_spacing_m: 10.0,
            irregularity: 0.0,
            origin: LatLng::new(40.7128, -74.0060),
            pano_height: 512,
            altitude_ramp_m_per_km: 0.0,
        }
    }
}

impl CityParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidParams(msg));
        if self.blocks_x == 0 || self.blocks_y == 0 {
            return bad(format!("blocks must be at least 1x1, got {}x{}", self.blocks_x, self.blocks_y));
        }
        if !(self.node_spacing_m > 0.0) || !self.node_spacing_m.is_finite() {
            return bad(format!("node_spacing_m must be positive, got {}", self.node_spacing_m));
        }
        if !(self.block_len_m > 0.0) || !self.block_len_m.is_finite() {
            return bad(format!("block_len_m must be positive, got {}", self.block_len_m));
        }
        if !(0.0..=1.0).contains(&self.irregularity) {
            return bad(format!("irregularity must be in [0, 1], got {}", self.irregularity));
        }
        if self.pano_height < 2 {
            return bad(format!("pano_height must be at least 2, got {}", self.pano_height));
        }
        if !self.origin.is_valid() {
            return bad(format!("origin out of range: {:?}", self.origin));
        }
        Ok(())
    }

    pub fn pano_width(&self) -> u32 {
        2 * self.pano_height
    }

    pub(crate) fn plane(&self) -> TangentPlane {
        TangentPlane::new(self.origin)
    }

    fn id_prefix(&self) -> String {
        format!("c{:x}", self.seed)
    }
}

fn intersection_id(prefix: &str, ix: u32, iy: u32) -> String {
    format!("{prefix}-i{ix:04}-{iy:04}")
}

/// Builds the street graph for `params`.
pub fn generate_city(params: &CityParams) -> Result<StreetGraph, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let plane = params.plane();
    let prefix = params.id_prefix();
    let (nx, ny) = (params.blocks_x + 1, params.blocks_y + 1);
    let jitter = params.irregularity * params.block_len_m / 4.0;

    let mut corners = Vec::with_capacity((nx * ny) as usize);
    for iy in 0..ny {
        for ix in 0..nx {
            let (mut jx, mut jy) = (0.0, 0.0);
            if jitter > 0.0 {
                jx = rng.gen_range(-jitter..=jitter);
                jy = rng.gen_range(-jitter..=jitter);
            }
            corners.push((ix as f64 * params.block_len_m + jx, iy as f64 * params.block_len_m + jy));
        }
    }
    let corner = |ix: u32, iy: u32| corners[(iy * nx + ix) as usize];

    let make = |id: String, (x, y): (f64, f64)| -> PanoRecord {
        let p = plane.to_latlng(x, y);
        PanoRecord {
            id,
            lat: p.lat,
            lng: p.lng,
            altitude: params.altitude_ramp_m_per_km * y / 1000.0,
            pitch: 0.0,
            roll: 0.0,
            yaw: 0.0,
            date: "2019-01-01".to_string(),
            neighbors: Vec::new(),
        }
    };

    let mut records: Vec<PanoRecord> = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            records.push(make(intersection_id(&prefix, ix, iy), corner(ix, iy)));
        }
    }

    // (tag, from corner, to corner) for every block side
    let mut segments = Vec::new();
    for iy in 0..ny {
        for ix in 0..params.blocks_x {
            segments.push(('h', (ix, iy), (ix + 1, iy)));
        }
    }
    for iy in 0..params.blocks_y {
        for ix in 0..nx {
            segments.push(('v', (ix, iy), (ix, iy + 1)));
        }
    }

    let mut links: Vec<(String, String)> = Vec::new();
    for (tag, (ax, ay), (bx, by)) in segments {
        let a = corner(ax, ay);
        let b = corner(bx, by);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        let pieces = ((len / params.node_spacing_m).round() as u32).max(1);
        let mut prev = intersection_id(&prefix, ax, ay);
        for k in 1..pieces {
            let t = k as f64 / pieces as f64;
            let id = format!("{prefix}-{tag}{ax:04}-{ay:04}-{k:03}");
            records.push(make(id.clone(), (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))));
            links.push((prev, id.clone()));
            prev = id;
        }
        links.push((prev, intersection_id(&prefix, bx, by)));
    }

    records.sort_by(|a, b| a.id.cmp(&b.id));
    for (a, b) in links {
        let ia = records.binary_search_by(|r| r.id.as_str().cmp(&a)).expect("link endpoint exists");
        records[ia].neighbors.push(b);
    }
    if records.is_empty() {
        return Err(SynthError::InvalidParams("parameters produce no nodes".into()));
    }
    Ok(StreetGraph::from_records(records)?)
}

/// Generates a city and writes it as a container directory. Images are
/// rendered in parallel when `with_images` is set; otherwise readers fall
/// back to rendering on demand from the stored generator parameters.
pub fn write_city(dir: &Path, params: &CityParams, city: &str, with_images: bool) -> Result<StreetGraph, SynthError> {
    let graph = generate_city(params)?;
    let generator = serde_json::to_value(params).map_err(|e| SynthError::InvalidParams(e.to_string()))?;
    panograph::save_graph(dir, &graph, city, Some(generator))?;
    if with_images {
        write_images(dir, &graph, params)?;
    }
    Ok(graph)
}

/// Renders and stores the panorama of every node of `graph`.
pub fn write_images(dir: &Path, graph: &StreetGraph, params: &CityParams) -> Result<(), SynthError> {
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(16);
    let chunk = graph.len().div_ceil(workers).max(1);
    let indices: Vec<usize> = (0..graph.len()).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = indices
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || -> Result<(), SynthError> {
                    for &idx in part {
                        let img = render_node(graph, idx, params);
                        panograph::write_image(dir, &graph.node(idx).id, &img)?;
                    }
                    Ok(())
                })
            })
            .collect();
        handles
            .into_iter()
            .try_for_each(|h| h.join().expect("image writer panicked"))
    })
}

/// Generator parameters stored in a container manifest, if any.
pub fn params_from_manifest(manifest: &panograph::Manifest) -> Option<CityParams> {
    manifest
        .generator
        .as_ref()
        .and_then(|v| serde_json::from_value(v.clone()).ok())
}
