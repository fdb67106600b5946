//! Procedural equirectangular panoramas.
//!
//! The scene is column-separable: each column is either a street corridor
//! (one per incident edge, centered on the edge bearing) or a building facade
//! belonging to the block that faces the node in that sector. Rows only pick
//! sky, facade or ground for that column class. Column `c` covers bearings
//! `[c, c+1) * 360 / W - 180`, matching the projector convention.

use std::sync::Arc;

use image::RgbImage;

use super::CityParams;
use crate::engine::PanoSource;
use crate::panograph::{signed_deg, GraphError, NodeIdx, StreetGraph};

/// Angular half-width of a painted street corridor.
pub const CORRIDOR_HALF_WIDTH_DEG: f64 = 12.0;
const CENTER_LINE_HALF_WIDTH_DEG: f64 = 0.6;
const NORTH_MARKER_HALF_WIDTH_DEG: f64 = 1.5;
const NORTH_MARKER_HALF_HEIGHT_DEG: f64 = 5.0;
// how far into a sector the facade's block is looked up
const FACADE_PROBE_M: f64 = 30.0;

const ASPHALT: [u8; 3] = [58, 58, 62];
const CENTER_LINE: [u8; 3] = [235, 200, 40];
const SIDEWALK: [u8; 3] = [150, 144, 132];
const NORTH_MARKER: [u8; 3] = [255, 0, 0];
const HAZE: [u8; 3] = [170, 180, 195];

#[derive(Debug, Clone, Copy)]
enum Column {
    Corridor { center_line: bool },
    Facade { palette: Palette },
}

#[derive(Debug, Clone, Copy)]
struct Palette {
    wall: [u8; 3],
    window: [u8; 3],
    /// Elevation of the roofline in degrees.
    height_deg: f64,
}

impl Palette {
    fn for_block(seed: u64, bx: i64, by: i64) -> Self {
        let h = splitmix64(seed ^ (bx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (by as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F));
        let byte = |shift: u32| ((h >> shift) & 0xff) as u8;
        let wall = [60 + byte(0) / 2 + byte(8) / 4, 50 + byte(16) / 2, 40 + byte(24) / 2];
        let window = [byte(32) / 4, 40 + byte(40) / 4, 70 + byte(48) / 3];
        let height_deg = 22.0 + (byte(56) % 24) as f64;
        Self {
            wall,
            window,
            height_deg,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sky(elevation: f64) -> [u8; 3] {
    let t = (elevation / 90.0).clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    [lerp(200.0, 70.0), lerp(220.0, 120.0), lerp(240.0, 200.0)]
}

/// Renders the panorama of pano `node_id`.
pub fn render_panorama(graph: &StreetGraph, node_id: &str, params: &CityParams) -> Result<RgbImage, GraphError> {
    let idx = graph.require(node_id)?;
    Ok(render_node(graph, idx, params))
}

pub fn render_node(graph: &StreetGraph, idx: NodeIdx, params: &CityParams) -> RgbImage {
    let height = params.pano_height;
    let width = 2 * height;
    let plane = params.plane();
    let (px, py) = plane.to_local(graph.position(idx));

    let mut street_bearings: Vec<f64> = graph.neighbors(idx).iter().map(|&n| graph.bearing(idx, n)).collect();
    street_bearings.sort_by(f64::total_cmp);

    let block_palette = |bearing: f64| {
        let (s, c) = bearing.to_radians().sin_cos();
        let x = px + FACADE_PROBE_M * s;
        let y = py + FACADE_PROBE_M * c;
        let bx = (x / params.block_len_m).floor() as i64;
        let by = (y / params.block_len_m).floor() as i64;
        Palette::for_block(params.seed, bx, by)
    };

    // One palette per facade sector, probed at the sector's mid bearing.
    let sector_palettes: Vec<Palette> = match street_bearings.len() {
        0 => vec![block_palette(180.0)],
        n => (0..n)
            .map(|i| {
                let start = street_bearings[i];
                let end = if i + 1 < n { street_bearings[i + 1] } else { street_bearings[0] + 360.0 };
                block_palette((start + end) / 2.0)
            })
            .collect(),
    };

    let columns: Vec<(Column, f64)> = (0..width)
        .map(|c| {
            let bearing = (c as f64 + 0.5) / width as f64 * 360.0 - 180.0;
            let nearest = street_bearings
                .iter()
                .map(|&b| signed_deg(bearing - b).abs())
                .fold(f64::INFINITY, f64::min);
            let class = if nearest <= CORRIDOR_HALF_WIDTH_DEG {
                Column::Corridor {
                    center_line: nearest <= CENTER_LINE_HALF_WIDTH_DEG,
                }
            } else {
                let b = bearing.rem_euclid(360.0);
                // sector i spans [street_bearings[i], street_bearings[i+1])
                let sector = match street_bearings.iter().rposition(|&s| s <= b) {
                    Some(i) => i,
                    None => street_bearings.len().saturating_sub(1),
                };
                Column::Facade {
                    palette: sector_palettes[sector.min(sector_palettes.len() - 1)],
                }
            };
            (class, bearing)
        })
        .collect();

    let mut buf = vec![0u8; (width * height * 3) as usize];
    for (r, row) in buf.chunks_exact_mut((width * 3) as usize).enumerate() {
        let elevation = 90.0 - (r as f64 + 0.5) / height as f64 * 180.0;
        let sky_color = sky(elevation);
        for ((class, bearing), px_out) in columns.iter().zip(row.chunks_exact_mut(3)) {
            let color = if bearing.abs() <= NORTH_MARKER_HALF_WIDTH_DEG && elevation.abs() <= NORTH_MARKER_HALF_HEIGHT_DEG {
                NORTH_MARKER
            } else {
                match *class {
                    Column::Corridor { center_line } => {
                        if elevation >= 0.0 {
                            if elevation < 4.0 {
                                HAZE
                            } else {
                                sky_color
                            }
                        } else if center_line {
                            CENTER_LINE
                        } else {
                            ASPHALT
                        }
                    }
                    Column::Facade { palette } => {
                        if elevation < 0.0 {
                            SIDEWALK
                        } else if elevation > palette.height_deg {
                            sky_color
                        } else {
                            let wx = (bearing / 5.0).rem_euclid(1.0);
                            let wy = (elevation / 6.0).rem_euclid(1.0);
                            if (0.3..0.7).contains(&wx) && (0.35..0.75).contains(&wy) && elevation > 3.0 {
                                palette.window
                            } else {
                                palette.wall
                            }
                        }
                    }
                }
            };
            px_out.copy_from_slice(&color);
        }
    }
    RgbImage::from_raw(width, height, buf).expect("buffer sized to panorama")
}

/// Renders panoramas on demand for a generated city.
#[derive(Debug, Clone)]
pub struct SyntheticPanos {
    graph: Arc<StreetGraph>,
    params: CityParams,
}

impl SyntheticPanos {
    pub fn new(graph: Arc<StreetGraph>, params: CityParams) -> Self {
        Self { graph, params }
    }
}

impl PanoSource for SyntheticPanos {
    fn load(&self, id: &str) -> Result<RgbImage, GraphError> {
        render_panorama(&self.graph, id, &self.params)
    }
}
