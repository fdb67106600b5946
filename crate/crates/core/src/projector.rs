//! Equirectangular to perspective projection.
//!
//! Panorama convention, shared with the synthetic renderer: column 0 starts
//! at bearing -180°, the center column starts at bearing 0° (North), and rows
//! run linearly from elevation +90° (top) to -90° (bottom). In continuous
//! pixel coordinates the center of pixel `(c, r)` sits at `(c, r)`, so bearing
//! `b` maps to `x = (b + 180) / 360 * W - 0.5`.
//!
//! Views are square pinhole frusta with equal horizontal and vertical field
//! of view. Pixels are sampled at their centers and filtered bilinearly with
//! 8-bit fixed-point weights; columns wrap around the ±180° seam and rows
//! clamp at the poles.

use image::RgbImage;
use thiserror::Error;

use crate::panograph::normalize_deg;

#[derive(Debug, Error, PartialEq)]
pub enum ProjectError {
    #[error("panorama must be non-empty with width = 2 x height, got {0}x{1}")]
    BadPano(u32, u32),
    #[error("invalid view: {0}")]
    InvalidView(String),
}

/// Camera orientation and output size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewSpec {
    /// Degrees, 0 = North, clockwise positive, normalized to `[0, 360)`.
    pub yaw: f64,
    /// Degrees, positive up.
    pub pitch: f64,
    /// Degrees, both axes.
    pub fov: f64,
    pub out_size: u32,
}

impl ViewSpec {
    pub fn new(yaw: f64, pitch: f64, fov: f64, out_size: u32) -> Result<Self, ProjectError> {
        if !(fov > 0.0 && fov < 180.0) {
            return Err(ProjectError::InvalidView(format!("fov {fov} outside (0, 180)")));
        }
        if out_size == 0 {
            return Err(ProjectError::InvalidView("out_size must be at least 1".into()));
        }
        if !(-90.0..=90.0).contains(&pitch) {
            return Err(ProjectError::InvalidView(format!("pitch {pitch} outside [-90, 90]")));
        }
        if !yaw.is_finite() {
            return Err(ProjectError::InvalidView(format!("yaw {yaw} is not finite")));
        }
        Ok(Self {
            yaw: normalize_deg(yaw),
            pitch,
            fov,
            out_size,
        })
    }

    pub fn focal_px(&self) -> f64 {
        focal_px(self.fov, self.out_size)
    }
}

fn focal_px(fov: f64, out_size: u32) -> f64 {
    (out_size as f64 / 2.0) / (fov.to_radians() / 2.0).tan()
}

/// Ray through a pixel center as (bearing offset from yaw, elevation), in
/// degrees. Independent of yaw, which is a rotation about the vertical axis.
fn ray_offset(pitch: f64, fov: f64, out_size: u32, px: u32, py: u32) -> (f64, f64) {
    let half = out_size as f64 / 2.0;
    let f = focal_px(fov, out_size);
    let u = px as f64 + 0.5 - half;
    let v = half - (py as f64 + 0.5);
    let (s, c) = pitch.to_radians().sin_cos();
    let y = v * c + f * s;
    let z = -v * s + f * c;
    let bearing = u.atan2(z).to_degrees();
    let elevation = y.atan2(u.hypot(z)).to_degrees();
    (bearing, elevation)
}

/// Direction of the ray through the center of pixel `(px, py)` as
/// `(bearing in [0, 360), elevation in [-90, 90])`.
pub fn pixel_ray(view: &ViewSpec, px: u32, py: u32) -> (f64, f64) {
    let (off, elev) = ray_offset(view.pitch, view.fov, view.out_size, px, py);
    (normalize_deg(view.yaw + off), elev)
}

fn row_of(elevation: f64, height: u32) -> f64 {
    ((90.0 - elevation) / 180.0 * height as f64 - 0.5).clamp(0.0, height as f64 - 1.0)
}

/// Continuous source pixel `(x, y)` sampled for every output pixel, in
/// row-major output order. `x` is wrapped into `[0, width)`.
pub fn source_coordinates(view: &ViewSpec, width: u32, height: u32) -> Vec<(f64, f64)> {
    let table = RayTable::build(view.pitch, view.fov, view.out_size, width, height);
    let yaw_cols = view.yaw / 360.0 * width as f64;
    table.cells.iter().map(|cell| (table.column(cell, yaw_cols), cell.y)).collect()
}

#[derive(Debug, Clone)]
struct RayCell {
    /// Column offset relative to the yaw column, already shifted by
    /// `W/2 - 0.5`.
    x_off: f64,
    y: f64,
    row0: u32,
    row1: u32,
    wy: u32,
}

/// Per-pixel rays for one (pitch, fov, size, panorama size) combination.
#[derive(Debug, Clone)]
struct RayTable {
    key: (u64, u64, u32, u32, u32),
    width: u32,
    cells: Vec<RayCell>,
}

impl RayTable {
    fn build(pitch: f64, fov: f64, out_size: u32, width: u32, height: u32) -> Self {
        let mut cells = Vec::with_capacity((out_size * out_size) as usize);
        let w = width as f64;
        for py in 0..out_size {
            for px in 0..out_size {
                let (off, elev) = ray_offset(pitch, fov, out_size, px, py);
                let y = row_of(elev, height);
                let row0 = y.floor() as u32;
                let row1 = (row0 + 1).min(height - 1);
                let wy = ((y - row0 as f64) * 256.0).round() as u32;
                cells.push(RayCell {
                    x_off: off / 360.0 * w + (w / 2.0 - 0.5),
                    y,
                    row0,
                    row1,
                    wy,
                });
            }
        }
        Self {
            key: (pitch.to_bits(), fov.to_bits(), out_size, width, height),
            width,
            cells,
        }
    }

    fn column(&self, cell: &RayCell, yaw_cols: f64) -> f64 {
        let w = self.width as f64;
        // x_off lies in (W/4 - 1, 3W/4) and yaw_cols in [0, W), so one
        // correction gives the same result as rem_euclid without fmod
        let mut x = cell.x_off + yaw_cols;
        if x < 0.0 {
            x += w;
        } else if x >= w {
            x -= w;
        }
        if x >= w {
            0.0
        } else {
            x
        }
    }
}

/// Projects panoramas, memoizing ray tables across calls with the same
/// pitch, fov and sizes.
#[derive(Debug, Default, Clone)]
pub struct Projector {
    tables: Vec<RayTable>,
}

impl Projector {
    const MAX_TABLES: usize = 8;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn project(&mut self, pano: &RgbImage, view: &ViewSpec) -> Result<RgbImage, ProjectError> {
        let (w, h) = pano.dimensions();
        if h == 0 || w != 2 * h {
            return Err(ProjectError::BadPano(w, h));
        }
        let key = (view.pitch.to_bits(), view.fov.to_bits(), view.out_size, w, h);
        let pos = match self.tables.iter().position(|t| t.key == key) {
            Some(pos) => pos,
            None => {
                if self.tables.len() == Self::MAX_TABLES {
                    self.tables.remove(0);
                }
                self.tables.push(RayTable::build(view.pitch, view.fov, view.out_size, w, h));
                self.tables.len() - 1
            }
        };
        let table = &self.tables[pos];
        let src = pano.as_raw();
        let stride = w as usize * 3;
        let yaw_cols = view.yaw / 360.0 * w as f64;
        let mut out = vec![0u8; table.cells.len() * 3];
        for (cell, dst) in table.cells.iter().zip(out.chunks_exact_mut(3)) {
            // x is non-negative, so truncation after +0.5 rounds to the
            // nearest 1/256 of a pixel; a carry into the next column wraps
            let q = (table.column(cell, yaw_cols) * 256.0 + 0.5) as u32;
            let mut col0 = q >> 8;
            if col0 >= w {
                col0 -= w;
            }
            let col1 = if col0 + 1 == w { 0 } else { col0 + 1 };
            let (wx, wy) = (q & 0xff, cell.wy);
            let w00 = (256 - wx) * (256 - wy);
            let w10 = wx * (256 - wy);
            let w01 = (256 - wx) * wy;
            let w11 = wx * wy;
            let r0 = cell.row0 as usize * stride;
            let r1 = cell.row1 as usize * stride;
            let (c0, c1) = (col0 as usize * 3, col1 as usize * 3);
            for ch in 0..3 {
                let acc = src[r0 + c0 + ch] as u32 * w00
                    + src[r0 + c1 + ch] as u32 * w10
                    + src[r1 + c0 + ch] as u32 * w01
                    + src[r1 + c1 + ch] as u32 * w11;
                dst[ch] = ((acc + 32768) >> 16) as u8;
            }
        }
        Ok(RgbImage::from_raw(view.out_size, view.out_size, out).expect("buffer sized to view"))
    }
}

/// One-shot projection without table reuse.
pub fn project(pano: &RgbImage, view: &ViewSpec) -> Result<RgbImage, ProjectError> {
    Projector::new().project(pano, view)
}
