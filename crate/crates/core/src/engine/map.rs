//! Top-down map of the street graph with the agent, its view cone and the
//! goal drawn on top.

use image::{Rgb, RgbImage};

use super::AgentPose;
use crate::panograph::{LatLng, NodeIdx, StreetGraph, TangentPlane};

const BACKGROUND: Rgb<u8> = Rgb([0, 0, 0]);
const STREET: Rgb<u8> = Rgb([110, 110, 110]);
const AGENT: Rgb<u8> = Rgb([40, 220, 40]);
const CONE: Rgb<u8> = Rgb([40, 140, 40]);
const GOAL: Rgb<u8> = Rgb([230, 40, 40]);

/// Renders map frames. The street layer is drawn once at construction.
#[derive(Debug, Clone)]
pub struct MapRenderer {
    size: u32,
    plane: TangentPlane,
    scale: f64,
    offset: (f64, f64),
    streets: RgbImage,
}

impl MapRenderer {
    pub fn new(graph: &StreetGraph, size: u32) -> Self {
        let bounds = graph.bounds();
        let plane = TangentPlane::new(bounds.center());
        let (x0, y0) = plane.to_local(LatLng::new(bounds.min_lat, bounds.min_lng));
        let (x1, y1) = plane.to_local(LatLng::new(bounds.max_lat, bounds.max_lng));
        let span = (x1 - x0).max(y1 - y0).max(1.0);
        let margin = 2.0;
        let usable = (size as f64 - 1.0 - 2.0 * margin).max(1.0);
        let scale = usable / span;
        // center the extent in the frame
        let offset = (
            margin + (usable - (x1 - x0) * scale) / 2.0 - x0 * scale,
            margin + (usable - (y1 - y0) * scale) / 2.0 - y0 * scale,
        );
        let mut renderer = Self {
            size,
            plane,
            scale,
            offset,
            streets: RgbImage::from_pixel(size, size, BACKGROUND),
        };
        let mut streets = renderer.streets.clone();
        for (a, b) in graph.edges() {
            let pa = renderer.pixel(graph.position(a));
            let pb = renderer.pixel(graph.position(b));
            draw_line(&mut streets, pa, pb, STREET);
        }
        renderer.streets = streets;
        renderer
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    /// Frame coordinates of a position; North is up.
    pub fn pixel(&self, p: LatLng) -> (f64, f64) {
        let (x, y) = self.plane.to_local(p);
        let px = x * self.scale + self.offset.0;
        let py = self.size as f64 - 1.0 - (y * self.scale + self.offset.1);
        (px, py)
    }

    pub fn render(&self, graph: &StreetGraph, pose: &AgentPose, goal: Option<NodeIdx>) -> RgbImage {
        let mut img = self.streets.clone();
        let at = self.pixel(graph.position(pose.node));
        let reach = (self.size as f64 / 10.0).max(3.0);
        for edge in [-pose.fov / 2.0, pose.fov / 2.0] {
            let (s, c) = (pose.yaw + edge).to_radians().sin_cos();
            draw_line(&mut img, at, (at.0 + reach * s, at.1 - reach * c), CONE);
        }
        if let Some(g) = goal {
            draw_dot(&mut img, self.pixel(graph.position(g)), GOAL);
        }
        draw_dot(&mut img, at, AGENT);
        img
    }
}

fn put(img: &mut RgbImage, x: i64, y: i64, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

fn draw_dot(img: &mut RgbImage, (x, y): (f64, f64), color: Rgb<u8>) {
    let (cx, cy) = (x.round() as i64, y.round() as i64);
    for dy in -1..=1 {
        for dx in -1..=1 {
            put(img, cx + dx, cy + dy, color);
        }
    }
}

fn draw_line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), color: Rgb<u8>) {
    let (mut x0, mut y0) = (a.0.round() as i64, a.1.round() as i64);
    let (x1, y1) = (b.0.round() as i64, b.1.round() as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        put(img, x0, y0, color);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}
