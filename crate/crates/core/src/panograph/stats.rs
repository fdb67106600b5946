//! Region statistics in the column order `#nodes #edges av. edge len.
//! elev. change area`.

use serde::{Deserialize, Serialize};

use super::{haversine_m, GraphError, LatLng, StreetGraph, TangentPlane};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub num_nodes: usize,
    /// Undirected edges, each counted once.
    pub num_edges: usize,
    /// Mean haversine edge length in meters, 0 without edges.
    pub avg_edge_len_m: f64,
    /// Max minus min altitude, meters.
    pub elev_change_m: f64,
    /// Convex-hull area of node positions in a tangent plane about the
    /// centroid, km².
    pub area_km2: f64,
}

impl GraphStats {
    pub const HEADER: &'static str = "#nodes\t#edges\tav. edge len.\telev. change\tarea";

    /// Tab-separated row matching [`GraphStats::HEADER`].
    pub fn table_row(&self) -> String {
        format!(
            "{}\t{}\t{:.3}m\t{:.3}m\t{:.6}km2",
            self.num_nodes, self.num_edges, self.avg_edge_len_m, self.elev_change_m, self.area_km2
        )
    }
}

pub fn compute_stats(graph: &StreetGraph) -> Result<GraphStats, GraphError> {
    if graph.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    let mut total_len = 0.0;
    let mut num_edges = 0usize;
    for (a, b) in graph.edges() {
        total_len += haversine_m(graph.position(a), graph.position(b));
        num_edges += 1;
    }
    let avg_edge_len_m = if num_edges > 0 { total_len / num_edges as f64 } else { 0.0 };

    let (lo, hi) = graph
        .nodes()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), n| (lo.min(n.altitude), hi.max(n.altitude)));

    let n = graph.len() as f64;
    let centroid = graph.nodes().iter().fold(LatLng::new(0.0, 0.0), |acc, r| LatLng::new(acc.lat + r.lat / n, acc.lng + r.lng / n));
    let plane = TangentPlane::new(centroid);
    let points: Vec<(f64, f64)> = graph.nodes().iter().map(|r| plane.to_local(r.position())).collect();
    let area_km2 = polygon_area(&convex_hull(points)) / 1e6;

    Ok(GraphStats {
        num_nodes: graph.len(),
        num_edges,
        avg_edge_len_m,
        elev_change_m: hi - lo,
        area_km2,
    })
}

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    }
    let mut lower: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let twice: f64 = poly
        .iter()
        .zip(poly.iter().cycle().skip(1))
        .map(|(a, b)| a.0 * b.1 - b.0 * a.1)
        .sum();
    twice.abs() / 2.0
}
