//! Street graph of panoramas.
//!
//! A [`StreetGraph`] is an immutable undirected graph whose nodes are
//! [`PanoRecord`]s. Nodes are stored sorted by id, so a node index order is
//! also the lexicographic id order; several tie-breaking rules rely on that.

mod geo;
mod paths;
mod region;
mod slpack;
mod stats;

use std::collections::HashMap;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use geo::{haversine_m, initial_bearing_deg, normalize_deg, signed_deg, LatLng, TangentPlane, EARTH_RADIUS_M};
pub use paths::{shortest_paths_to, ShortestPaths};
pub use region::{carve_region, Region, RegionSpec};
pub use slpack::{image_path, load_graph, load_manifest, read_image, save_graph, write_image, Bounds, Manifest, FORMAT_VERSION};
pub use stats::{compute_stats, GraphStats};

/// Dense node handle, valid only for the graph that produced it.
pub type NodeIdx = usize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what}: {detail}")]
    Malformed { what: String, detail: String },
    #[error("dangling neighbor reference(s): {}", format_dangling(.0))]
    DanglingNeighbors(Vec<(String, String)>),
    #[error("duplicate pano id {0:?}")]
    DuplicateId(String),
    #[error("pano {0:?} lists itself as a neighbor")]
    SelfReference(String),
    #[error("invalid pano {id:?}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("unknown pano id {0:?}")]
    UnknownPano(String),
    #[error("bearing undefined between coincident points ({0}, {1})")]
    CoincidentPoints(f64, f64),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("region contains no panoramas")]
    EmptyRegion,
    #[error("graph is empty")]
    EmptyGraph,
}

fn format_dangling(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(from, to)| format!("{from} -> {to}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// One panorama node.
///
/// Serialized field names are part of the `nodes.jsonl` contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanoRecord {
    pub id: String,
    pub lat: f64,
    pub lng: f64,
    /// Meters.
    pub altitude: f64,
    pub pitch: f64,
    pub roll: f64,
    /// Camera heading, 0 = North.
    pub yaw: f64,
    /// ISO-8601 date.
    pub date: String,
    pub neighbors: Vec<String>,
}

impl PanoRecord {
    pub fn position(&self) -> LatLng {
        LatLng::new(self.lat, self.lng)
    }

    /// Blob key of the equirectangular image inside a container.
    pub fn image_ref(&self) -> String {
        format!("images/{}.png", self.id)
    }
}

/// Uniform lat/lng bucket grid over node positions.
#[derive(Debug, Clone)]
struct SpatialIndex {
    cell_deg: f64,
    buckets: HashMap<(i64, i64), Vec<NodeIdx>>,
}

impl SpatialIndex {
    // ~110 m of latitude; a handful of nodes per bucket at 10 m spacing
    const CELL_DEG: f64 = 0.001;

    fn build(nodes: &[PanoRecord]) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<NodeIdx>> = HashMap::new();
        for (idx, n) in nodes.iter().enumerate() {
            buckets.entry(Self::key(Self::CELL_DEG, n.position())).or_default().push(idx);
        }
        Self {
            cell_deg: Self::CELL_DEG,
            buckets,
        }
    }

    fn key(cell_deg: f64, p: LatLng) -> (i64, i64) {
        ((p.lat / cell_deg).floor() as i64, (p.lng / cell_deg).floor() as i64)
    }

    fn within(&self, nodes: &[PanoRecord], center: LatLng, radius_m: f64) -> Vec<NodeIdx> {
        let dlat = (radius_m / EARTH_RADIUS_M).to_degrees();
        let cos_lat = center.lat.to_radians().cos().max(1e-6);
        let dlng = dlat / cos_lat;
        let (lo_lat, lo_lng) = Self::key(self.cell_deg, LatLng::new(center.lat - dlat, center.lng - dlng));
        let (hi_lat, hi_lng) = Self::key(self.cell_deg, LatLng::new(center.lat + dlat, center.lng + dlng));
        let mut out = Vec::new();
        for i in lo_lat..=hi_lat {
            for j in lo_lng..=hi_lng {
                if let Some(bucket) = self.buckets.get(&(i, j)) {
                    out.extend(
                        bucket
                            .iter()
                            .copied()
                            .filter(|&idx| haversine_m(center, nodes[idx].position()) <= radius_m),
                    );
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Immutable undirected street graph.
#[derive(Debug, Clone)]
pub struct StreetGraph {
    nodes: Vec<PanoRecord>,
    index: HashMap<String, NodeIdx>,
    adjacency: Vec<Vec<NodeIdx>>,
    bounds: Bounds,
    spatial: SpatialIndex,
}

impl StreetGraph {
    /// Builds a graph, validating records and mirroring one-way neighbor
    /// listings. Duplicate neighbor entries are collapsed.
    pub fn from_records(mut records: Vec<PanoRecord>) -> Result<Self, GraphError> {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(records.len());
        for (idx, r) in records.iter().enumerate() {
            if r.id.is_empty() {
                return Err(GraphError::InvalidRecord {
                    id: r.id.clone(),
                    reason: "empty id".into(),
                });
            }
            if !r.position().is_valid() {
                return Err(GraphError::InvalidRecord {
                    id: r.id.clone(),
                    reason: format!("coordinates out of range ({}, {})", r.lat, r.lng),
                });
            }
            if index.insert(r.id.clone(), idx).is_some() {
                return Err(GraphError::DuplicateId(r.id.clone()));
            }
        }

        let mut dangling = Vec::new();
        let mut edges: Vec<HashSet<NodeIdx>> = vec![HashSet::new(); records.len()];
        for (idx, r) in records.iter().enumerate() {
            for nb in &r.neighbors {
                if *nb == r.id {
                    return Err(GraphError::SelfReference(r.id.clone()));
                }
                match index.get(nb) {
                    Some(&j) => {
                        edges[idx].insert(j);
                        edges[j].insert(idx);
                    }
                    None => dangling.push((r.id.clone(), nb.clone())),
                }
            }
        }
        if !dangling.is_empty() {
            return Err(GraphError::DanglingNeighbors(dangling));
        }

        let adjacency: Vec<Vec<NodeIdx>> = edges
            .into_iter()
            .map(|set| {
                let mut v: Vec<_> = set.into_iter().collect();
                v.sort_unstable();
                v
            })
            .collect();
        let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
        for (idx, r) in records.iter_mut().enumerate() {
            r.neighbors = adjacency[idx].iter().map(|&j| ids[j].clone()).collect();
        }

        let bounds = Bounds::of(records.iter().map(PanoRecord::position));
        let spatial = SpatialIndex::build(&records);
        Ok(Self {
            nodes: records,
            index,
            adjacency,
            bounds,
            spatial,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn node(&self, idx: NodeIdx) -> &PanoRecord {
        &self.nodes[idx]
    }

    pub fn nodes(&self) -> &[PanoRecord] {
        &self.nodes
    }

    pub fn idx(&self, id: &str) -> Option<NodeIdx> {
        self.index.get(id).copied()
    }

    pub fn require(&self, id: &str) -> Result<NodeIdx, GraphError> {
        self.idx(id).ok_or_else(|| GraphError::UnknownPano(id.to_string()))
    }

    /// Neighbors of a node, in ascending id order.
    pub fn neighbors(&self, idx: NodeIdx) -> &[NodeIdx] {
        &self.adjacency[idx]
    }

    pub fn position(&self, idx: NodeIdx) -> LatLng {
        self.nodes[idx].position()
    }

    /// Each undirected edge once, as `(a, b)` with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeIdx, NodeIdx)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, nbs)| nbs.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    /// Nodes within `radius_m` of `center`, in ascending index order.
    pub fn nodes_within(&self, center: LatLng, radius_m: f64) -> Vec<NodeIdx> {
        self.spatial.within(&self.nodes, center, radius_m)
    }

    /// Bearing of the edge `from -> to` in degrees `[0, 360)`.
    pub fn bearing(&self, from: NodeIdx, to: NodeIdx) -> f64 {
        // coincident neighbors have no direction; treat them as due North
        initial_bearing_deg(self.position(from), self.position(to)).unwrap_or(0.0)
    }

    /// Induced subgraph on `keep`.
    pub fn subgraph(&self, keep: &[NodeIdx]) -> Result<StreetGraph, GraphError> {
        let keep_set: HashSet<NodeIdx> = keep.iter().copied().collect();
        let records = keep
            .iter()
            .map(|&idx| {
                let mut r = self.nodes[idx].clone();
                r.neighbors = self.adjacency[idx]
                    .iter()
                    .filter(|j| keep_set.contains(j))
                    .map(|&j| self.nodes[j].id.clone())
                    .collect();
                r
            })
            .collect();
        StreetGraph::from_records(records)
    }

    /// Number of connected components.
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(n) = stack.pop() {
                for &m in &self.adjacency[n] {
                    if !seen[m] {
                        seen[m] = true;
                        stack.push(m);
                    }
                }
            }
        }
        count
    }
}
