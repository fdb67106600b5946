//! Carving sub-regions out of a street graph.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{GraphError, LatLng, NodeIdx, StreetGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionSpec {
    /// All nodes within `depth` hops of `center_id`.
    Bfs { center_id: String, depth: u32 },
    BBox {
        min_lat: f64,
        min_lng: f64,
        max_lat: f64,
        max_lng: f64,
    },
    Polygon { vertices: Vec<LatLng> },
}

impl RegionSpec {
    pub fn validate(&self) -> Result<(), GraphError> {
        match self {
            RegionSpec::Bfs { center_id, .. } if center_id.is_empty() => {
                Err(GraphError::InvalidRegion("empty BFS center id".into()))
            }
            RegionSpec::Bfs { .. } => Ok(()),
            RegionSpec::BBox {
                min_lat,
                min_lng,
                max_lat,
                max_lng,
            } => {
                if min_lat < max_lat && min_lng < max_lng {
                    Ok(())
                } else {
                    Err(GraphError::InvalidRegion(format!(
                        "bounding box needs min < max per axis, got ({min_lat}, {min_lng}) .. ({max_lat}, {max_lng})"
                    )))
                }
            }
            RegionSpec::Polygon { vertices } if vertices.len() < 3 => Err(GraphError::InvalidRegion(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            ))),
            RegionSpec::Polygon { .. } => Ok(()),
        }
    }
}

/// A carved subgraph and its connected-component count.
#[derive(Debug, Clone)]
pub struct Region {
    pub graph: StreetGraph,
    pub components: usize,
}

pub fn carve_region(graph: &StreetGraph, spec: &RegionSpec) -> Result<Region, GraphError> {
    spec.validate()?;
    let keep: Vec<NodeIdx> = match spec {
        RegionSpec::Bfs { center_id, depth } => bfs_ball(graph, graph.require(center_id)?, *depth),
        RegionSpec::BBox {
            min_lat,
            min_lng,
            max_lat,
            max_lng,
        } => (0..graph.len())
            .filter(|&i| {
                let p = graph.position(i);
                (*min_lat..=*max_lat).contains(&p.lat) && (*min_lng..=*max_lng).contains(&p.lng)
            })
            .collect(),
        RegionSpec::Polygon { vertices } => (0..graph.len())
            .filter(|&i| point_in_polygon(graph.position(i), vertices))
            .collect(),
    };
    if keep.is_empty() {
        return Err(GraphError::EmptyRegion);
    }
    let sub = graph.subgraph(&keep)?;
    let components = sub.component_count();
    Ok(Region { graph: sub, components })
}

fn bfs_ball(graph: &StreetGraph, center: NodeIdx, depth: u32) -> Vec<NodeIdx> {
    let mut hops = vec![u32::MAX; graph.len()];
    let mut queue = VecDeque::new();
    hops[center] = 0;
    queue.push_back(center);
    let mut keep = vec![center];
    while let Some(u) = queue.pop_front() {
        if hops[u] == depth {
            continue;
        }
        for &v in graph.neighbors(u) {
            if hops[v] == u32::MAX {
                hops[v] = hops[u] + 1;
                keep.push(v);
                queue.push_back(v);
            }
        }
    }
    keep.sort_unstable();
    keep
}

/// Even-odd ray casting in the lat/lng plane.
fn point_in_polygon(p: LatLng, vertices: &[LatLng]) -> bool {
    let mut inside = false;
    let mut j = vertices.len() - 1;
    for i in 0..vertices.len() {
        let (a, b) = (vertices[i], vertices[j]);
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let lng_at = a.lng + (p.lat - a.lat) / (b.lat - a.lat) * (b.lng - a.lng);
            if p.lng < lng_at {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;

    fn ids(region: &Region) -> Vec<String> {
        region.graph.nodes().iter().map(|n| n.id.clone()).collect()
    }

    #[test]
    fn bfs_depth_one_on_line() {
        let g = line(&["A", "B", "C", "D"]);
        let r = carve_region(
            &g,
            &RegionSpec::Bfs {
                center_id: "A".into(),
                depth: 1,
            },
        )
        .unwrap();
        assert_eq!(ids(&r), ["A", "B"]);
        assert_eq!(r.components, 1);
        assert_eq!(r.graph.edge_count(), 1);
    }

    #[test]
    fn bfs_depth_zero_is_center_only() {
        let g = line(&["A", "B", "C"]);
        let r = carve_region(
            &g,
            &RegionSpec::Bfs {
                center_id: "B".into(),
                depth: 0,
            },
        )
        .unwrap();
        assert_eq!(ids(&r), ["B"]);
        assert!(r.graph.node(0).neighbors.is_empty());
    }

    #[test]
    fn unknown_center() {
        let g = line(&["A", "B"]);
        let spec = RegionSpec::Bfs {
            center_id: "X".into(),
            depth: 3,
        };
        assert!(matches!(carve_region(&g, &spec), Err(GraphError::UnknownPano(_))));
    }

    #[test]
    fn bbox_and_polygon_select_interior() {
        let g = line(&["A", "B", "C", "D"]);
        let lat_b = g.node(1).lat;
        let lat_c = g.node(2).lat;
        let bbox = RegionSpec::BBox {
            min_lat: lat_b - 1e-7,
            min_lng: -74.1,
            max_lat: lat_c + 1e-7,
            max_lng: -73.9,
        };
        assert_eq!(ids(&carve_region(&g, &bbox).unwrap()), ["B", "C"]);

        let poly = RegionSpec::Polygon {
            vertices: vec![
                LatLng::new(lat_b - 1e-7, -74.1),
                LatLng::new(lat_b - 1e-7, -73.9),
                LatLng::new(lat_c + 1e-7, -74.0),
            ],
        };
        assert_eq!(ids(&carve_region(&g, &poly).unwrap()), ["B", "C"]);
    }

    #[test]
    fn invalid_specs() {
        let g = line(&["A", "B"]);
        let two = RegionSpec::Polygon {
            vertices: vec![LatLng::new(0.0, 0.0), LatLng::new(1.0, 1.0)],
        };
        assert!(matches!(carve_region(&g, &two), Err(GraphError::InvalidRegion(_))));
        let flipped = RegionSpec::BBox {
            min_lat: 41.0,
            min_lng: -75.0,
            max_lat: 40.0,
            max_lng: -73.0,
        };
        assert!(matches!(carve_region(&g, &flipped), Err(GraphError::InvalidRegion(_))));
        let empty = RegionSpec::BBox {
            min_lat: 10.0,
            min_lng: 10.0,
            max_lat: 11.0,
            max_lng: 11.0,
        };
        assert!(matches!(carve_region(&g, &empty), Err(GraphError::EmptyRegion)));
    }
}
