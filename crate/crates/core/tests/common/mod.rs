//! Fixtures and independent reference implementations shared by the
//! integration tests.

#![allow(dead_code)]

use std::collections::VecDeque;
use std::sync::Arc;

use panonav_core::panograph::{PanoRecord, StreetGraph};
use panonav_core::synthcity::{generate_city, CityParams, SyntheticPanos};
use rand::Rng;

pub fn city_params(seed: u64, blocks: u32, irregularity: f64, pano_height: u32) -> CityParams {
    CityParams {
        seed,
        blocks_x: blocks,
        blocks_y: blocks,
        irregularity,
        pano_height,
        ..CityParams::default()
    }
}

pub fn city(params: &CityParams) -> Arc<StreetGraph> {
    Arc::new(generate_city(params).unwrap())
}

pub fn synthetic(graph: &Arc<StreetGraph>, params: &CityParams) -> Arc<SyntheticPanos> {
    Arc::new(SyntheticPanos::new(Arc::clone(graph), params.clone()))
}

pub fn record(id: &str, lat: f64, lng: f64, neighbors: &[String]) -> PanoRecord {
    PanoRecord {
        id: id.to_string(),
        lat,
        lng,
        altitude: 0.0,
        pitch: 0.0,
        roll: 0.0,
        yaw: 0.0,
        date: "2019-06-01".into(),
        neighbors: neighbors.to_vec(),
    }
}

/// Random graph on `n` nodes scattered in a ~1 km square with `extra`
/// random edges on top of a random spanning forest.
pub fn random_graph(rng: &mut impl Rng, n: usize, extra: usize, tree_prob: f64) -> StreetGraph {
    let ids: Vec<String> = (0..n).map(|i| format!("p{i:05}")).collect();
    let mut nbs: Vec<Vec<String>> = vec![Vec::new(); n];
    for i in 1..n {
        if rng.gen_bool(tree_prob) {
            let j = rng.gen_range(0..i);
            nbs[i].push(ids[j].clone());
        }
    }
    for _ in 0..extra {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            nbs[a].push(ids[b].clone());
        }
    }
    let records = (0..n)
        .map(|i| {
            record(
                &ids[i],
                40.70 + rng.gen_range(0.0..0.01),
                -74.01 + rng.gen_range(0.0..0.01),
                &nbs[i],
            )
        })
        .collect();
    StreetGraph::from_records(records).unwrap()
}

/// Hop counts from `source` by plain queue-based BFS over neighbor ids.
pub fn bfs_hops(graph: &StreetGraph, source: usize) -> Vec<Option<u32>> {
    let mut dist = vec![None; graph.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for nb in &graph.node(u).neighbors {
            let v = graph.idx(nb).unwrap();
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}
