//! Fixtures shared by the command-line and server tests.

#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use panonav_cli::server::PlayServer;
use panonav_cli::session::World;
use panonav_core::panograph::{save_graph, LatLng, PanoRecord, StreetGraph};
use panonav_core::synthcity::{generate_city, CityParams, SyntheticPanos};
use panonav_core::{EnvConfig, Info};

pub fn panonav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_panonav"))
        .args(args)
        .env_remove("PANONAV_DATA_DIR")
        .output()
        .expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn record(id: &str, lat: f64, lng: f64, neighbors: &[&str]) -> PanoRecord {
    PanoRecord {
        id: id.to_string(),
        lat,
        lng,
        altitude: 0.0,
        pitch: 0.0,
        roll: 0.0,
        yaw: 0.0,
        date: "2019-06-01".into(),
        neighbors: neighbors.iter().map(|s| s.to_string()).collect(),
    }
}

/// Nodes `n0 .. n{len-1}` in a west-to-east chain 10 m apart.
pub fn line_graph(len: usize) -> StreetGraph {
    let step = 10.0 / 111_320.0;
    let ids: Vec<String> = (0..len).map(|i| format!("n{i}")).collect();
    let records = (0..len)
        .map(|i| {
            let mut nbs = Vec::new();
            if i > 0 {
                nbs.push(ids[i - 1].as_str());
            }
            if i + 1 < len {
                nbs.push(ids[i + 1].as_str());
            }
            record(&ids[i], 0.0, i as f64 * step, &nbs)
        })
        .collect();
    StreetGraph::from_records(records).unwrap()
}

pub fn write_graph(dir: &Path, graph: &StreetGraph) {
    save_graph(dir, graph, "fixture", None).unwrap();
}

pub fn small_params(seed: u64, blocks: u32) -> CityParams {
    CityParams {
        seed,
        blocks_x: blocks,
        blocks_y: blocks,
        pano_height: 64,
        ..CityParams::default()
    }
}

pub fn world(params: &CityParams, base: EnvConfig) -> World {
    let graph = Arc::new(generate_city(params).unwrap());
    let source = Arc::new(SyntheticPanos::new(Arc::clone(&graph), params.clone()));
    World { graph, source, base }
}

/// Starts a server on an ephemeral local port.
pub fn serve(world: World) -> std::net::SocketAddr {
    PlayServer::bind("127.0.0.1:0", world).unwrap().spawn().unwrap()
}

/// Hop counts from `source`, by queue-based BFS over neighbor ids.
pub fn bfs_hops(graph: &StreetGraph, source: usize) -> Vec<Option<u32>> {
    let mut dist = vec![None; graph.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for nb in &graph.node(u).neighbors {
            let v = graph.idx(nb).unwrap();
            if dist[v].is_none() {
                dist[v] = Some(dist[u].unwrap() + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

const R: f64 = 6_371_009.0;

/// Great-circle distance from the angle between unit vectors.
pub fn distance_m(a: LatLng, b: LatLng) -> f64 {
    let v = |p: LatLng| {
        let (phi, lam) = (p.lat.to_radians(), p.lng.to_radians());
        [phi.cos() * lam.cos(), phi.cos() * lam.sin(), phi.sin()]
    };
    let (u, w) = (v(a), v(b));
    let cross = [
        u[1] * w[2] - u[2] * w[1],
        u[2] * w[0] - u[0] * w[2],
        u[0] * w[1] - u[1] * w[0],
    ];
    let sin = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
    let cos = u[0] * w[0] + u[1] * w[1] + u[2] * w[2];
    R * sin.atan2(cos)
}

/// Arrivals recomputed from positions and goal ids alone: a goal is reached
/// within 100 m and pays its hop count at assignment, or nothing when it
/// was unreachable.
pub struct Ledger {
    pub goal_rewards: f64,
    /// `(hops, steps taken)` per reached goal.
    pub arrivals: Vec<(u32, u32)>,
    /// Step infos that disagreed with the recomputed arrival flag.
    pub mismatches: usize,
    /// Steps whose goal distance was within floating-point noise of the
    /// radius, where either answer is exact; the environment's flag is used.
    pub ties: usize,
}

pub fn replay_ledger(graph: &StreetGraph, infos: &[Info]) -> Ledger {
    let id = |info: &Info, key: &str| graph.idx(info[key].as_str().unwrap()).unwrap();
    let mut goal = id(&infos[0], "goal_id");
    let mut hops = bfs_hops(graph, goal)[id(&infos[0], "pano_id")];
    let mut assigned_at = 0u32;
    let mut ledger = Ledger {
        goal_rewards: 0.0,
        arrivals: Vec::new(),
        mismatches: 0,
        ties: 0,
    };
    for (t, info) in infos.iter().enumerate().skip(1) {
        let here = id(info, "pano_id");
        let d = distance_m(graph.position(here), graph.position(goal));
        let reached = if (d - 100.0).abs() < 1e-6 {
            ledger.ties += 1;
            info["goal_reached"] == true
        } else {
            d <= 100.0
        };
        if info["goal_reached"] != reached {
            ledger.mismatches += 1;
        }
        if reached {
            if let Some(h) = hops {
                ledger.goal_rewards += h as f64;
                ledger.arrivals.push((h, t as u32 - assigned_at));
            }
            goal = id(info, "goal_id");
            hops = bfs_hops(graph, goal)[here];
            assigned_at = t as u32;
        } else if id(info, "goal_id") != goal {
            ledger.mismatches += 1;
        }
    }
    ledger
}
