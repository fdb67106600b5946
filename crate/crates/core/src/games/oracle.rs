//! Shortest-path-following policy driven by the bearing to the next pano.

use super::{GameError, Info};
use crate::engine::ActionTuple;
use crate::panograph::{signed_deg, NodeIdx, ShortestPaths, StreetGraph};

pub const DEFAULT_HORIZONTAL_ROT_DEG: f64 = 22.5;

/// Rotates toward the next pano in steps of `h`, moving forward once the
/// relative bearing is within `[-h, h]`.
pub fn oracle_action(bearing: f64, h: f64) -> ActionTuple {
    if bearing > h {
        ActionTuple::turn(h)
    } else if bearing < -h {
        ActionTuple::turn(-h)
    } else {
        ActionTuple::forward()
    }
}

/// The oracle action from explicit state rather than step info.
pub fn oracle_policy(
    graph: &StreetGraph,
    paths: &ShortestPaths,
    node: NodeIdx,
    yaw: f64,
    h: f64,
) -> Result<ActionTuple, GameError> {
    let next = paths.next_hop(node).ok_or_else(|| GameError::Unreachable {
        from: graph.node(node).id.clone(),
        to: graph.node(paths.goal()).id.clone(),
    })?;
    Ok(oracle_action(signed_deg(graph.bearing(node, next) - yaw), h))
}

/// Reads `bearing_to_next_pano` from the previous step's info.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleAgent {
    pub horizontal_rot: f64,
}

impl Default for OracleAgent {
    fn default() -> Self {
        Self {
            horizontal_rot: DEFAULT_HORIZONTAL_ROT_DEG,
        }
    }
}

impl OracleAgent {
    /// Moves forward when the info carries no bearing (no path exists).
    pub fn act(&self, info: &Info) -> ActionTuple {
        match info.get("bearing_to_next_pano").and_then(|v| v.as_f64()) {
            Some(b) => oracle_action(b, self.horizontal_rot),
            None => ActionTuple::forward(),
        }
    }
}
