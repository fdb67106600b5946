use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::panograph::{normalize_deg, signed_deg, NodeIdx, StreetGraph};

/// Forward moves accept neighbors within this many degrees of the yaw.
pub const MOVE_TOLERANCE_DEG: f64 = 30.0;
pub const MIN_FOV_DEG: f64 = 30.0;
pub const MAX_FOV_DEG: f64 = 120.0;

/// Where the agent stands and looks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentPose {
    pub node: NodeIdx,
    /// `[0, 360)`, 0 = North.
    pub yaw: f64,
    /// `[-90, 90]`, 0 = horizontal.
    pub pitch: f64,
    pub fov: f64,
}

impl AgentPose {
    pub fn pano_id<'g>(&self, graph: &'g StreetGraph) -> &'g str {
        &graph.node(self.node).id
    }
}

/// The four continuous action scalars, in wire order
/// `[rotate_yaw, rotate_pitch, move_forward, zoom]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionTuple {
    pub rotate_yaw: f64,
    pub rotate_pitch: f64,
    pub move_forward: bool,
    /// Signed fov delta in degrees.
    pub zoom: f64,
}

impl ActionTuple {
    pub const NOOP: ActionTuple = ActionTuple {
        rotate_yaw: 0.0,
        rotate_pitch: 0.0,
        move_forward: false,
        zoom: 0.0,
    };

    pub const fn forward() -> Self {
        ActionTuple {
            move_forward: true,
            ..Self::NOOP
        }
    }

    /// Positive turns right (clockwise seen from above).
    pub const fn turn(degrees: f64) -> Self {
        ActionTuple {
            rotate_yaw: degrees,
            ..Self::NOOP
        }
    }

    pub fn from_array(values: [f64; 4]) -> Result<Self, EnvError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EnvError::InvalidAction(format!("non-finite action {values:?}")));
        }
        let move_forward = match values[2] {
            v if v == 0.0 => false,
            v if v == 1.0 => true,
            v => return Err(EnvError::InvalidAction(format!("move_forward must be 0 or 1, got {v}"))),
        };
        Ok(Self {
            rotate_yaw: values[0],
            rotate_pitch: values[1],
            move_forward,
            zoom: values[3],
        })
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.rotate_yaw, self.rotate_pitch, if self.move_forward { 1.0 } else { 0.0 }, self.zoom]
    }
}

/// An action given either as scalars or as an index into the discrete set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Tuple(ActionTuple),
    Discrete(usize),
}

impl From<ActionTuple> for Action {
    fn from(a: ActionTuple) -> Self {
        Action::Tuple(a)
    }
}

impl From<usize> for Action {
    fn from(i: usize) -> Self {
        Action::Discrete(i)
    }
}

/// Ordered discrete action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteActionSet(pub Vec<ActionTuple>);

impl Default for DiscreteActionSet {
    /// Move forward, turn left 22.5°, turn left 67.5°, turn right 22.5°,
    /// turn right 67.5°.
    fn default() -> Self {
        Self(vec![
            ActionTuple::forward(),
            ActionTuple::turn(-22.5),
            ActionTuple::turn(-67.5),
            ActionTuple::turn(22.5),
            ActionTuple::turn(67.5),
        ])
    }
}

impl DiscreteActionSet {
    pub fn get(&self, index: usize) -> Result<ActionTuple, EnvError> {
        self.0.get(index).copied().ok_or(EnvError::ActionOutOfRange {
            index,
            len: self.0.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Moves to the neighbor most closely aligned with the yaw, if one lies
/// within [`MOVE_TOLERANCE_DEG`]. Ties go to the smaller pano id. The pose is
/// returned unchanged when no neighbor qualifies.
pub fn apply_move_forward(pose: AgentPose, graph: &StreetGraph) -> AgentPose {
    let mut best: Option<(f64, NodeIdx)> = None;
    for &n in graph.neighbors(pose.node) {
        let off = signed_deg(graph.bearing(pose.node, n) - pose.yaw).abs();
        if off > MOVE_TOLERANCE_DEG {
            continue;
        }
        // neighbors are visited in ascending id order, so strict < keeps the smaller id
        if best.is_none_or(|(b, _)| off < b) {
            best = Some((off, n));
        }
    }
    match best {
        Some((_, n)) => AgentPose { node: n, ..pose },
        None => pose,
    }
}

/// Applies rotation, then the optional forward move, then zoom.
pub fn apply_action(pose: AgentPose, action: &ActionTuple, graph: &StreetGraph) -> AgentPose {
    let mut next = AgentPose {
        yaw: normalize_deg(pose.yaw + action.rotate_yaw),
        pitch: (pose.pitch + action.rotate_pitch).clamp(-90.0, 90.0),
        ..pose
    };
    if action.move_forward {
        next = apply_move_forward(next, graph);
    }
    next.fov = (next.fov + action.zoom).clamp(MIN_FOV_DEG, MAX_FOV_DEG);
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panograph::{LatLng, PanoRecord, TangentPlane};

    /// Hub "h" with spokes at the given bearings, 10 m out.
    fn star(bearings: &[f64]) -> StreetGraph {
        let plane = TangentPlane::new(LatLng::new(40.0, -74.0));
        let mut records = vec![PanoRecord {
            id: "h".into(),
            lat: 40.0,
            lng: -74.0,
            altitude: 0.0,
            pitch: 0.0,
            roll: 0.0,
            yaw: 0.0,
            date: String::new(),
            neighbors: vec![],
        }];
        for (i, b) in bearings.iter().enumerate() {
            let (s, c) = b.to_radians().sin_cos();
            let p = plane.to_latlng(10.0 * s, 10.0 * c);
            records.push(PanoRecord {
                id: format!("s{i}"),
                lat: p.lat,
                lng: p.lng,
                neighbors: vec!["h".into()],
                ..records[0].clone()
            });
        }
        StreetGraph::from_records(records).unwrap()
    }

    fn pose(g: &StreetGraph, yaw: f64) -> AgentPose {
        AgentPose {
            node: g.idx("h").unwrap(),
            yaw,
            pitch: 0.0,
            fov: 60.0,
        }
    }

    fn id_after(g: &StreetGraph, yaw: f64) -> String {
        apply_move_forward(pose(g, yaw), g).pano_id(g).to_string()
    }

    #[test]
    fn single_neighbor_ahead() {
        let g = star(&[40.0]);
        assert_eq!(id_after(&g, 40.0), "s0");
    }

    #[test]
    fn most_central_wins() {
        let g = star(&[110.0, 75.0]);
        assert_eq!(id_after(&g, 100.0), "s0");
    }

    #[test]
    fn tolerance_boundary() {
        let g = star(&[31.0]);
        assert_eq!(id_after(&g, 0.0), "h");
        let g = star(&[29.9]);
        assert_eq!(id_after(&g, 0.0), "s0");
        let g = star(&[329.0]);
        assert_eq!(id_after(&g, 0.0), "h");
    }

    #[test]
    fn equal_offsets_prefer_smaller_id() {
        let g = star(&[10.0, 350.0]);
        assert_eq!(id_after(&g, 0.0), "s0");
    }

    #[test]
    fn move_keeps_orientation() {
        let g = star(&[0.0]);
        let p = AgentPose {
            pitch: 12.0,
            fov: 45.0,
            ..pose(&g, 5.0)
        };
        let q = apply_move_forward(p, &g);
        assert_eq!((q.yaw, q.pitch, q.fov), (5.0, 12.0, 45.0));
    }

    #[test]
    fn rotate_then_move_then_zoom() {
        let g = star(&[90.0]);
        let a = ActionTuple {
            rotate_yaw: 90.0,
            rotate_pitch: 200.0,
            move_forward: true,
            zoom: 500.0,
        };
        let q = apply_action(pose(&g, 0.0), &a, &g);
        assert_eq!(q.pano_id(&g), "s0");
        assert_eq!((q.yaw, q.pitch, q.fov), (90.0, 90.0, MAX_FOV_DEG));
        let z = apply_action(q, &ActionTuple { zoom: -500.0, ..ActionTuple::NOOP }, &g);
        assert_eq!(z.fov, MIN_FOV_DEG);
    }

    #[test]
    fn array_round_trip_and_validation() {
        let a = ActionTuple::from_array([22.5, -3.0, 1.0, 5.0]).unwrap();
        assert!(a.move_forward);
        assert_eq!(a.to_array(), [22.5, -3.0, 1.0, 5.0]);
        assert!(ActionTuple::from_array([0.0, 0.0, 0.5, 0.0]).is_err());
        assert!(ActionTuple::from_array([f64::NAN, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn default_discrete_set() {
        let set = DiscreteActionSet::default();
        let yaws: Vec<f64> = set.0.iter().map(|a| a.rotate_yaw).collect();
        assert_eq!(yaws, [0.0, -22.5, -67.5, 22.5, 67.5]);
        assert!(set.0[0].move_forward && set.0[1..].iter().all(|a| !a.move_forward));
        assert!(set.0.iter().all(|a| a.rotate_pitch == 0.0 && a.zoom == 0.0));
        assert!(matches!(set.get(5), Err(EnvError::ActionOutOfRange { index: 5, len: 5 })));
    }
}
