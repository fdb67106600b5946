//! Goal sampling, the distance curriculum and held-out goal grids.

use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GameError;
use crate::panograph::{haversine_m, LatLng, NodeIdx, StreetGraph};

pub const COARSE_CELL_DEG: f64 = 0.01;
pub const MEDIUM_CELL_DEG: f64 = 0.005;

/// Which side of a goal mask is eligible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalMode {
    /// Goals never fall in held-out cells.
    #[default]
    Train,
    /// Goals only fall in held-out cells.
    HeldOut,
}

/// Restrictions on where a new goal may be drawn.
#[derive(Debug, Clone, Copy, Default)]
pub struct GoalConstraints<'a> {
    /// Nodes this close to the agent or closer are excluded.
    pub min_distance_m: f64,
    /// Nodes farther than this are excluded.
    pub max_distance_m: Option<f64>,
    pub mask: Option<(&'a GoalMask, GoalMode)>,
}

impl GoalConstraints<'_> {
    pub fn admits(&self, graph: &StreetGraph, agent: NodeIdx, candidate: NodeIdx) -> bool {
        let d = haversine_m(graph.position(agent), graph.position(candidate));
        if d <= self.min_distance_m {
            return false;
        }
        if self.max_distance_m.is_some_and(|max| d > max) {
            return false;
        }
        match self.mask {
            Some((mask, mode)) => mask.is_held_out(graph.position(candidate)) == (mode == GoalMode::HeldOut),
            None => true,
        }
    }
}

/// Draws a goal uniformly among the nodes admitted by `constraints`.
pub fn sample_goal(
    graph: &StreetGraph,
    agent: NodeIdx,
    constraints: &GoalConstraints<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<NodeIdx, GameError> {
    let eligible: Vec<NodeIdx> = (0..graph.len())
        .filter(|&n| constraints.admits(graph, agent, n))
        .collect();
    eligible.choose(rng).copied().ok_or_else(|| {
        GameError::NoEligibleGoal(format!(
            "from {} with min {} m, max {:?} m",
            graph.node(agent).id,
            constraints.min_distance_m,
            constraints.max_distance_m
        ))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurriculumConfig {
    /// Maximum goal distance during the first phase.
    pub phase1_max_m: f64,
    /// Environment steps spent in the first phase.
    pub phase1_steps: u64,
    /// Environment steps over which the range grows to the full region.
    pub growth_steps: u64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            phase1_max_m: 500.0,
            phase1_steps: 1_000_000,
            growth_steps: 1_000_000,
        }
    }
}

/// Maximum goal distance as a function of total environment steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Curriculum {
    config: CurriculumConfig,
    full_range_m: f64,
}

impl Curriculum {
    /// The final range is the diagonal of the graph's bounding box, which
    /// bounds every pairwise distance.
    pub fn new(config: CurriculumConfig, graph: &StreetGraph) -> Result<Self, GameError> {
        if !(config.phase1_max_m > 0.0) {
            return Err(GameError::InvalidConfig(format!(
                "phase1_max_m must be positive, got {}",
                config.phase1_max_m
            )));
        }
        let b = graph.bounds();
        let full_range_m = haversine_m(LatLng::new(b.min_lat, b.min_lng), LatLng::new(b.max_lat, b.max_lng));
        Ok(Self { config, full_range_m })
    }

    pub fn config(&self) -> &CurriculumConfig {
        &self.config
    }

    pub fn full_range_m(&self) -> f64 {
        self.full_range_m
    }

    pub fn cap_m(&self, total_steps: u64) -> f64 {
        let c = &self.config;
        let end = self.full_range_m.max(c.phase1_max_m);
        if total_steps < c.phase1_steps {
            return c.phase1_max_m;
        }
        if c.growth_steps == 0 {
            return end;
        }
        let t = ((total_steps - c.phase1_steps) as f64 / c.growth_steps as f64).min(1.0);
        c.phase1_max_m + (end - c.phase1_max_m) * t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskConfig {
    pub cell_deg: f64,
    /// Fraction of occupied cells held out.
    pub held_out_fraction: f64,
    pub seed: u64,
    pub mode: GoalMode,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            cell_deg: COARSE_CELL_DEG,
            held_out_fraction: 0.25,
            seed: 0,
            mode: GoalMode::Train,
        }
    }
}

/// A lat/lng grid with some cells held out from training goals.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalMask {
    cell_deg: f64,
    held_out: BTreeSet<(i64, i64)>,
}

impl GoalMask {
    pub fn new(cell_deg: f64, held_out: impl IntoIterator<Item = (i64, i64)>) -> Result<Self, GameError> {
        if !(cell_deg > 0.0) || !cell_deg.is_finite() {
            return Err(GameError::InvalidConfig(format!("cell_deg must be positive, got {cell_deg}")));
        }
        Ok(Self {
            cell_deg,
            held_out: held_out.into_iter().collect(),
        })
    }

    /// Holds out `round(fraction * k)` of the `k` cells that contain at least
    /// one node (at least one when `fraction > 0`), chosen by `seed`.
    pub fn select(graph: &StreetGraph, cell_deg: f64, fraction: f64, seed: u64) -> Result<Self, GameError> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(GameError::InvalidConfig(format!(
                "held_out_fraction must be in [0, 1], got {fraction}"
            )));
        }
        let probe = Self::new(cell_deg, [])?;
        let occupied: Vec<(i64, i64)> = graph
            .nodes()
            .iter()
            .map(|n| probe.cell_of(n.position()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut count = (fraction * occupied.len() as f64).round() as usize;
        if fraction > 0.0 {
            count = count.max(1);
        }
        let count = count.min(occupied.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked = index::sample(&mut rng, occupied.len(), count).into_iter().map(|i| occupied[i]);
        Self::new(cell_deg, picked)
    }

    pub fn from_config(graph: &StreetGraph, config: &MaskConfig) -> Result<Self, GameError> {
        Self::select(graph, config.cell_deg, config.held_out_fraction, config.seed)
    }

    pub fn cell_deg(&self) -> f64 {
        self.cell_deg
    }

    pub fn cell_of(&self, p: LatLng) -> (i64, i64) {
        ((p.lat / self.cell_deg).floor() as i64, (p.lng / self.cell_deg).floor() as i64)
    }

    pub fn is_held_out(&self, p: LatLng) -> bool {
        self.held_out.contains(&self.cell_of(p))
    }

    pub fn held_out_cells(&self) -> &BTreeSet<(i64, i64)> {
        &self.held_out
    }
}
