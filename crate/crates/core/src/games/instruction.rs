//! Games that guide the agent with templated directions and thumbnails.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::coins::random_placement;
use super::{Game, GameContext, GameError, GameStep, Info, InstructionView, Placement};
use crate::panograph::{haversine_m, signed_deg, NodeIdx, ShortestPaths, StreetGraph};

/// Heading changes beyond this count as a turn.
const TURN_THRESHOLD_DEG: f64 = 45.0;
const START_ATTEMPTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstructionVariant {
    /// Only the goal pays.
    Goal,
    /// Every waypoint pays, all instructions visible.
    Incremental,
    /// Every waypoint pays, one instruction visible at a time.
    StepByStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstructionConfig {
    pub num_instructions: usize,
    pub min_route_hops: u32,
    pub max_route_hops: u32,
    /// A waypoint or the goal counts as hit within this distance.
    pub goal_radius_m: f64,
    pub waypoint_reward: f64,
    pub goal_reward: f64,
    pub shaping: bool,
    pub shaping_radius_m: f64,
}

impl Default for InstructionConfig {
    fn default() -> Self {
        Self {
            num_instructions: 2,
            min_route_hops: 40,
            max_route_hops: 120,
            goal_radius_m: 100.0,
            waypoint_reward: 1.0,
            goal_reward: 10.0,
            shaping: false,
            shaping_radius_m: 50.0,
        }
    }
}

impl InstructionConfig {
    pub fn validate(&self) -> Result<(), GameError> {
        let bad = |m: String| Err(GameError::InvalidConfig(m));
        if self.num_instructions == 0 {
            return bad("num_instructions must be at least 1".into());
        }
        if self.min_route_hops < self.num_instructions as u32 || self.min_route_hops > self.max_route_hops {
            return bad(format!(
                "route hops [{}, {}] must be ordered and admit {} legs",
                self.min_route_hops, self.max_route_hops, self.num_instructions
            ));
        }
        if !(self.goal_radius_m >= 0.0) || !(self.shaping_radius_m > 0.0) {
            return bad("radii must be positive".into());
        }
        Ok(())
    }
}

/// A shortest route cut into legs, each with one instruction.
#[derive(Debug, Clone, PartialEq)]
pub struct InstructionRoute {
    /// Start, the intermediate waypoints, then the goal.
    pub waypoints: Vec<NodeIdx>,
    pub instructions: Vec<String>,
    /// `(node, heading)` views: one per leg start, plus the goal.
    pub thumbnails: Vec<(NodeIdx, f64)>,
    pub variant: InstructionVariant,
    /// Full node sequence from start to goal.
    pub path: Vec<NodeIdx>,
}

impl InstructionRoute {
    pub fn goal(&self) -> NodeIdx {
        *self.waypoints.last().expect("route has a goal")
    }

    pub fn waypoint_ids<'g>(&self, graph: &'g StreetGraph) -> Vec<&'g str> {
        self.waypoints.iter().map(|&w| graph.node(w).id.as_str()).collect()
    }
}

fn round_meters(m: f64) -> u32 {
    ((m / 10.0).round() as u32).max(1) * 10
}

fn turn_word(delta: f64) -> &'static str {
    if delta > 0.0 {
        "right"
    } else {
        "left"
    }
}

/// Builds an `n`-leg route along the shortest path from `start` to `goal`.
/// Leg boundaries sit at hop offsets `floor(k * L / n)`.
pub fn build_instruction_route(
    graph: &StreetGraph,
    start: NodeIdx,
    goal: NodeIdx,
    n: usize,
    variant: InstructionVariant,
) -> Result<InstructionRoute, GameError> {
    let unreachable = || GameError::Unreachable {
        from: graph.node(start).id.clone(),
        to: graph.node(goal).id.clone(),
    };
    if start == goal {
        return Err(GameError::InvalidConfig("route start equals goal".into()));
    }
    let path = ShortestPaths::from_goal(graph, goal).path_from(start).ok_or_else(unreachable)?;
    let hops = path.len() - 1;
    if n == 0 || n > hops {
        return Err(GameError::InvalidConfig(format!("{n} legs do not fit a {hops}-hop route")));
    }
    let headings: Vec<f64> = path.windows(2).map(|w| graph.bearing(w[0], w[1])).collect();
    let lengths: Vec<f64> = path
        .windows(2)
        .map(|w| haversine_m(graph.position(w[0]), graph.position(w[1])))
        .collect();
    let cuts: Vec<usize> = (0..=n).map(|k| k * hops / n).collect();

    let mut instructions = Vec::with_capacity(n);
    for k in 0..n {
        let (from, to) = (cuts[k], cuts[k + 1]);
        let mut parts = Vec::new();
        if from > 0 {
            let entry = signed_deg(headings[from] - headings[from - 1]);
            if entry.abs() > TURN_THRESHOLD_DEG {
                parts.push(format!("turn {} at the next intersection", turn_word(entry)));
            }
        }
        let mut run = lengths[from];
        for j in from + 1..to {
            let delta = signed_deg(headings[j] - headings[j - 1]);
            if delta.abs() > TURN_THRESHOLD_DEG {
                parts.push(format!("go straight for {} meters", round_meters(run)));
                parts.push(format!("turn {} at the next intersection", turn_word(delta)));
                run = 0.0;
            }
            run += lengths[j];
        }
        parts.push(format!("go straight for {} meters", round_meters(run)));
        instructions.push(parts.join(", then "));
    }

    let mut thumbnails: Vec<(NodeIdx, f64)> = cuts[..n].iter().map(|&c| (path[c], headings[c])).collect();
    thumbnails.push((goal, headings[hops - 1]));

    Ok(InstructionRoute {
        waypoints: cuts.iter().map(|&c| path[c]).collect(),
        instructions,
        thumbnails,
        variant,
        path,
    })
}

pub struct InstructionGame {
    config: InstructionConfig,
    variant: InstructionVariant,
    route: Option<InstructionRoute>,
    /// Index into `route.waypoints` of the next target.
    next: usize,
    paths: Option<ShortestPaths>,
    shaped: Vec<bool>,
}

impl InstructionGame {
    pub fn new(config: InstructionConfig, variant: InstructionVariant) -> Result<Self, GameError> {
        config.validate()?;
        Ok(Self {
            config,
            variant,
            route: None,
            next: 1,
            paths: None,
            shaped: Vec::new(),
        })
    }

    pub fn route(&self) -> Option<&InstructionRoute> {
        self.route.as_ref()
    }

    pub fn next_waypoint(&self) -> usize {
        self.next
    }

    fn target(&self) -> Option<NodeIdx> {
        self.route.as_ref().map(|r| r.waypoints[self.next])
    }

    fn pick_route(&self, ctx: &mut GameContext<'_>) -> Result<(Placement, NodeIdx), GameError> {
        let (lo, hi) = (self.config.min_route_hops, self.config.max_route_hops);
        for _ in 0..START_ATTEMPTS {
            let start = random_placement(ctx.graph, ctx.rng);
            let from_start = ShortestPaths::from_goal(ctx.graph, start.node);
            let candidates: Vec<NodeIdx> = (0..ctx.graph.len())
                .filter(|&v| from_start.distance(v).is_some_and(|d| (lo..=hi).contains(&d)))
                .collect();
            if !candidates.is_empty() {
                let goal = candidates[ctx.rng.gen_range(0..candidates.len())];
                return Ok((start, goal));
            }
        }
        Err(GameError::NoEligibleGoal(format!("no route of {lo}..={hi} hops found")))
    }
}

impl Game for InstructionGame {
    fn name(&self) -> &'static str {
        match self.variant {
            InstructionVariant::Goal => super::GOAL_INSTRUCTION_GAME,
            InstructionVariant::Incremental => super::INCREMENTAL_INSTRUCTION_GAME,
            InstructionVariant::StepByStep => super::STEP_BY_STEP_INSTRUCTION_GAME,
        }
    }

    fn reset(&mut self, ctx: &mut GameContext<'_>) -> Result<Placement, GameError> {
        let (start, goal) = self.pick_route(ctx)?;
        let route = build_instruction_route(ctx.graph, start.node, goal, self.config.num_instructions, self.variant)?;
        self.shaped = vec![false; route.waypoints.len()];
        self.next = 1;
        self.paths = Some(ShortestPaths::from_goal(ctx.graph, route.waypoints[1]));
        self.route = Some(route);
        Ok(start)
    }

    fn step(&mut self, ctx: &mut GameContext<'_>, node: NodeIdx) -> Result<GameStep, GameError> {
        let route = self.route.as_ref().expect("instruction game stepped before reset");
        let last = route.waypoints.len() - 1;
        let mut reward = 0.0;
        let mut done = false;
        let mut hits = 0u32;
        let mut retarget = false;
        loop {
            let target = route.waypoints[self.next];
            let d = haversine_m(ctx.graph.position(node), ctx.graph.position(target));
            let is_goal = self.next == last;
            let pays = is_goal || self.variant != InstructionVariant::Goal;
            if self.config.shaping && pays && !self.shaped[self.next] && d <= self.config.shaping_radius_m {
                reward += 0.5 * (1.0 - d / self.config.shaping_radius_m);
                self.shaped[self.next] = true;
            }
            if d > self.config.goal_radius_m {
                break;
            }
            hits += 1;
            if is_goal {
                reward += self.config.goal_reward;
                done = true;
                break;
            }
            if pays {
                reward += self.config.waypoint_reward;
            }
            self.next += 1;
            retarget = true;
        }
        if retarget {
            self.paths = Some(ShortestPaths::from_goal(ctx.graph, route.waypoints[self.next]));
        }
        let mut info = Info::new();
        info.insert("waypoints_hit".into(), hits.into());
        info.insert("goal_reached".into(), done.into());
        Ok(GameStep { reward, done, info })
    }

    fn goal(&self) -> Option<NodeIdx> {
        self.route.as_ref().map(InstructionRoute::goal)
    }

    fn next_hop(&self, node: NodeIdx) -> Option<NodeIdx> {
        self.paths.as_ref().and_then(|p| p.next_hop(node))
    }

    fn describe(&self, graph: &StreetGraph, node: NodeIdx, info: &mut Info) {
        let (Some(route), Some(target)) = (&self.route, self.target()) else {
            return;
        };
        let goal = route.goal();
        info.insert("goal_id".into(), graph.node(goal).id.clone().into());
        info.insert(
            "goal_distance_m".into(),
            haversine_m(graph.position(node), graph.position(goal)).into(),
        );
        info.insert("target_id".into(), graph.node(target).id.clone().into());
        info.insert("target_index".into(), self.next.into());
        info.insert("route_hops".into(), (route.path.len() - 1).into());
    }

    fn thumbnail_views(&self) -> Vec<(NodeIdx, f64)> {
        self.route.as_ref().map(|r| r.thumbnails.clone()).unwrap_or_default()
    }

    fn instruction_view(&self) -> Option<InstructionView> {
        let route = self.route.as_ref()?;
        Some(match self.variant {
            InstructionVariant::StepByStep => InstructionView {
                instructions: vec![route.instructions[self.next - 1].clone()],
                thumbnails: self.next - 1..self.next + 1,
            },
            _ => InstructionView {
                instructions: route.instructions.clone(),
                thumbnails: 0..route.thumbnails.len(),
            },
        })
    }
}
