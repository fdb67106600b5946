use serde::{Deserialize, Serialize};

use super::coins::{random_placement, CoinField};
use super::goals::{sample_goal, Curriculum, CurriculumConfig, GoalConstraints, GoalMask, MaskConfig};
use super::{Game, GameContext, GameError, GameStep, Info, Placement};
use crate::panograph::{haversine_m, NodeIdx, ShortestPaths, StreetGraph};

/// What a reached goal pays, before `reward_scale`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CourierReward {
    /// Hop count of the shortest path at assignment time.
    #[default]
    PanoCount,
    /// Length in meters of that same path.
    PathLength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CourierConfig {
    pub goal_radius_m: f64,
    pub early_radius_m: f64,
    /// Grants a one-off partial reward on entering `early_radius_m`.
    pub early_reward: bool,
    pub reward: CourierReward,
    pub reward_scale: f64,
    pub coin_fraction: f64,
    pub curriculum: Option<CurriculumConfig>,
    pub goal_mask: Option<MaskConfig>,
}

impl Default for CourierConfig {
    fn default() -> Self {
        Self {
            goal_radius_m: 100.0,
            early_radius_m: 200.0,
            early_reward: false,
            reward: CourierReward::PanoCount,
            reward_scale: 1.0,
            coin_fraction: 0.0,
            curriculum: None,
            goal_mask: None,
        }
    }
}

impl CourierConfig {
    pub fn validate(&self) -> Result<(), GameError> {
        let bad = |m: String| Err(GameError::InvalidConfig(m));
        if !(self.goal_radius_m >= 0.0) {
            return bad(format!("goal_radius_m must be non-negative, got {}", self.goal_radius_m));
        }
        if !(self.goal_radius_m < self.early_radius_m) {
            return bad(format!(
                "goal_radius_m ({}) must be below early_radius_m ({})",
                self.goal_radius_m, self.early_radius_m
            ));
        }
        if !(0.0..=1.0).contains(&self.coin_fraction) {
            return bad(format!("coin_fraction must be in [0, 1], got {}", self.coin_fraction));
        }
        if !self.reward_scale.is_finite() {
            return bad("reward_scale must be finite".into());
        }
        Ok(())
    }
}

struct ActiveGoal {
    node: NodeIdx,
    paths: ShortestPaths,
    hops: Option<u32>,
    value: f64,
    shaped: bool,
    outside_early: bool,
}

/// Deliver to a sequence of goals; each pays in proportion to its path length.
pub struct CourierGame {
    name: &'static str,
    config: CourierConfig,
    curriculum: Option<Curriculum>,
    mask: Option<GoalMask>,
    goal: Option<ActiveGoal>,
    coins: CoinField,
    goals_assigned: u32,
    goals_reached: u32,
}

impl CourierGame {
    pub fn new(config: CourierConfig, graph: &StreetGraph, name: &'static str) -> Result<Self, GameError> {
        config.validate()?;
        let curriculum = config
            .curriculum
            .clone()
            .map(|c| Curriculum::new(c, graph))
            .transpose()?;
        let mask = config
            .goal_mask
            .as_ref()
            .map(|m| GoalMask::from_config(graph, m))
            .transpose()?;
        Ok(Self {
            name,
            config,
            curriculum,
            mask,
            goal: None,
            coins: CoinField::default(),
            goals_assigned: 0,
            goals_reached: 0,
        })
    }

    pub fn config(&self) -> &CourierConfig {
        &self.config
    }

    pub fn curriculum(&self) -> Option<&Curriculum> {
        self.curriculum.as_ref()
    }

    pub fn mask(&self) -> Option<&GoalMask> {
        self.mask.as_ref()
    }

    /// Hop count recorded when the current goal was assigned.
    pub fn goal_hops(&self) -> Option<u32> {
        self.goal.as_ref().and_then(|g| g.hops)
    }

    fn assign_goal(&mut self, ctx: &mut GameContext<'_>, from: NodeIdx) -> Result<(), GameError> {
        let constraints = GoalConstraints {
            min_distance_m: self.config.goal_radius_m,
            max_distance_m: self.curriculum.as_ref().map(|c| c.cap_m(ctx.total_steps)),
            mask: self.mask.as_ref().map(|m| (m, self.config.goal_mask.as_ref().map(|c| c.mode).unwrap_or_default())),
        };
        let node = sample_goal(ctx.graph, from, &constraints, ctx.rng)?;
        let paths = ShortestPaths::from_goal(ctx.graph, node);
        let hops = paths.distance(from);
        let base = match (self.config.reward, hops) {
            (_, None) => 0.0,
            (CourierReward::PanoCount, Some(h)) => h as f64,
            (CourierReward::PathLength, Some(_)) => path_length_m(ctx.graph, &paths, from),
        };
        let outside_early = haversine_m(ctx.graph.position(from), ctx.graph.position(node)) > self.config.early_radius_m;
        self.goal = Some(ActiveGoal {
            node,
            paths,
            hops,
            value: base * self.config.reward_scale,
            shaped: false,
            outside_early,
        });
        self.goals_assigned += 1;
        Ok(())
    }
}

fn path_length_m(graph: &StreetGraph, paths: &ShortestPaths, from: NodeIdx) -> f64 {
    paths
        .path_from(from)
        .map(|p| p.windows(2).map(|w| haversine_m(graph.position(w[0]), graph.position(w[1]))).sum())
        .unwrap_or(0.0)
}

impl Game for CourierGame {
    fn name(&self) -> &'static str {
        self.name
    }

    fn reset(&mut self, ctx: &mut GameContext<'_>) -> Result<Placement, GameError> {
        let start = random_placement(ctx.graph, ctx.rng);
        self.goals_assigned = 0;
        self.goals_reached = 0;
        self.coins = CoinField::scatter(ctx.graph, self.config.coin_fraction, start.node, ctx.rng);
        self.assign_goal(ctx, start.node)?;
        Ok(start)
    }

    fn step(&mut self, ctx: &mut GameContext<'_>, node: NodeIdx) -> Result<GameStep, GameError> {
        let goal = self.goal.as_mut().expect("courier stepped before reset");
        let d = haversine_m(ctx.graph.position(node), ctx.graph.position(goal.node));

        let mut shaping = 0.0;
        let early = self.config.early_radius_m;
        if self.config.early_reward && !goal.shaped && goal.outside_early && d <= early {
            shaping = 0.5 * goal.value * (1.0 - d / early);
            goal.shaped = true;
        }
        goal.outside_early = d > early;

        let reached = d <= self.config.goal_radius_m;
        let goal_reward = if reached { goal.value } else { 0.0 };
        if reached {
            self.goals_reached += 1;
            self.assign_goal(ctx, node)?;
        }
        let coin = self.coins.collect(node);

        let mut info = Info::new();
        info.insert("goal_reached".into(), reached.into());
        info.insert("goal_reward".into(), goal_reward.into());
        info.insert("shaping_reward".into(), shaping.into());
        info.insert("coin_reward".into(), coin.into());
        Ok(GameStep {
            reward: goal_reward + shaping + coin,
            done: false,
            info,
        })
    }

    fn goal(&self) -> Option<NodeIdx> {
        self.goal.as_ref().map(|g| g.node)
    }

    fn next_hop(&self, node: NodeIdx) -> Option<NodeIdx> {
        self.goal.as_ref().and_then(|g| g.paths.next_hop(node))
    }

    fn describe(&self, graph: &StreetGraph, node: NodeIdx, info: &mut Info) {
        let Some(goal) = &self.goal else { return };
        let p = graph.position(goal.node);
        info.insert("goal_id".into(), graph.node(goal.node).id.clone().into());
        info.insert("goal_lat".into(), p.lat.into());
        info.insert("goal_lng".into(), p.lng.into());
        info.insert("goal_hops".into(), goal.hops.into());
        info.insert("goal_value".into(), goal.value.into());
        info.insert("goal_distance_m".into(), haversine_m(graph.position(node), p).into());
        info.insert("goals_assigned".into(), self.goals_assigned.into());
        info.insert("goals_reached".into(), self.goals_reached.into());
        if self.config.coin_fraction > 0.0 {
            info.insert("coins_remaining".into(), self.coins.remaining().into());
        }
    }
}
