use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Game, GameContext, GameError, GameStep, Info, Placement};
use crate::panograph::{NodeIdx, StreetGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoinConfig {
    /// Fraction of nodes that carry a coin at reset.
    pub coin_fraction: f64,
}

impl Default for CoinConfig {
    fn default() -> Self {
        Self { coin_fraction: 0.1 }
    }
}

/// Coins scattered over nodes; each pays 1 once per episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoinField {
    remaining: BTreeSet<NodeIdx>,
    placed: usize,
}

impl CoinField {
    /// Places `round(fraction * |V|)` coins on distinct nodes other than `exclude`.
    pub fn scatter(graph: &StreetGraph, fraction: f64, exclude: NodeIdx, rng: &mut ChaCha8Rng) -> Self {
        let candidates = graph.len().saturating_sub(1);
        let count = ((fraction * graph.len() as f64).round() as usize).min(candidates);
        let remaining: BTreeSet<NodeIdx> = index::sample(rng, candidates, count)
            .into_iter()
            // skip over the excluded node
            .map(|i| if i >= exclude { i + 1 } else { i })
            .collect();
        Self { placed: remaining.len(), remaining }
    }

    pub fn from_nodes(nodes: impl IntoIterator<Item = NodeIdx>) -> Self {
        let remaining: BTreeSet<NodeIdx> = nodes.into_iter().collect();
        Self { placed: remaining.len(), remaining }
    }

    /// Collects the coin at `node`, returning its reward.
    pub fn collect(&mut self, node: NodeIdx) -> f64 {
        if self.remaining.remove(&node) {
            1.0
        } else {
            0.0
        }
    }

    pub fn placed(&self) -> usize {
        self.placed
    }

    pub fn remaining(&self) -> usize {
        self.remaining.len()
    }

    pub fn has_coin(&self, node: NodeIdx) -> bool {
        self.remaining.contains(&node)
    }
}

pub(crate) fn random_placement(graph: &StreetGraph, rng: &mut ChaCha8Rng) -> Placement {
    Placement {
        node: rng.gen_range(0..graph.len()),
        yaw: rng.gen_range(0.0..360.0),
    }
}

pub struct CoinGame {
    config: CoinConfig,
    coins: CoinField,
}

impl CoinGame {
    pub fn new(config: CoinConfig) -> Result<Self, GameError> {
        if !(0.0..=1.0).contains(&config.coin_fraction) {
            return Err(GameError::InvalidConfig(format!(
                "coin_fraction must be in [0, 1], got {}",
                config.coin_fraction
            )));
        }
        Ok(Self {
            config,
            coins: CoinField::default(),
        })
    }

    pub fn coins(&self) -> &CoinField {
        &self.coins
    }
}

impl Game for CoinGame {
    fn name(&self) -> &'static str {
        super::COIN_GAME
    }

    fn reset(&mut self, ctx: &mut GameContext<'_>) -> Result<Placement, GameError> {
        let start = random_placement(ctx.graph, ctx.rng);
        self.coins = CoinField::scatter(ctx.graph, self.config.coin_fraction, start.node, ctx.rng);
        Ok(start)
    }

    fn step(&mut self, _ctx: &mut GameContext<'_>, node: NodeIdx) -> Result<GameStep, GameError> {
        let reward = self.coins.collect(node);
        let mut info = Info::new();
        info.insert("coin_reward".into(), reward.into());
        Ok(GameStep {
            reward,
            done: false,
            info,
        })
    }

    fn describe(&self, _graph: &StreetGraph, _node: NodeIdx, info: &mut Info) {
        info.insert("coins_placed".into(), self.coins.placed().into());
        info.insert("coins_remaining".into(), self.coins.remaining().into());
    }
}
