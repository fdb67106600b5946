//! Reward and termination rules layered on top of the environment.

mod coins;
mod courier;
mod goals;
mod instruction;
pub mod metrics;
pub mod oracle;

use std::collections::BTreeMap;
use std::ops::Range;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panograph::{GraphError, NodeIdx, StreetGraph};

pub use coins::{CoinConfig, CoinField, CoinGame};
pub use courier::{CourierConfig, CourierGame, CourierReward};
pub use goals::{sample_goal, Curriculum, COARSE_CELL_DEG, MEDIUM_CELL_DEG, CurriculumConfig, GoalConstraints, GoalMask, GoalMode, MaskConfig};
pub use instruction::{
    build_instruction_route, InstructionConfig, InstructionGame, InstructionRoute, InstructionVariant,
};
pub use metrics::{compute_metrics, EpisodeMetrics, EpisodeRecorder, GoalTrace};
pub use oracle::{oracle_action, oracle_policy, OracleAgent, DEFAULT_HORIZONTAL_ROT_DEG};

/// Per-step diagnostics, serialized into the step info map.
pub type Info = BTreeMap<String, serde_json::Value>;

pub const COIN_GAME: &str = "coin_game";
pub const COURIER_GAME: &str = "courier_game";
pub const CURRICULUM_COURIER_GAME: &str = "curriculum_courier_game";
pub const GOAL_INSTRUCTION_GAME: &str = "goal_instruction_game";
pub const INCREMENTAL_INSTRUCTION_GAME: &str = "incremental_instruction_game";
pub const STEP_BY_STEP_INSTRUCTION_GAME: &str = "step_by_step_instruction_game";

pub const GAME_NAMES: [&str; 6] = [
    COIN_GAME,
    COURIER_GAME,
    CURRICULUM_COURIER_GAME,
    GOAL_INSTRUCTION_GAME,
    INCREMENTAL_INSTRUCTION_GAME,
    STEP_BY_STEP_INSTRUCTION_GAME,
];

#[derive(Debug, Error)]
pub enum GameError {
    #[error("unknown game {0:?}")]
    UnknownGame(String),
    #[error("no eligible goal: {0}")]
    NoEligibleGoal(String),
    #[error("no path from {from} to {to}")]
    Unreachable { from: String, to: String },
    #[error("invalid game config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Everything a game may touch while resetting or stepping.
pub struct GameContext<'a> {
    pub graph: &'a StreetGraph,
    pub rng: &'a mut ChaCha8Rng,
    /// Steps taken across all episodes of the owning environment.
    pub total_steps: u64,
}

/// Initial agent placement chosen by a game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub node: NodeIdx,
    pub yaw: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GameStep {
    pub reward: f64,
    pub done: bool,
    pub info: Info,
}

/// Instruction material visible to the agent at the current step.
#[derive(Debug, Clone, PartialEq)]
pub struct InstructionView {
    pub instructions: Vec<String>,
    /// Indices into [`Game::thumbnail_views`].
    pub thumbnails: Range<usize>,
}

pub trait Game: Send {
    fn name(&self) -> &'static str;

    fn reset(&mut self, ctx: &mut GameContext<'_>) -> Result<Placement, GameError>;

    /// Called once after every environment step with the agent's node.
    fn step(&mut self, ctx: &mut GameContext<'_>, node: NodeIdx) -> Result<GameStep, GameError>;

    /// The absolute goal shown to the agent, if the game has one.
    fn goal(&self) -> Option<NodeIdx> {
        None
    }

    /// Next node on a shortest path from `node` toward the current target.
    fn next_hop(&self, _node: NodeIdx) -> Option<NodeIdx> {
        None
    }

    /// Adds the game's persistent state (current goal and so on) to `info`.
    fn describe(&self, _graph: &StreetGraph, _node: NodeIdx, _info: &mut Info) {}

    /// `(node, heading)` of every thumbnail of the current route.
    fn thumbnail_views(&self) -> Vec<(NodeIdx, f64)> {
        Vec::new()
    }

    fn instruction_view(&self) -> Option<InstructionView> {
        None
    }
}

/// Per-family configuration; only the section for the chosen game is used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    pub courier: CourierConfig,
    pub coin: CoinConfig,
    pub instruction: InstructionConfig,
}

/// Builds a game by its registered name.
pub fn build_game(name: &str, config: &GameConfig, graph: &StreetGraph) -> Result<Box<dyn Game>, GameError> {
    Ok(match name {
        COIN_GAME => Box::new(CoinGame::new(config.coin.clone())?),
        COURIER_GAME => Box::new(CourierGame::new(config.courier.clone(), graph, COURIER_GAME)?),
        CURRICULUM_COURIER_GAME => {
            let mut courier = config.courier.clone();
            courier.curriculum.get_or_insert_with(CurriculumConfig::default);
            Box::new(CourierGame::new(courier, graph, CURRICULUM_COURIER_GAME)?)
        }
        GOAL_INSTRUCTION_GAME => Box::new(InstructionGame::new(config.instruction.clone(), InstructionVariant::Goal)?),
        INCREMENTAL_INSTRUCTION_GAME => Box::new(InstructionGame::new(
            config.instruction.clone(),
            InstructionVariant::Incremental,
        )?),
        STEP_BY_STEP_INSTRUCTION_GAME => Box::new(InstructionGame::new(
            config.instruction.clone(),
            InstructionVariant::StepByStep,
        )?),
        other => return Err(GameError::UnknownGame(other.to_string())),
    })
}
