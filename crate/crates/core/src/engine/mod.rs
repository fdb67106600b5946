//! The reset/step loop: agent pose, actions, observations and the game.

mod action;
mod cache;
mod map;
mod observation;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::RgbImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::games::{self, Game, GameConfig, GameContext, GameError, Info};
use crate::panograph::{self, signed_deg, GraphError, Manifest, StreetGraph};
use crate::projector::{ProjectError, Projector, ViewSpec};
use crate::synthcity::{self, SyntheticPanos};

pub use action::{
    apply_action, apply_move_forward, Action, ActionTuple, AgentPose, DiscreteActionSet, MAX_FOV_DEG, MIN_FOV_DEG,
    MOVE_TOLERANCE_DEG,
};
pub use cache::{CacheStats, DirPanos, PanoCache, PanoSource};
pub use map::MapRenderer;
pub use observation::{
    discretize_latlng, discretize_yaw, neighbors_vector, ObsValue, Observation, ObservationKind, LATLNG_BINS_PER_AXIS,
    NEIGHBOR_BINS, YAW_BINS,
};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("step called before reset")]
    NotReset,
    #[error("episode is over; call reset")]
    EpisodeOver,
    #[error("discrete action {index} out of range for {len} actions")]
    ActionOutOfRange { index: usize, len: usize },
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("invalid environment config: {0}")]
    Config(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Project(#[from] ProjectError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Container directory used by [`Environment::from_config`].
    pub graph_path: Option<PathBuf>,
    pub game: String,
    pub observations: Vec<ObservationKind>,
    /// Side of the square view and thumbnail images.
    pub frame_size: u32,
    pub graph_image_size: u32,
    /// Initial horizontal field of view in degrees.
    pub fov: f64,
    pub episode_length: u32,
    pub seed: u64,
    /// Start a new episode inside the step that ends the previous one.
    pub auto_reset: bool,
    pub cache_budget_bytes: usize,
    pub actions: DiscreteActionSet,
    pub games: GameConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            graph_path: None,
            game: games::COURIER_GAME.to_string(),
            observations: vec![ObservationKind::ViewImage],
            frame_size: 84,
            graph_image_size: 84,
            fov: 60.0,
            episode_length: 1000,
            seed: 0,
            auto_reset: true,
            cache_budget_bytes: 256 << 20,
            actions: DiscreteActionSet::default(),
            games: GameConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::Config(m));
        if self.frame_size == 0 || self.graph_image_size == 0 {
            return bad("image sizes must be positive".into());
        }
        if !(MIN_FOV_DEG..=MAX_FOV_DEG).contains(&self.fov) {
            return bad(format!("fov must be in [{MIN_FOV_DEG}, {MAX_FOV_DEG}], got {}", self.fov));
        }
        if self.episode_length == 0 {
            return bad("episode_length must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: Info,
}

#[derive(Debug, Clone, Copy)]
struct Episode {
    pose: AgentPose,
    step: u32,
    reward: f64,
    finished: bool,
}

/// Chooses stored images when present, else renders from the generator
/// parameters recorded in the manifest.
pub fn open_pano_source(
    dir: &Path,
    manifest: &Manifest,
    graph: Arc<StreetGraph>,
) -> Result<Arc<dyn PanoSource>, GraphError> {
    if dir.join("images").is_dir() {
        return Ok(Arc::new(DirPanos::new(dir)));
    }
    match synthcity::params_from_manifest(manifest) {
        Some(params) => Ok(Arc::new(SyntheticPanos::new(graph, params))),
        None => Err(GraphError::Malformed {
            what: dir.display().to_string(),
            detail: "no images directory and no generator parameters".into(),
        }),
    }
}

/// One agent in one street graph playing one game.
pub struct Environment {
    graph: Arc<StreetGraph>,
    config: EnvConfig,
    game: Box<dyn Game>,
    cache: PanoCache,
    projector: Projector,
    map: Option<MapRenderer>,
    rng: ChaCha8Rng,
    total_steps: u64,
    episodes: u64,
    episode: Option<Episode>,
    thumbnails: Vec<RgbImage>,
}

impl Environment {
    pub fn new(graph: Arc<StreetGraph>, source: Arc<dyn PanoSource>, config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        if graph.is_empty() {
            return Err(GraphError::EmptyGraph.into());
        }
        let game = games::build_game(&config.game, &config.games, &graph)?;
        let map = config
            .observations
            .contains(&ObservationKind::GraphImage)
            .then(|| MapRenderer::new(&graph, config.graph_image_size));
        Ok(Self {
            cache: PanoCache::new(source, config.cache_budget_bytes),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            graph,
            game,
            projector: Projector::new(),
            map,
            total_steps: 0,
            episodes: 0,
            episode: None,
            thumbnails: Vec::new(),
            config,
        })
    }

    /// Loads a container directory and builds an environment over it.
    pub fn open(dir: &Path, config: EnvConfig) -> Result<Self, EnvError> {
        let manifest = panograph::load_manifest(dir)?;
        let graph = Arc::new(panograph::load_graph(dir)?);
        let source = open_pano_source(dir, &manifest, Arc::clone(&graph))?;
        Self::new(graph, source, config)
    }

    /// Builds from `config.graph_path`.
    pub fn from_config(config: EnvConfig) -> Result<Self, EnvError> {
        let dir = config
            .graph_path
            .clone()
            .ok_or_else(|| EnvError::Config("graph_path is not set".into()))?;
        Self::open(&dir, config)
    }

    pub fn graph(&self) -> &Arc<StreetGraph> {
        &self.graph
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn game(&self) -> &dyn Game {
        self.game.as_ref()
    }

    pub fn pose(&self) -> Option<AgentPose> {
        self.episode.map(|e| e.pose)
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    /// Number of episodes started so far.
    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn cache_stats(&self) -> CacheStats {
        self.cache.stats()
    }

    /// Loads the given panoramas into the cache ahead of use. Purely a
    /// performance hint; observations are unaffected.
    pub fn warm_cache<'a>(&mut self, ids: impl IntoIterator<Item = &'a str>) -> Result<(), EnvError> {
        for id in ids {
            self.cache.get(id)?;
        }
        Ok(())
    }

    /// Restarts the random stream; the next reset behaves like the first
    /// reset of a fresh environment with this seed.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.config.seed = seed;
    }

    pub fn reset(&mut self) -> Result<Observation, EnvError> {
        let mut ctx = GameContext {
            graph: &self.graph,
            rng: &mut self.rng,
            total_steps: self.total_steps,
        };
        let placement = self.game.reset(&mut ctx)?;
        self.episodes += 1;
        self.episode = Some(Episode {
            pose: AgentPose {
                node: placement.node,
                yaw: panograph::normalize_deg(placement.yaw),
                pitch: 0.0,
                fov: self.config.fov,
            },
            step: 0,
            reward: 0.0,
            finished: false,
        });
        self.thumbnails.clear();
        if self.config.observations.contains(&ObservationKind::Thumbnails) {
            for (node, heading) in self.game.thumbnail_views() {
                let view = ViewSpec::new(heading, 0.0, self.config.fov, self.config.frame_size)?;
                let pano = self.cache.get(&self.graph.node(node).id)?;
                self.thumbnails.push(self.projector.project(&pano, &view)?);
            }
        }
        self.observe()
    }

    pub fn step(&mut self, action: impl Into<Action>) -> Result<StepResult, EnvError> {
        let action = match action.into() {
            Action::Tuple(t) => ActionTuple::from_array(t.to_array())?,
            Action::Discrete(i) => self.config.actions.get(i)?,
        };
        let episode = match &mut self.episode {
            None => return Err(EnvError::NotReset),
            Some(e) if e.finished => return Err(EnvError::EpisodeOver),
            Some(e) => e,
        };
        let before = episode.pose.node;
        episode.pose = apply_action(episode.pose, &action, &self.graph);
        episode.step += 1;
        self.total_steps += 1;
        let mut ctx = GameContext {
            graph: &self.graph,
            rng: &mut self.rng,
            total_steps: self.total_steps,
        };
        let outcome = self.game.step(&mut ctx, episode.pose.node)?;
        episode.reward += outcome.reward;
        let time_up = episode.step >= self.config.episode_length;
        let done = outcome.done || time_up;
        let (moved, episode_reward) = (episode.pose.node != before, episode.reward);

        let mut info = self.info();
        info.extend(outcome.info);
        info.insert("moved".into(), moved.into());
        info.insert("reward".into(), outcome.reward.into());
        info.insert("episode_reward".into(), episode_reward.into());
        info.insert("time_up".into(), time_up.into());

        let observation = if done && self.config.auto_reset {
            self.reset()?
        } else {
            if done {
                if let Some(e) = &mut self.episode {
                    e.finished = true;
                }
            }
            self.observe()?
        };
        Ok(StepResult {
            observation,
            reward: outcome.reward,
            done,
            info,
        })
    }

    /// Relative bearing in `[-180, 180)` from the agent's yaw to the next
    /// node on a shortest path toward the game's current target.
    pub fn bearing_to_next_pano(&self) -> Option<f64> {
        let pose = self.pose()?;
        let next = self.game.next_hop(pose.node)?;
        Some(signed_deg(self.graph.bearing(pose.node, next) - pose.yaw))
    }

    /// Current state as an info map; empty before the first reset.
    pub fn info(&self) -> Info {
        let mut info = Info::new();
        let (Some(e), graph) = (&self.episode, &self.graph) else {
            return info;
        };
        let node = graph.node(e.pose.node);
        info.insert("episode".into(), self.episodes.into());
        info.insert("step".into(), e.step.into());
        info.insert("total_steps".into(), self.total_steps.into());
        info.insert("pano_id".into(), node.id.clone().into());
        info.insert("lat".into(), node.lat.into());
        info.insert("lng".into(), node.lng.into());
        info.insert("yaw".into(), e.pose.yaw.into());
        info.insert("pitch".into(), e.pose.pitch.into());
        info.insert("fov".into(), e.pose.fov.into());
        self.game.describe(graph, e.pose.node, &mut info);
        if let Some(b) = self.bearing_to_next_pano() {
            info.insert("bearing_to_next_pano".into(), b.into());
        }
        info
    }

    /// Observation of the current state without stepping.
    pub fn observe(&mut self) -> Result<Observation, EnvError> {
        let pose = self.pose().ok_or(EnvError::NotReset)?;
        let graph = Arc::clone(&self.graph);
        let bounds = graph.bounds();
        let goal = self.game.goal();
        let kinds = self.config.observations.clone();
        let mut channels = Vec::with_capacity(kinds.len());
        for kind in kinds {
            let value = match kind {
                ObservationKind::ViewImage => {
                    let pano = self.cache.get(&graph.node(pose.node).id)?;
                    let view = ViewSpec::new(pose.yaw, pose.pitch, pose.fov, self.config.frame_size)?;
                    ObsValue::Image(self.projector.project(&pano, &view)?)
                }
                ObservationKind::GraphImage => {
                    let map = self
                        .map
                        .get_or_insert_with(|| MapRenderer::new(&graph, self.config.graph_image_size));
                    ObsValue::Image(map.render(&graph, &pose, goal))
                }
                ObservationKind::Pitch => ObsValue::Scalar(pose.pitch),
                ObservationKind::Yaw => ObsValue::Scalar(pose.yaw),
                ObservationKind::YawLabel => ObsValue::Label(discretize_yaw(pose.yaw)),
                ObservationKind::Metadata => ObsValue::Pano(Box::new(graph.node(pose.node).clone())),
                ObservationKind::TargetMetadata => match goal {
                    Some(g) => ObsValue::Pano(Box::new(graph.node(g).clone())),
                    None => ObsValue::Missing,
                },
                ObservationKind::Latlng => ObsValue::LatLng(graph.position(pose.node)),
                ObservationKind::LatlngLabel => ObsValue::Label(discretize_latlng(graph.position(pose.node), &bounds)),
                ObservationKind::TargetLatlng => match goal {
                    Some(g) => ObsValue::LatLng(graph.position(g)),
                    None => ObsValue::Missing,
                },
                ObservationKind::TargetLatlngLabel => match goal {
                    Some(g) => ObsValue::Label(discretize_latlng(graph.position(g), &bounds)),
                    None => ObsValue::Missing,
                },
                ObservationKind::Thumbnails => {
                    let range = self.game.instruction_view().map(|v| v.thumbnails).unwrap_or(0..0);
                    ObsValue::Images(self.thumbnails.get(range).map(<[RgbImage]>::to_vec).unwrap_or_default())
                }
                ObservationKind::Instructions => {
                    ObsValue::Texts(self.game.instruction_view().map(|v| v.instructions).unwrap_or_default())
                }
                ObservationKind::Neighbors => ObsValue::Bins(neighbors_vector(&pose, &graph).to_vec()),
                ObservationKind::GroundTruthDirection => ObsValue::Scalar(self.bearing_to_next_pano().unwrap_or(0.0)),
            };
            channels.push((kind, value));
        }
        Ok(Observation { channels })
    }
}
