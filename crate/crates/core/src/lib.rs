//! Panorama-graph navigation environment.
//!
//! The crate is split along the lifecycle of an episode:
//!
//! * [`panograph`]: the street graph of panoramas, its on-disk container,
//!   geodesy, region carving, statistics and BFS shortest paths.
//! * [`synthcity`]: a deterministic generator of street grids and procedural
//!   equirectangular panoramas.
//! * [`projector`]: equirectangular to perspective projection of the agent view.
//! * [`engine`]: agent pose, actions, observations, panorama cache and the
//!   `reset`/`step` loop.
//! * [`games`]: coin, courier, curriculum courier and instruction games, the
//!   shortest-path oracle and episode metrics.

pub mod engine;
pub mod games;
pub mod panograph;
pub mod projector;
pub mod synthcity;

pub use engine::{Action, ActionTuple, EnvConfig, EnvError, Environment, Observation, ObservationKind, StepResult};
pub use games::{Game, GameConfig, Info};
pub use panograph::{LatLng, PanoRecord, StreetGraph};
