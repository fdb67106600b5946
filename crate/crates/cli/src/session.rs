//! Transport-independent session state machine: one environment per
//! session, one reply per request.

use std::sync::Arc;

use panonav_core::engine::{PanoSource, StepResult};
use panonav_core::games::GAME_NAMES;
use panonav_core::panograph::StreetGraph;
use panonav_core::{Action, ActionTuple, EnvConfig, EnvError, Environment, ObservationKind};

use crate::protocol::{codes, encode_observation, FrameMode, Message, Outgoing, Payload, SessionSettings, PROTOCOL_NAME, PROTOCOL_VERSION};

/// Read-only state shared by every session of a server.
#[derive(Clone)]
pub struct World {
    pub graph: Arc<StreetGraph>,
    pub source: Arc<dyn PanoSource>,
    /// Starting configuration of each new session.
    pub base: EnvConfig,
}

pub struct Session {
    world: World,
    number: u64,
    config: EnvConfig,
    env: Option<Environment>,
    greeted: bool,
    frames: FrameMode,
    last_id: u64,
    last_client_id: Option<u64>,
    next_blob: u32,
    closed: bool,
}

impl Session {
    pub fn new(world: World, number: u64) -> Self {
        let config = world.base.clone();
        Self {
            world,
            number,
            config,
            env: None,
            greeted: false,
            frames: FrameMode::Binary,
            last_id: 0,
            last_client_id: None,
            next_blob: 0,
            closed: false,
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// True once `bye` has been exchanged.
    pub fn is_closed(&self) -> bool {
        self.closed
    }

    fn reply(&mut self, reply_to: Option<u64>, payload: Payload) -> Outgoing {
        self.last_id += 1;
        Outgoing::Message(Message {
            id: self.last_id,
            reply_to,
            payload,
        })
    }

    fn error(&mut self, reply_to: Option<u64>, code: &str, message: impl Into<String>) -> Vec<Outgoing> {
        vec![self.reply(reply_to, Payload::error(code, message))]
    }

    /// Error reply for input that is not a message at all.
    pub fn reject(&mut self, code: &str, message: impl Into<String>) -> Vec<Outgoing> {
        self.error(None, code, message)
    }

    /// Handles raw JSON text; malformed input yields an error reply.
    pub fn handle_text(&mut self, text: &str) -> Vec<Outgoing> {
        match Message::from_json(text) {
            Ok(m) => self.handle(m),
            Err(e) => self.error(None, codes::MALFORMED, e.to_string()),
        }
    }

    pub fn handle(&mut self, msg: Message) -> Vec<Outgoing> {
        let id = Some(msg.id);
        if self.last_client_id.is_some_and(|last| msg.id <= last) {
            return self.error(id, codes::BAD_ID, format!("message id {} does not increase", msg.id));
        }
        self.last_client_id = Some(msg.id);
        match msg.payload {
            Payload::Hello {
                protocol,
                version,
                frames,
                ..
            } => {
                if protocol != PROTOCOL_NAME || version != PROTOCOL_VERSION {
                    return self.error(
                        id,
                        codes::UNSUPPORTED_VERSION,
                        format!("server speaks {PROTOCOL_NAME} v{PROTOCOL_VERSION}, got {protocol} v{version}"),
                    );
                }
                self.greeted = true;
                self.frames = frames;
                let hello = Payload::Hello {
                    protocol: PROTOCOL_NAME.into(),
                    version: PROTOCOL_VERSION,
                    frames,
                    games: GAME_NAMES.iter().map(|g| g.to_string()).collect(),
                    session: Some(self.number),
                };
                vec![self.reply(id, hello)]
            }
            _ if !self.greeted => self.error(id, codes::NO_HELLO, "send hello first"),
            Payload::Configure { settings } => match self.configure(&settings) {
                Ok(()) => {
                    let effective = self.effective_settings();
                    vec![self.reply(id, Payload::Configure { settings: effective })]
                }
                Err(e) => self.error(id, codes::BAD_CONFIG, e),
            },
            Payload::Reset {} => match self.reset() {
                Ok(out) => self.obs_reply(id, out),
                Err(e) => self.env_error(id, e),
            },
            Payload::Step { action, discrete } => {
                let action: Action = match (action, discrete) {
                    (Some(a), None) => match ActionTuple::from_array(a) {
                        Ok(t) => t.into(),
                        Err(e) => return self.env_error(id, e),
                    },
                    (None, Some(i)) => Action::Discrete(i),
                    _ => return self.error(id, codes::MALFORMED, "step needs exactly one of action or discrete"),
                };
                let Some(env) = self.env.as_mut() else {
                    return self.error(id, codes::NOT_RESET, "step before reset");
                };
                match env.step(action) {
                    Ok(r) => self.obs_reply(id, r),
                    Err(e) => self.env_error(id, e),
                }
            }
            Payload::Bye {} => {
                self.closed = true;
                self.env = None;
                vec![self.reply(id, Payload::Bye {})]
            }
            Payload::Obs { .. } | Payload::Error { .. } => {
                self.error(id, codes::MALFORMED, "obs and error are server-to-client only")
            }
        }
    }

    fn configure(&mut self, s: &SessionSettings) -> Result<(), String> {
        let mut c = self.config.clone();
        if let Some(game) = &s.game {
            c.game = game.clone();
        }
        if let Some(seed) = s.seed {
            c.seed = seed;
        }
        if let Some(size) = s.frame_size {
            c.frame_size = size;
        }
        if let Some(fov) = s.fov {
            c.fov = fov;
        }
        if let Some(len) = s.episode_length {
            c.episode_length = len;
        }
        if let Some(auto) = s.auto_reset {
            c.auto_reset = auto;
        }
        if let Some(size) = s.graph_image_size {
            c.graph_image_size = size;
        }
        if let Some(names) = &s.observations {
            c.observations = names
                .iter()
                .map(|n| n.parse::<ObservationKind>())
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
        } else if let Some(on) = s.graph_image {
            c.observations.retain(|k| *k != ObservationKind::GraphImage);
            if on {
                c.observations.push(ObservationKind::GraphImage);
            }
        }
        c.validate().map_err(|e| e.to_string())?;
        // building here reports unknown games now rather than at the next
        // reset, and drops any running episode
        let env = Environment::new(Arc::clone(&self.world.graph), Arc::clone(&self.world.source), c.clone())
            .map_err(|e| e.to_string())?;
        self.config = c;
        self.env = Some(env);
        Ok(())
    }

    fn effective_settings(&self) -> SessionSettings {
        let c = &self.config;
        SessionSettings {
            game: Some(c.game.clone()),
            seed: Some(c.seed),
            frame_size: Some(c.frame_size),
            fov: Some(c.fov),
            episode_length: Some(c.episode_length),
            auto_reset: Some(c.auto_reset),
            graph_image: Some(c.observations.contains(&ObservationKind::GraphImage)),
            graph_image_size: Some(c.graph_image_size),
            observations: Some(c.observations.iter().map(|k| k.name().to_string()).collect()),
        }
    }

    fn reset(&mut self) -> Result<StepResult, EnvError> {
        if self.env.is_none() {
            self.env = Some(Environment::new(
                Arc::clone(&self.world.graph),
                Arc::clone(&self.world.source),
                self.config.clone(),
            )?);
        }
        let env = self.env.as_mut().expect("environment just built");
        let observation = env.reset()?;
        Ok(StepResult {
            observation,
            reward: 0.0,
            done: false,
            info: env.info(),
        })
    }

    fn obs_reply(&mut self, reply_to: Option<u64>, r: StepResult) -> Vec<Outgoing> {
        let (frames, mut out, observation) = encode_observation(&r.observation, self.frames, &mut self.next_blob);
        let obs = Payload::Obs {
            reward: r.reward,
            done: r.done,
            info: r.info,
            frames,
            observation,
        };
        out.push(self.reply(reply_to, obs));
        out
    }

    fn env_error(&mut self, reply_to: Option<u64>, e: EnvError) -> Vec<Outgoing> {
        let code = match e {
            EnvError::NotReset => codes::NOT_RESET,
            EnvError::EpisodeOver => codes::EPISODE_OVER,
            EnvError::ActionOutOfRange { .. } | EnvError::InvalidAction(_) => codes::INVALID_ACTION,
            _ => codes::ENV_ERROR,
        };
        self.error(reply_to, code, e.to_string())
    }
}
