//! Courier benchmark: runs an agent for a number of episodes and reports
//! goal rewards, missed goals, half-trip time and throughput.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use panonav_core::engine::PanoSource;
use panonav_core::games::{EpisodeMetrics, EpisodeRecorder, OracleAgent, COURIER_GAME};
use panonav_core::panograph::StreetGraph;
use panonav_core::{Action, EnvConfig, EnvError, Environment, Info, ObservationKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BenchAgent {
    /// Follows the shortest path using the bearing to the next pano.
    Oracle,
    /// Uniform over the discrete action set.
    Random,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub agent: BenchAgent,
    pub game: String,
    pub episodes: u32,
    pub episode_length: u32,
    pub seed: u64,
    pub frame_size: u32,
    /// Keep every step's info for later inspection.
    pub keep_infos: bool,
    /// Episodes replayed for the warm-cache measurement; 0 skips it.
    pub warm_episodes: u32,
    /// Steps per timed window in the warm replay.
    pub warm_window: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            agent: BenchAgent::Oracle,
            game: COURIER_GAME.to_string(),
            episodes: 20,
            episode_length: 1000,
            seed: 0,
            frame_size: 84,
            keep_infos: false,
            warm_episodes: 2,
            warm_window: 64,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub agent: BenchAgent,
    pub game: String,
    pub nodes: usize,
    pub components: usize,
    pub episodes: Vec<EpisodeMetrics>,
    /// Mean goal rewards per episode.
    pub goal_rewards: f64,
    /// Missed fraction over all decided goals, in `[0, 1]`.
    pub fail_pct: f64,
    /// Mean over episodes that halved a goal distance at least once.
    pub t_half: Option<f64>,
    pub total_steps: u64,
    /// Steps per second of the benchmark run itself, cache misses included.
    pub wall_steps_per_sec: f64,
    /// Steps per second with every needed panorama already cached.
    pub warm_steps_per_sec: Option<f64>,
    pub warm_steps: u64,
    /// Step infos per episode, reset info first; empty unless requested.
    #[serde(skip)]
    pub infos: Vec<Vec<Info>>,
}

impl BenchReport {
    pub const HEADER: &'static str = "agent\tepisodes\tsteps\tGoal rewards\tFail\tT½\twarm steps/s\twall steps/s";

    pub fn table_row(&self) -> String {
        let opt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |v| format!("{v:.prec$}"));
        format!(
            "{}\t{}\t{}\t{:.2}\t{:.1}%\t{}\t{}\t{:.0}",
            serde_json::to_value(self.agent).expect("agent serializes").as_str().unwrap_or("?"),
            self.episodes.len(),
            self.total_steps,
            self.goal_rewards,
            100.0 * self.fail_pct,
            opt(self.t_half, 2),
            opt(self.warm_steps_per_sec, 0),
            self.wall_steps_per_sec,
        )
    }

    /// Human-readable report: warnings, the summary table and one line per
    /// episode.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if self.components > 1 {
            let _ = writeln!(
                out,
                "warning: graph has {} connected components; unreachable goals count as missed",
                self.components
            );
        }
        let _ = writeln!(out, "{}", Self::HEADER);
        let _ = writeln!(out, "{}", self.table_row());
        let _ = writeln!(out, "episode\tsteps\tassigned\treached\tfailed\tcensored\tgoal rewards\tT½");
        for (i, m) in self.episodes.iter().enumerate() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{:.2}\t{}",
                i + 1,
                m.steps,
                m.goals_assigned,
                m.goals_reached,
                m.goals_failed,
                m.goals_censored,
                m.goal_rewards,
                m.t_half.map_or("-".to_string(), |t| format!("{t:.2}")),
            );
        }
        out
    }
}

/// One recorded episode: what the agent did and where it ended up.
struct Recording {
    actions: Vec<Action>,
    panos: Vec<String>,
}

fn info_str(info: &Info, key: &str) -> String {
    info.get(key).and_then(|v| v.as_str()).unwrap_or_default().to_string()
}

pub fn env_config(base: &EnvConfig, cfg: &BenchConfig) -> EnvConfig {
    EnvConfig {
        game: cfg.game.clone(),
        seed: cfg.seed,
        episode_length: cfg.episode_length,
        frame_size: cfg.frame_size,
        observations: vec![ObservationKind::ViewImage],
        auto_reset: false,
        ..base.clone()
    }
}

pub fn run_bench(
    graph: Arc<StreetGraph>,
    source: Arc<dyn PanoSource>,
    base: &EnvConfig,
    cfg: &BenchConfig,
) -> Result<BenchReport, EnvError> {
    let config = env_config(base, cfg);
    let mut env = Environment::new(Arc::clone(&graph), Arc::clone(&source), config.clone())?;
    let oracle = OracleAgent::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_a9e7);
    let num_actions = config.actions.len();

    let mut episodes = Vec::new();
    let mut infos = Vec::new();
    let mut recordings = Vec::new();
    let mut total_steps = 0u64;
    let started = Instant::now();
    for _ in 0..cfg.episodes {
        env.reset()?;
        let mut info = env.info();
        let mut recorder = EpisodeRecorder::start(&info);
        let mut kept = cfg.keep_infos.then(|| vec![info.clone()]);
        let mut rec = Recording {
            actions: Vec::new(),
            panos: Vec::new(),
        };
        loop {
            let action: Action = match cfg.agent {
                BenchAgent::Oracle => oracle.act(&info).into(),
                BenchAgent::Random => Action::Discrete(rng.gen_range(0..num_actions)),
            };
            let r = env.step(action)?;
            total_steps += 1;
            recorder.record(r.reward, &r.info);
            rec.actions.push(action);
            rec.panos.push(info_str(&r.info, "pano_id"));
            info = r.info;
            if let Some(k) = kept.as_mut() {
                k.push(info.clone());
            }
            if r.done {
                break;
            }
        }
        episodes.push(recorder.finish());
        infos.extend(kept);
        if recordings.len() < cfg.warm_episodes as usize {
            recordings.push(rec);
        }
    }
    let wall = started.elapsed();

    let (warm_steps, warm_time) = if recordings.is_empty() {
        (0, Duration::ZERO)
    } else {
        let mut replay = Environment::new(graph.clone(), source, config)?;
        warm_replay(&mut replay, &recordings, cfg.warm_window.max(1))?
    };

    let n = episodes.len().max(1) as f64;
    let (failed, decided) = episodes
        .iter()
        .fold((0, 0), |(f, d), m| (f + m.goals_failed, d + m.goals_failed + m.goals_reached));
    let halves: Vec<f64> = episodes.iter().filter_map(|m| m.t_half).collect();
    Ok(BenchReport {
        agent: cfg.agent,
        game: cfg.game.clone(),
        nodes: graph.len(),
        components: graph.component_count(),
        goal_rewards: episodes.iter().map(|m| m.goal_rewards).sum::<f64>() / n,
        fail_pct: if decided == 0 { 0.0 } else { failed as f64 / decided as f64 },
        t_half: (!halves.is_empty()).then(|| halves.iter().sum::<f64>() / halves.len() as f64),
        episodes,
        total_steps,
        wall_steps_per_sec: total_steps as f64 / wall.as_secs_f64().max(1e-9),
        warm_steps_per_sec: (warm_steps > 0).then(|| warm_steps as f64 / warm_time.as_secs_f64().max(1e-9)),
        warm_steps,
        infos,
    })
}

/// Replays recorded episodes from the same seed. Before each window the
/// panoramas it will show are loaded untimed, so only stepping, projection
/// and game logic are measured.
fn warm_replay(env: &mut Environment, recordings: &[Recording], window: usize) -> Result<(u64, Duration), EnvError> {
    let mut steps = 0u64;
    let mut timed = Duration::ZERO;
    for rec in recordings {
        env.reset()?;
        for (actions, panos) in rec.actions.chunks(window).zip(rec.panos.chunks(window)) {
            env.warm_cache(panos.iter().map(String::as_str))?;
            let t = Instant::now();
            for action in actions {
                env.step(*action)?;
            }
            timed += t.elapsed();
            steps += actions.len() as u64;
            let here = info_str(&env.info(), "pano_id");
            if Some(&here) != panos.last() {
                return Err(EnvError::Config(format!(
                    "replay diverged: at {here}, recorded {}",
                    panos.last().map_or("", String::as_str)
                )));
            }
        }
    }
    Ok((steps, timed))
}
