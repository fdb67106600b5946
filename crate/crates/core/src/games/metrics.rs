//! Per-episode courier statistics: missed goals, half-trip time and goal
//! rewards.

use serde::Serialize;

use super::Info;

/// Lifecycle of one assigned goal, in episode step numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoalTrace {
    /// Shortest-path hop count at assignment; `None` if unreachable.
    pub hops: Option<u32>,
    pub initial_distance_m: f64,
    pub assigned_at: u32,
    pub half_at: Option<u32>,
    pub reached_at: Option<u32>,
}

impl GoalTrace {
    /// Step budget after which a pending goal counts as missed.
    pub fn step_budget(&self) -> Option<u32> {
        self.hops.map(|h| 2 + 4 * h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub steps: u32,
    pub goals_assigned: usize,
    pub goals_reached: usize,
    /// Pending at the end with their step budget exhausted, or unreachable.
    pub goals_failed: usize,
    /// Pending at the end but still within their step budget; excluded.
    pub goals_censored: usize,
    /// Fraction in `[0, 1]` of decided goals that were missed.
    pub fail_pct: f64,
    /// Mean steps to halve the initial distance, over goals that did.
    pub t_half: Option<f64>,
    /// Sum of goal-arrival rewards, without shaping or coins.
    pub goal_rewards: f64,
    pub total_reward: f64,
    /// `(hops, steps taken)` for every reached goal.
    pub reached: Vec<(Option<u32>, u32)>,
}

pub fn compute_metrics(goals: &[GoalTrace], steps: u32, goal_rewards: f64, total_reward: f64) -> EpisodeMetrics {
    let mut reached = Vec::new();
    let (mut failed, mut censored) = (0, 0);
    for g in goals {
        match g.reached_at {
            Some(at) => reached.push((g.hops, at - g.assigned_at)),
            None => match g.step_budget() {
                Some(budget) if steps - g.assigned_at < budget => censored += 1,
                _ => failed += 1,
            },
        }
    }
    let decided = reached.len() + failed;
    let halves: Vec<u32> = goals.iter().filter_map(|g| g.half_at.map(|h| h - g.assigned_at)).collect();
    EpisodeMetrics {
        steps,
        goals_assigned: goals.len(),
        goals_reached: reached.len(),
        goals_failed: failed,
        goals_censored: censored,
        fail_pct: if decided == 0 { 0.0 } else { failed as f64 / decided as f64 },
        t_half: if halves.is_empty() {
            None
        } else {
            Some(halves.iter().map(|&h| h as f64).sum::<f64>() / halves.len() as f64)
        },
        goal_rewards,
        total_reward,
        reached,
    }
}

fn num(info: &Info, key: &str) -> Option<f64> {
    info.get(key).and_then(|v| v.as_f64())
}

/// Builds goal traces from courier step info.
#[derive(Debug, Clone, Default)]
pub struct EpisodeRecorder {
    goals: Vec<GoalTrace>,
    step: u32,
    goal_rewards: f64,
    total_reward: f64,
}

impl EpisodeRecorder {
    /// Starts from the info available right after reset.
    pub fn start(info: &Info) -> Self {
        let mut r = Self::default();
        r.assign(info);
        r
    }

    fn assign(&mut self, info: &Info) {
        let d = num(info, "goal_distance_m").unwrap_or(0.0);
        self.goals.push(GoalTrace {
            hops: info.get("goal_hops").and_then(|v| v.as_u64()).map(|h| h as u32),
            initial_distance_m: d,
            assigned_at: self.step,
            half_at: (d <= 0.0).then_some(self.step),
            reached_at: None,
        });
    }

    pub fn record(&mut self, reward: f64, info: &Info) {
        self.step += 1;
        self.total_reward += reward;
        self.goal_rewards += num(info, "goal_reward").unwrap_or(0.0);
        let step = self.step;
        let reached = info.get("goal_reached").and_then(|v| v.as_bool()).unwrap_or(false);
        let Some(current) = self.goals.last_mut() else { return };
        if reached {
            current.reached_at = Some(step);
            current.half_at.get_or_insert(step);
            self.assign(info);
        } else if current.half_at.is_none() {
            let d = num(info, "goal_distance_m").unwrap_or(f64::INFINITY);
            if d <= current.initial_distance_m / 2.0 {
                current.half_at = Some(step);
            }
        }
    }

    pub fn goals(&self) -> &[GoalTrace] {
        &self.goals
    }

    pub fn steps(&self) -> u32 {
        self.step
    }

    pub fn finish(&self) -> EpisodeMetrics {
        compute_metrics(&self.goals, self.step, self.goal_rewards, self.total_reward)
    }
}
