//! Execution-side monitor: estimates the target's cruise speed from observed
//! positions and decides when the learner's simulation model is stale.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::SimulationModel;
use crate::world::{EnvironmentParams, EpisodeOutcome, EpisodeTrace};

/// When to tell the learner that its model no longer matches the world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerPolicy {
    /// Relative deviation of the speed estimate from the model that counts as a change.
    pub delta_rel: f64,
    /// Consecutive episodes the deviation must persist.
    pub sustain_episodes: usize,
    /// Absolute drop of windowed success rate, relative to the best window this epoch.
    pub perf_drop: f64,
    pub perf_window_len: usize,
}

impl Default for TriggerPolicy {
    fn default() -> Self {
        TriggerPolicy {
            delta_rel: 0.2,
            sustain_episodes: 3,
            perf_drop: 0.6,
            perf_window_len: 20,
        }
    }
}

impl TriggerPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_rel > 0.0 && self.delta_rel.is_finite()) {
            return Err(Error::config("delta_rel", "must be > 0"));
        }
        if self.sustain_episodes < 1 {
            return Err(Error::config("sustain_episodes", "must be >= 1"));
        }
        if !(self.perf_drop > 0.0 && self.perf_drop <= 1.0) {
            return Err(Error::config("perf_drop", "must lie in (0, 1]"));
        }
        if self.perf_window_len < 1 {
            return Err(Error::config("perf_window_len", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChangeCause {
    ParameterDelta,
    PerformanceDrop,
}

/// Monitor to learner: the environment changed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvChangedMsg {
    pub new_estimate: EnvironmentParams,
    pub cause: ChangeCause,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateStatus {
    Updated,
    /// The trace held fewer than two positions; the speed estimate was kept.
    Insufficient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorState {
    /// Per-tick target displacement and whether the tick was a flee tick.
    displacements: VecDeque<(f64, bool)>,
    displacement_window: usize,
    speed_estimate: Option<f64>,
    /// One entry per recorded episode since the last adjustment.
    estimate_history: VecDeque<Option<f64>>,
    history_len: usize,
    perf_window: VecDeque<bool>,
    perf_window_len: usize,
    best_perf_mean: Option<f64>,
    episodes_since_change: u64,
}

impl MonitorState {
    pub fn new(displacement_window: usize, policy: &TriggerPolicy) -> Self {
        MonitorState {
            displacements: VecDeque::with_capacity(displacement_window),
            displacement_window: displacement_window.max(1),
            speed_estimate: None,
            estimate_history: VecDeque::new(),
            history_len: policy.sustain_episodes,
            perf_window: VecDeque::with_capacity(policy.perf_window_len),
            perf_window_len: policy.perf_window_len,
            best_perf_mean: None,
            episodes_since_change: 0,
        }
    }

    pub fn speed_estimate(&self) -> Option<f64> {
        self.speed_estimate
    }

    pub fn episodes_since_change(&self) -> u64 {
        self.episodes_since_change
    }

    pub fn perf_mean(&self) -> Option<f64> {
        if self.perf_window.is_empty() {
            None
        } else {
            Some(self.perf_window.iter().filter(|&&s| s).count() as f64 / self.perf_window.len() as f64)
        }
    }

    pub fn best_perf_mean(&self) -> Option<f64> {
        self.best_perf_mean
    }

    fn perf_window_full(&self) -> bool {
        self.perf_window.len() == self.perf_window_len
    }

    /// Folds one episode into the monitor.
    ///
    /// A tick counts as a flee tick when the tracker was closer than
    /// `evasion_threshold` at the moment the target moved; flee ticks are
    /// excluded from the cruise-speed estimate.
    pub fn update(&mut self, trace: &EpisodeTrace, outcome: &EpisodeOutcome, evasion_threshold: f64) -> UpdateStatus {
        let status = if trace.target.len() < 2 {
            UpdateStatus::Insufficient
        } else {
            for (i, pair) in trace.target.windows(2).enumerate() {
                let step = pair[1].distance(pair[0]);
                let flee = trace
                    .tracker
                    .get(i)
                    .is_some_and(|t| t.distance(pair[0]) < evasion_threshold);
                if self.displacements.len() == self.displacement_window {
                    self.displacements.pop_front();
                }
                self.displacements.push_back((step, flee));
            }
            self.speed_estimate = self
                .displacements
                .iter()
                .filter(|(_, flee)| !flee)
                .map(|&(d, _)| d)
                .reduce(f64::max);
            UpdateStatus::Updated
        };
        self.record(self.speed_estimate, [outcome.success]);
        status
    }

    /// Records one observation step: the current estimate (appended once to
    /// the sustain history) and any number of episode results.
    pub fn record(&mut self, estimate: Option<f64>, successes: impl IntoIterator<Item = bool>) {
        self.speed_estimate = estimate;
        if self.estimate_history.len() == self.history_len {
            self.estimate_history.pop_front();
        }
        self.estimate_history.push_back(estimate);
        for s in successes {
            if self.perf_window.len() == self.perf_window_len {
                self.perf_window.pop_front();
            }
            self.perf_window.push_back(s);
            if self.perf_window_full() {
                let m = self.perf_mean().expect("window is nonempty");
                if self.best_perf_mean.map_or(true, |b| m > b) {
                    self.best_perf_mean = Some(m);
                }
            }
        }
        self.episodes_since_change += 1;
    }

    /// Clears everything scoped to the previous model epoch. Displacements
    /// describe the world, not the model, and are kept.
    pub fn reset_after_adjustment(&mut self) {
        self.estimate_history.clear();
        self.perf_window.clear();
        self.best_perf_mean = None;
        self.episodes_since_change = 0;
    }
}

/// Free function form of [`MonitorState::update`].
pub fn monitor_update(
    m: &mut MonitorState,
    trace: &EpisodeTrace,
    outcome: &EpisodeOutcome,
    evasion_threshold: f64,
) -> UpdateStatus {
    m.update(trace, outcome, evasion_threshold)
}

fn relative_deviation(estimate: f64, model: f64) -> f64 {
    if model == 0.0 {
        if estimate == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (estimate - model).abs() / model
    }
}

/// Model environment with its cruise speed replaced by `speed`. The flee
/// speed is raised if needed so it keeps its margin over cruise.
pub fn with_cruise_speed(model: &EnvironmentParams, speed: f64) -> EnvironmentParams {
    let mut env = *model;
    env.target_cruise_speed = speed;
    if env.target_flee_speed <= speed {
        env.target_flee_speed = speed + (model.target_flee_speed - model.target_cruise_speed);
    }
    env
}

/// Parameter deviation is checked first and wins when both causes hold.
pub fn trigger_check(m: &MonitorState, model: &SimulationModel, pol: &TriggerPolicy) -> Option<EnvChangedMsg> {
    let modeled = model.env_estimate.target_cruise_speed;
    let k = pol.sustain_episodes;
    if m.estimate_history.len() >= k {
        let sustained = m
            .estimate_history
            .iter()
            .rev()
            .take(k)
            .all(|e| e.is_some_and(|v| relative_deviation(v, modeled) > pol.delta_rel));
        if sustained {
            let latest = m.estimate_history.back().copied().flatten().expect("checked above");
            return Some(EnvChangedMsg {
                new_estimate: with_cruise_speed(&model.env_estimate, latest),
                cause: ChangeCause::ParameterDelta,
            });
        }
    }

    if m.perf_window_full() {
        if let (Some(best), Some(now)) = (m.best_perf_mean, m.perf_mean()) {
            if best - now > pol.perf_drop {
                let new_estimate = match m.speed_estimate {
                    Some(v) => with_cruise_speed(&model.env_estimate, v),
                    None => model.env_estimate,
                };
                return Some(EnvChangedMsg {
                    new_estimate,
                    cause: ChangeCause::PerformanceDrop,
                });
            }
        }
    }
    None
}
