//! Punctuated anytime learning: one central learner serves a fleet of agents
//! that only run strategies. An observer checks on the fleet every
//! `observation_period` episodes, updates the central model if needed and
//! broadcasts the central best strategy.

use serde::{Deserialize, Serialize};

use crate::anytime::{AdjustmentMode, EpisodeRecord, LearningSystem, Published, RunLog};
use crate::config::{phase_at, total_episodes, ExperimentConfig, ScheduleEntry};
use crate::error::{Error, Result};
use crate::monitor::{trigger_check, MonitorState};
use crate::rng::{self, Role};
use crate::world::{run_episode_traced, ActuatorLimits};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetConfig {
    pub n_agents: usize,
    pub observation_period: u64,
    /// Per-agent true environment schedules. Empty means every agent follows
    /// the experiment schedule.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agent_schedules: Vec<Vec<ScheduleEntry>>,
}

impl FleetConfig {
    pub fn validate(&self, total: u64, limits: ActuatorLimits) -> Result<()> {
        if self.n_agents < 1 {
            return Err(Error::config("n_agents", "must be >= 1"));
        }
        if self.observation_period < 1 {
            return Err(Error::config("observation_period", "must be >= 1"));
        }
        if !self.agent_schedules.is_empty() {
            if self.agent_schedules.len() != self.n_agents {
                return Err(Error::config("agent_schedules", "need one schedule per agent"));
            }
            for sched in &self.agent_schedules {
                if total_episodes(sched) != total {
                    return Err(Error::config(
                        "agent_schedules",
                        "every agent schedule must span the experiment's episodes",
                    ));
                }
                for entry in sched {
                    if entry.episodes < 1 {
                        return Err(Error::config("episodes", "every schedule entry needs >= 1 episode"));
                    }
                    entry.env.validate()?;
                    if entry.env.limits() != limits {
                        return Err(Error::config("tracker_max_speed", "agent actuator limits differ"));
                    }
                }
            }
        }
        Ok(())
    }

    fn schedule_for<'a>(&'a self, agent: usize, default: &'a [ScheduleEntry]) -> &'a [ScheduleEntry] {
        self.agent_schedules.get(agent).map_or(default, Vec::as_slice)
    }
}

/// Result of a punctuated run.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetRun {
    pub seed: u64,
    pub agent_logs: Vec<RunLog>,
    /// Version of the central best strategy at the start of each episode.
    pub central_versions: Vec<u64>,
    /// Fleet-mean speed estimate handed to the trigger check, per episode.
    pub observer_estimates: Vec<Option<f64>>,
}

impl FleetRun {
    /// Longest run of consecutive episodes in which some agent executed a
    /// strategy older than the central best.
    pub fn max_staleness(&self) -> u64 {
        let mut worst = 0;
        for log in &self.agent_logs {
            let mut run = 0;
            for (rec, &central) in log.records.iter().zip(&self.central_versions) {
                if rec.strategy_version < central {
                    run += 1;
                    worst = worst.max(run);
                } else {
                    run = 0;
                }
            }
        }
        worst
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn run_punctuated(cfg: &ExperimentConfig, fleet: &FleetConfig, seed: u64) -> Result<FleetRun> {
    cfg.validate()?;
    let total = cfg.total_episodes();
    fleet.validate(total, cfg.initial_model.limits())?;
    let n = fleet.n_agents;
    let p = fleet.observation_period;

    let mut learning = LearningSystem::new(cfg, seed);
    let mut central = Published::initial(learning.best_msg());
    let mut held: Vec<Published> = vec![central.clone(); n];
    let mut monitors: Vec<MonitorState> = (0..n)
        .map(|_| MonitorState::new(cfg.monitor_window(), &cfg.trigger))
        .collect();
    let mut observer = MonitorState::new(cfg.monitor_window(), &cfg.trigger);
    let mut pending: Vec<bool> = Vec::new();

    let mut logs: Vec<RunLog> = (0..n)
        .map(|_| RunLog {
            seed,
            records: Vec::with_capacity(total as usize),
        })
        .collect();
    let mut central_versions = Vec::with_capacity(total as usize);
    let mut observer_estimates = Vec::with_capacity(total as usize);

    for episode in 0..total {
        central_versions.push(central.version);
        let mut results = Vec::with_capacity(n);
        for agent in 0..n {
            let schedule = fleet.schedule_for(agent, &cfg.schedule);
            let (phase_index, env) = phase_at(schedule, episode).expect("validated schedule length");
            let mut r = rng::stream(seed, episode, Role::Executor(agent as u32));
            let (outcome, trace) = run_episode_traced(&held[agent].strategy, env, &cfg.episode, &mut r)?;
            monitors[agent].update(&trace, &outcome, learning.model.env_estimate.evasion_threshold);
            pending.push(outcome.success);
            results.push((phase_index, outcome.success, held[agent].version));
        }

        let fleet_estimate = mean(monitors.iter().filter_map(MonitorState::speed_estimate));
        observer_estimates.push(fleet_estimate);

        let observe = (episode + 1) % p == 0;
        let mut fired = false;
        if observe {
            observer.record(fleet_estimate, pending.drain(..));
            if let Some(msg) = trigger_check(&observer, &learning.model, &cfg.trigger) {
                let mut r = rng::stream(seed, episode, Role::Adjust);
                learning.adjust(cfg, &msg, AdjustmentMode::Restart, None, &mut r)?;
                observer.reset_after_adjustment();
                fired = true;
            }
        }

        let mut r = rng::stream(seed, episode, Role::Learner);
        learning.learn(cfg, cfg.generations_per_episode, &mut r)?;
        central.offer(learning.best_msg());
        if observe {
            held.iter_mut().for_each(|h| *h = central.clone());
        }

        for (agent, (phase_index, success, ran_version)) in results.into_iter().enumerate() {
            logs[agent].records.push(EpisodeRecord {
                episode,
                phase_index,
                success,
                published_fitness: held[agent].fitness,
                model_epoch: held[agent].model_epoch,
                trigger_fired: fired,
                monitor_estimate: monitors[agent].speed_estimate(),
                case_hit: None,
                case_base_size: None,
                strategy_version: ran_version,
            });
        }
    }

    Ok(FleetRun {
        seed,
        agent_logs: logs,
        central_versions,
        observer_estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_nothing_is_none() {
        assert_eq!(mean(std::iter::empty()), None);
        assert_eq!(mean([1.0, 2.0]), Some(1.5));
    }

    #[test]
    fn fleet_validation() {
        let limits = ActuatorLimits {
            max_turn: 0.5,
            max_speed: 2.0,
        };
        let ok = FleetConfig {
            n_agents: 2,
            observation_period: 5,
            agent_schedules: vec![],
        };
        assert!(ok.validate(10, limits).is_ok());
        let bad = FleetConfig {
            observation_period: 0,
            ..ok.clone()
        };
        assert!(bad.validate(10, limits).is_err());
        let bad = FleetConfig {
            n_agents: 0,
            ..ok.clone()
        };
        assert!(bad.validate(10, limits).is_err());
    }
}
