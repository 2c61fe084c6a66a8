//! Experiment configuration: a strict JSON document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::GaParams;
use crate::monitor::TriggerPolicy;
use crate::punctuated::FleetConfig;
use crate::world::{EnvironmentParams, EpisodeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Baseline,
    Anytime,
    CaseBased,
    Punctuated,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Anytime => "anytime",
            Mode::CaseBased => "case_based",
            Mode::Punctuated => "punctuated",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s.trim() {
            "baseline" => Ok(Mode::Baseline),
            "anytime" => Ok(Mode::Anytime),
            "case_based" => Ok(Mode::CaseBased),
            "punctuated" => Ok(Mode::Punctuated),
            other => Err(Error::config("mode", format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A span of episodes run in one true environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub episodes: u32,
    pub env: EnvironmentParams,
}

pub fn total_episodes(schedule: &[ScheduleEntry]) -> u64 {
    schedule.iter().map(|e| e.episodes as u64).sum()
}

/// Phase index and true environment for an episode, `None` past the end.
pub fn phase_at(schedule: &[ScheduleEntry], episode: u64) -> Option<(usize, &EnvironmentParams)> {
    let mut start = 0u64;
    for (i, entry) in schedule.iter().enumerate() {
        let end = start + entry.episodes as u64;
        if episode < end {
            return Some((i, &entry.env));
        }
        start = end;
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub schedule: Vec<ScheduleEntry>,
    pub episode: EpisodeConfig,
    pub ga: GaParams,
    pub trigger: TriggerPolicy,
    pub generations_per_episode: u32,
    pub initial_model: EnvironmentParams,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fleet: Option<FleetConfig>,
    pub case_capacity: usize,
    pub retrieval_radius: f64,
    pub case_k: usize,
    pub merge_radius: f64,
    /// Ticks of target displacement the monitor keeps; defaults to one episode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monitor_window_ticks: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::config("schedule", "must be nonempty"));
        }
        for entry in &self.schedule {
            if entry.episodes < 1 {
                return Err(Error::config("episodes", "every schedule entry needs >= 1 episode"));
            }
            entry.env.validate()?;
        }
        self.initial_model.validate()?;
        let limits = self.initial_model.limits();
        if self.schedule.iter().any(|e| e.env.limits() != limits) {
            return Err(Error::config(
                "tracker_max_speed",
                "tracker actuator limits must be identical in the schedule and the initial model",
            ));
        }
        self.episode.validate()?;
        self.ga.validate()?;
        self.trigger.validate()?;
        if self.generations_per_episode < 1 {
            return Err(Error::config("generations_per_episode", "must be >= 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "must be nonempty"));
        }
        if self.case_capacity < 1 {
            return Err(Error::config("case_capacity", "must be >= 1"));
        }
        if !(self.retrieval_radius >= 0.0 && self.retrieval_radius.is_finite()) {
            return Err(Error::config("retrieval_radius", "must be finite and >= 0"));
        }
        if self.case_k < 1 {
            return Err(Error::config("case_k", "must be >= 1"));
        }
        if !(self.merge_radius >= 0.0 && self.merge_radius.is_finite()) {
            return Err(Error::config("merge_radius", "must be finite and >= 0"));
        }
        if self.monitor_window_ticks == Some(0) {
            return Err(Error::config("monitor_window_ticks", "must be >= 1"));
        }
        match (&self.fleet, self.mode) {
            (None, Mode::Punctuated) => {
                return Err(Error::config("fleet", "punctuated mode requires a fleet section"))
            }
            (Some(fleet), _) => fleet.validate(total_episodes(&self.schedule), limits)?,
            _ => {}
        }
        Ok(())
    }

    pub fn total_episodes(&self) -> u64 {
        total_episodes(&self.schedule)
    }

    pub fn monitor_window(&self) -> usize {
        self.monitor_window_ticks.unwrap_or(self.episode.ticks as usize)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(json_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Maps serde errors onto config errors naming the key where possible.
pub(crate) fn json_error(e: serde_json::Error) -> Error {
    use serde_json::error::Category;
    match e.classify() {
        Category::Data => {
            let msg = e.to_string();
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.starts_with("unknown field") || msg.starts_with("missing field"))
                .unwrap_or("config")
                .to_string();
            Error::Config { field, message: msg }
        }
        Category::Io => Error::Io(std::io::Error::other(e.to_string())),
        Category::Syntax | Category::Eof => Error::Format {
            line: e.line(),
            message: e.to_string(),
        },
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_json(&text)
}
