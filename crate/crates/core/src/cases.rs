//! Case base for case-based anytime learning: learned strategies keyed by the
//! environment they were learned in, retrieved by nearest neighbour.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anytime::{new_case_base, run_loop, AdjustmentMode, LoopOptions, RunLog};
use crate::config::{json_error, ExperimentConfig, ScheduleEntry};
use crate::error::{Error, Result};
use crate::strategy::Strategy;
use crate::world::EnvironmentParams;

/// File format version written by [`CaseBase::save`].
pub const CASE_FILE_VERSION: u32 = 1;

/// Normalization scales for the compared environment parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseWeights {
    pub target_cruise_speed: f64,
    pub target_flee_speed: f64,
    pub evasion_threshold: f64,
}

impl Default for CaseWeights {
    fn default() -> Self {
        CaseWeights {
            target_cruise_speed: 1.0,
            target_flee_speed: 1.0,
            evasion_threshold: 1.0,
        }
    }
}

impl CaseWeights {
    /// Each scale is the parameter's spread (max - min) over the schedule;
    /// parameters that never change get scale 1.
    pub fn from_schedule(schedule: &[ScheduleEntry], initial: &EnvironmentParams) -> Self {
        let envs: Vec<&EnvironmentParams> = schedule.iter().map(|e| &e.env).chain(Some(initial)).collect();
        let spread = |f: fn(&EnvironmentParams) -> f64| {
            let lo = envs.iter().map(|e| f(e)).fold(f64::INFINITY, f64::min);
            let hi = envs.iter().map(|e| f(e)).fold(f64::NEG_INFINITY, f64::max);
            if hi - lo > 0.0 {
                hi - lo
            } else {
                1.0
            }
        };
        CaseWeights {
            target_cruise_speed: spread(|e| e.target_cruise_speed),
            target_flee_speed: spread(|e| e.target_flee_speed),
            evasion_threshold: spread(|e| e.evasion_threshold),
        }
    }

    fn is_valid(&self) -> bool {
        [self.target_cruise_speed, self.target_flee_speed, self.evasion_threshold]
            .iter()
            .all(|w| w.is_finite() && *w > 0.0)
    }
}

/// Weighted Euclidean distance over cruise speed, flee speed and evasion threshold.
pub fn case_distance(a: &EnvironmentParams, b: &EnvironmentParams, w: &CaseWeights) -> f64 {
    let dc = (a.target_cruise_speed - b.target_cruise_speed) / w.target_cruise_speed;
    let df = (a.target_flee_speed - b.target_flee_speed) / w.target_flee_speed;
    let dt = (a.evasion_threshold - b.evasion_threshold) / w.evasion_threshold;
    (dc * dc + df * df + dt * dt).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub env_key: EnvironmentParams,
    /// Best strategies at storage time with their fitness, best first.
    pub seed_strategies: Vec<(Strategy, f64)>,
    pub stored_at_epoch: u64,
}

impl Case {
    pub fn strategies(&self) -> Vec<Strategy> {
        self.seed_strategies.iter().map(|(s, _)| s.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Slot {
    case: Case,
    /// Logical time of the last store or retrieval.
    last_used: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseBase {
    version: u32,
    capacity: usize,
    merge_radius: f64,
    retrieval_radius: f64,
    weights: CaseWeights,
    clock: u64,
    slots: Vec<Slot>,
}

impl CaseBase {
    pub fn new(capacity: usize, merge_radius: f64, retrieval_radius: f64, weights: CaseWeights) -> Self {
        CaseBase {
            version: CASE_FILE_VERSION,
            capacity: capacity.max(1),
            merge_radius,
            retrieval_radius,
            weights,
            clock: 0,
            slots: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn weights(&self) -> &CaseWeights {
        &self.weights
    }

    pub fn cases(&self) -> impl Iterator<Item = &Case> {
        self.slots.iter().map(|s| &s.case)
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    /// Index and distance of the nearest case within the retrieval radius;
    /// ties go to the earliest stored.
    fn nearest(&self, query: &EnvironmentParams) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, slot) in self.slots.iter().enumerate() {
            let d = case_distance(&slot.case.env_key, query, &self.weights);
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.filter(|&(_, d)| d <= self.retrieval_radius)
    }

    /// Nearest-neighbour lookup without touching recency.
    pub fn nn_retrieve(&self, query: &EnvironmentParams) -> Option<&Case> {
        self.nearest(query).map(|(i, _)| &self.slots[i].case)
    }

    /// Nearest-neighbour lookup that marks the hit as recently used.
    pub fn retrieve(&mut self, query: &EnvironmentParams) -> Option<Case> {
        let (i, _) = self.nearest(query)?;
        let now = self.tick();
        self.slots[i].last_used = now;
        Some(self.slots[i].case.clone())
    }

    /// Stores a case. Existing cases within the merge radius are replaced by
    /// it (it takes the slot of the nearest one); if the base then exceeds
    /// capacity, the least recently used case is evicted.
    pub fn store(&mut self, case: Case) {
        let now = self.tick();
        let within: Vec<(usize, f64)> = self
            .slots
            .iter()
            .enumerate()
            .map(|(i, s)| (i, case_distance(&s.case.env_key, &case.env_key, &self.weights)))
            .filter(|&(_, d)| d <= self.merge_radius)
            .collect();
        let slot = Slot { case, last_used: now };
        if let Some(&(target, _)) = within.iter().min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))) {
            self.slots[target] = slot;
            let mut drop: Vec<usize> = within.iter().map(|&(i, _)| i).filter(|&i| i != target).collect();
            drop.sort_unstable_by(|a, b| b.cmp(a));
            for i in drop {
                self.slots.remove(i);
            }
        } else {
            self.slots.push(slot);
        }
        while self.slots.len() > self.capacity {
            let victim = self
                .slots
                .iter()
                .enumerate()
                .min_by_key(|(i, s)| (s.last_used, *i))
                .map(|(i, _)| i)
                .expect("nonempty");
            self.slots.remove(victim);
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case base serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let base: CaseBase = serde_json::from_str(text).map_err(json_error)?;
        if base.version != CASE_FILE_VERSION {
            return Err(Error::config(
                "version",
                format!("unsupported case file version {}", base.version),
            ));
        }
        if !base.weights.is_valid() {
            return Err(Error::config("weights", "scales must be finite and > 0"));
        }
        if base.slots.len() > base.capacity {
            return Err(Error::config("capacity", "more cases than capacity"));
        }
        Ok(base)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Anytime learning that stores the top strategies on every detected change
/// and reseeds from the nearest stored case. Starts from `base` (typically
/// empty) and returns the final case base alongside the log.
pub fn run_case_based_with(cfg: &ExperimentConfig, seed: u64, mut base: CaseBase) -> Result<(RunLog, CaseBase)> {
    let log = run_loop(
        cfg,
        seed,
        LoopOptions {
            monitor: true,
            adjustment: AdjustmentMode::Reseed,
        },
        Some(&mut base),
    )?;
    Ok((log, base))
}

pub fn run_case_based(cfg: &ExperimentConfig, seed: u64) -> Result<RunLog> {
    run_case_based_with(cfg, seed, new_case_base(cfg)).map(|(log, _)| log)
}
