//! The anytime learning loop.
//!
//! Each episode the execution system runs the published strategy in the
//! true environment and feeds the monitor; the monitor may tell the learner
//! that the environment changed, in which case the simulation model is
//! adjusted; the learner then runs a fixed generation budget on the model
//! and offers its best strategy for publication.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cases::{Case, CaseBase, CaseWeights};
use crate::config::{phase_at, ExperimentConfig};
use crate::error::{Error, Result};
use crate::learner::{
    best_strategy, draw_seed_batch, evolve_generation, init_population, top_k, GaParams, Population,
    SimulationModel,
};
use crate::monitor::{trigger_check, EnvChangedMsg, MonitorState};
use crate::rng::{self, Role, SimRng, SETUP_EPISODE};
use crate::strategy::Strategy;
use crate::world::run_episode_traced;

/// Learner to executor: a better strategy was found.
#[derive(Debug, Clone, PartialEq)]
pub struct NewBestMsg {
    pub strategy: Arc<Strategy>,
    pub fitness: f64,
    pub model_epoch: u64,
}

/// The strategy the executor currently runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Published {
    pub strategy: Arc<Strategy>,
    pub fitness: f64,
    pub model_epoch: u64,
    /// Incremented on every replacement.
    pub version: u64,
}

impl Published {
    pub fn initial(msg: NewBestMsg) -> Self {
        Published {
            strategy: msg.strategy,
            fitness: msg.fitness,
            model_epoch: msg.model_epoch,
            version: 0,
        }
    }

    /// Takes the candidate if it belongs to a newer model epoch, or to the
    /// same epoch with strictly higher fitness. The swap replaces the whole
    /// value, so readers never see a mix of old and new fields.
    pub fn offer(&mut self, candidate: NewBestMsg) -> bool {
        let newer = candidate.model_epoch > self.model_epoch;
        let better = candidate.model_epoch == self.model_epoch && candidate.fitness > self.fitness;
        if newer || better {
            *self = Published {
                strategy: candidate.strategy,
                fitness: candidate.fitness,
                model_epoch: candidate.model_epoch,
                version: self.version + 1,
            };
            true
        } else {
            false
        }
    }
}

/// Free function form of [`Published::offer`]; returns the resulting slot.
pub fn publish_best(current: &Published, candidate: NewBestMsg) -> Published {
    let mut next = current.clone();
    next.offer(candidate);
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdjustmentMode {
    Restart,
    Reseed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adjusted {
    pub population: Population,
    pub model: SimulationModel,
    /// For `Reseed`: whether the case base had a match.
    pub case_hit: Option<bool>,
}

/// Points the model at the new estimate, redraws its seed batch, bumps the
/// epoch and rebuilds the population: from scratch for `Restart`, seeded
/// from the nearest stored case for `Reseed` (a miss falls back to scratch).
pub fn apply_adjustment(
    model: &SimulationModel,
    msg: &EnvChangedMsg,
    mode: AdjustmentMode,
    case_base: Option<&mut CaseBase>,
    params: &GaParams,
    rng: &mut SimRng,
) -> Result<Adjusted> {
    msg.new_estimate.validate()?;
    let (seeds, case_hit) = match mode {
        AdjustmentMode::Restart => (Vec::new(), None),
        AdjustmentMode::Reseed => {
            let base = case_base.ok_or_else(|| Error::config("case_base", "reseeding requires a case base"))?;
            match base.retrieve(&msg.new_estimate) {
                Some(case) => (case.strategies(), Some(true)),
                None => (Vec::new(), Some(false)),
            }
        }
    };
    let model = SimulationModel {
        env_estimate: msg.new_estimate,
        eval_seed_batch: draw_seed_batch(params.eval_trials, rng),
        epoch: model.epoch + 1,
    };
    let population = init_population(params, model.env_estimate.limits(), &seeds, rng);
    Ok(Adjusted {
        population,
        model,
        case_hit,
    })
}

/// One row of a run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub phase_index: usize,
    pub success: bool,
    /// Fitness of the published strategy after this episode's learning step.
    pub published_fitness: f64,
    pub model_epoch: u64,
    pub trigger_fired: bool,
    pub monitor_estimate: Option<f64>,
    /// Set on episodes where a reseed adjustment happened.
    pub case_hit: Option<bool>,
    pub case_base_size: Option<usize>,
    /// Version of the published strategy the executor ran this episode.
    pub strategy_version: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub seed: u64,
    pub records: Vec<EpisodeRecord>,
}

/// Which parts of the loop are active.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LoopOptions {
    pub monitor: bool,
    pub adjustment: AdjustmentMode,
}

/// Learner side of a run: population, model and the anytime answer.
pub(crate) struct LearningSystem {
    pub population: Population,
    pub model: SimulationModel,
}

impl LearningSystem {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Self {
        let mut r = rng::stream(seed, SETUP_EPISODE, Role::Adjust);
        let model = SimulationModel::new(cfg.initial_model, cfg.ga.eval_trials, &mut r);
        let population = init_population(&cfg.ga, model.env_estimate.limits(), &[], &mut r);
        LearningSystem { population, model }
    }

    pub fn best_msg(&self) -> NewBestMsg {
        let best = best_strategy(&self.population);
        NewBestMsg {
            strategy: Arc::new(best.strategy),
            fitness: best.fitness,
            model_epoch: self.model.epoch,
        }
    }

    pub fn learn(&mut self, cfg: &ExperimentConfig, generations: u32, r: &mut SimRng) -> Result<()> {
        for _ in 0..generations {
            self.population = evolve_generation(&self.population, &cfg.ga, &self.model, &cfg.episode, r)?;
        }
        Ok(())
    }

    /// Stores the current top strategies under the outgoing model estimate
    /// (when a case base is given), then applies the adjustment.
    pub fn adjust(
        &mut self,
        cfg: &ExperimentConfig,
        msg: &EnvChangedMsg,
        mode: AdjustmentMode,
        mut case_base: Option<&mut CaseBase>,
        r: &mut SimRng,
    ) -> Result<Option<bool>> {
        if let Some(base) = case_base.as_deref_mut() {
            let best = top_k(&self.population, cfg.case_k);
            if !best.is_empty() {
                base.store(Case {
                    env_key: self.model.env_estimate,
                    seed_strategies: best,
                    stored_at_epoch: self.model.epoch,
                });
            }
        }
        let adjusted = apply_adjustment(&self.model, msg, mode, case_base, &cfg.ga, r)?;
        self.population = adjusted.population;
        self.model = adjusted.model;
        Ok(adjusted.case_hit)
    }
}

pub fn new_case_base(cfg: &ExperimentConfig) -> CaseBase {
    CaseBase::new(
        cfg.case_capacity,
        cfg.merge_radius,
        cfg.retrieval_radius,
        CaseWeights::from_schedule(&cfg.schedule, &cfg.initial_model),
    )
}

pub(crate) fn run_loop(
    cfg: &ExperimentConfig,
    seed: u64,
    opts: LoopOptions,
    mut case_base: Option<&mut CaseBase>,
) -> Result<RunLog> {
    cfg.validate()?;
    let mut learning = LearningSystem::new(cfg, seed);
    let mut published = Published::initial(learning.best_msg());
    let mut monitor = MonitorState::new(cfg.monitor_window(), &cfg.trigger);
    let mut records = Vec::with_capacity(cfg.total_episodes() as usize);

    for episode in 0..cfg.total_episodes() {
        let (phase_index, true_env) = phase_at(&cfg.schedule, episode).expect("episode within schedule");
        let ran_version = published.version;

        let mut exec_rng = rng::stream(seed, episode, Role::Executor(0));
        let (outcome, trace) = run_episode_traced(&published.strategy, true_env, &cfg.episode, &mut exec_rng)?;

        let mut trigger_fired = false;
        let mut case_hit = None;
        let mut monitor_estimate = None;
        if opts.monitor {
            monitor.update(&trace, &outcome, learning.model.env_estimate.evasion_threshold);
            monitor_estimate = monitor.speed_estimate();
            if let Some(msg) = trigger_check(&monitor, &learning.model, &cfg.trigger) {
                let mut adj_rng = rng::stream(seed, episode, Role::Adjust);
                case_hit = learning.adjust(cfg, &msg, opts.adjustment, case_base.as_deref_mut(), &mut adj_rng)?;
                monitor.reset_after_adjustment();
                trigger_fired = true;
            }
        }

        let mut learn_rng = rng::stream(seed, episode, Role::Learner);
        learning.learn(cfg, cfg.generations_per_episode, &mut learn_rng)?;
        published.offer(learning.best_msg());

        records.push(EpisodeRecord {
            episode,
            phase_index,
            success: outcome.success,
            published_fitness: published.fitness,
            model_epoch: published.model_epoch,
            trigger_fired,
            monitor_estimate,
            case_hit,
            case_base_size: case_base.as_deref().map(CaseBase::len),
            strategy_version: ran_version,
        });
    }
    Ok(RunLog { seed, records })
}

/// Anytime learning with restart on every detected change.
pub fn run_anytime(cfg: &ExperimentConfig, seed: u64) -> Result<RunLog> {
    run_loop(
        cfg,
        seed,
        LoopOptions {
            monitor: true,
            adjustment: AdjustmentMode::Restart,
        },
        None,
    )
}

/// The same learner with no monitor: the model stays at the initial estimate.
pub fn run_baseline(cfg: &ExperimentConfig, seed: u64) -> Result<RunLog> {
    run_loop(
        cfg,
        seed,
        LoopOptions {
            monitor: false,
            adjustment: AdjustmentMode::Restart,
        },
        None,
    )
}
