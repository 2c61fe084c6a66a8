//! Genetic-algorithm rule learner with an anytime best-so-far answer.
//!
//! Individuals are evaluated against a [`SimulationModel`]: an environment
//! estimate plus a fixed batch of episode seeds. The batch only changes when
//! the model is adjusted, so within one model epoch fitness values are exactly
//! comparable and elitism makes the best fitness non-decreasing.

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::strategy::{random_action, ClosingSet, KindMatch, Rule, Strategy};
use crate::world::{episode_succeeds, ActuatorLimits, EnvironmentParams, EpisodeConfig, B_BUCKETS, R_BUCKETS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaParams {
    pub pop_size: usize,
    pub eval_trials: usize,
    pub elitism: usize,
    pub tournament_k: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub rule_count_min: usize,
    pub rule_count_max: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            pop_size: 50,
            eval_trials: 20,
            elitism: 2,
            tournament_k: 3,
            crossover_rate: 0.7,
            mutation_rate: 0.2,
            rule_count_min: 2,
            rule_count_max: 10,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 2 {
            return Err(Error::config("pop_size", "must be >= 2"));
        }
        if self.eval_trials < 1 {
            return Err(Error::config("eval_trials", "must be >= 1"));
        }
        if self.elitism < 1 || self.elitism >= self.pop_size {
            return Err(Error::config("elitism", "must satisfy 1 <= elitism < pop_size"));
        }
        if self.tournament_k < 1 || self.tournament_k > self.pop_size {
            return Err(Error::config("tournament_k", "must satisfy 1 <= tournament_k <= pop_size"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::config("crossover_rate", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::config("mutation_rate", "must lie in [0, 1]"));
        }
        if self.rule_count_min < 1 || self.rule_count_min > self.rule_count_max {
            return Err(Error::config(
                "rule_count_min",
                "must satisfy 1 <= rule_count_min <= rule_count_max",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub strategy: Strategy,
    /// Mean episode success over the model's seed batch; `None` until evaluated.
    pub fitness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub individuals: Vec<Individual>,
    pub generation: u64,
}

/// The learner's stand-in for the real environment.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationModel {
    pub env_estimate: EnvironmentParams,
    pub eval_seed_batch: Vec<u64>,
    /// Number of adjustments applied so far.
    pub epoch: u64,
}

impl SimulationModel {
    /// Builds a model at epoch 0 with a freshly drawn seed batch.
    pub fn new<R: Rng + ?Sized>(env_estimate: EnvironmentParams, eval_trials: usize, rng: &mut R) -> Self {
        SimulationModel {
            env_estimate,
            eval_seed_batch: draw_seed_batch(eval_trials, rng),
            epoch: 0,
        }
    }
}

pub fn draw_seed_batch<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<u64> {
    (0..n).map(|_| rng.random()).collect()
}

/// Fraction of the model's seed batch on which `strategy` succeeds.
pub fn evaluate(strategy: &Strategy, model: &SimulationModel, cfg: &EpisodeConfig) -> Result<f64> {
    if model.eval_seed_batch.is_empty() {
        return Err(Error::config("eval_trials", "evaluation seed batch is empty"));
    }
    let mut wins = 0usize;
    for &seed in &model.eval_seed_batch {
        if episode_succeeds(strategy, &model.env_estimate, cfg, &mut rng::from_seed(seed))? {
            wins += 1;
        }
    }
    Ok(wins as f64 / model.eval_seed_batch.len() as f64)
}

/// Seeds occupy the first slots (truncated to `pop_size`); the rest are random.
pub fn init_population<R: Rng + ?Sized>(
    params: &GaParams,
    limits: ActuatorLimits,
    seeds: &[Strategy],
    rng: &mut R,
) -> Population {
    let mut individuals: Vec<Individual> = seeds
        .iter()
        .take(params.pop_size)
        .map(|s| Individual {
            strategy: s.clone(),
            fitness: None,
        })
        .collect();
    while individuals.len() < params.pop_size {
        let n = rng.random_range(params.rule_count_min..=params.rule_count_max);
        individuals.push(Individual {
            strategy: Strategy::random(limits, n, rng),
            fitness: None,
        });
    }
    Population {
        individuals,
        generation: 0,
    }
}

fn evaluate_pending(pop: &mut Population, model: &SimulationModel, cfg: &EpisodeConfig) -> Result<()> {
    pop.individuals
        .par_iter_mut()
        .filter(|ind| ind.fitness.is_none())
        .try_for_each(|ind| {
            ind.fitness = Some(evaluate(&ind.strategy, model, cfg)?);
            Ok(())
        })
}

/// Indices sorted by descending fitness, unevaluated last, ties by index.
fn ranking(pop: &Population) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pop.individuals.len()).collect();
    idx.sort_by(|&a, &b| {
        let fa = pop.individuals[a].fitness.unwrap_or(-1.0);
        let fb = pop.individuals[b].fitness.unwrap_or(-1.0);
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    idx
}

/// The `k` best evaluated strategies with their fitness.
pub fn top_k(pop: &Population, k: usize) -> Vec<(Strategy, f64)> {
    ranking(pop)
        .into_iter()
        .filter_map(|i| {
            let ind = &pop.individuals[i];
            ind.fitness.map(|f| (ind.strategy.clone(), f))
        })
        .take(k)
        .collect()
}

fn tournament<'a, R: Rng + ?Sized>(pop: &'a Population, k: usize, rng: &mut R) -> &'a Strategy {
    let n = pop.individuals.len();
    let mut best = rng.random_range(0..n);
    for _ in 1..k {
        let c = rng.random_range(0..n);
        let fc = pop.individuals[c].fitness.unwrap_or(-1.0);
        let fb = pop.individuals[best].fitness.unwrap_or(-1.0);
        if fc > fb || (fc == fb && c < best) {
            best = c;
        }
    }
    &pop.individuals[best].strategy
}

/// One-point crossover on the rule lists with independent cut points.
fn crossover<R: Rng + ?Sized>(
    a: &Strategy,
    b: &Strategy,
    params: &GaParams,
    limits: ActuatorLimits,
    rng: &mut R,
) -> Strategy {
    let cut_a = rng.random_range(0..=a.rules.len());
    let cut_b = rng.random_range(0..=b.rules.len());
    let mut rules: Vec<Rule> = a.rules[..cut_a].iter().chain(&b.rules[cut_b..]).copied().collect();
    rules.truncate(params.rule_count_max);
    while rules.len() < params.rule_count_min {
        rules.push(Rule::random(limits, rng));
    }
    Strategy {
        rules,
        default_action: a.default_action,
    }
}

fn mutate_rule<R: Rng + ?Sized>(rule: &mut Rule, limits: ActuatorLimits, rng: &mut R) {
    fn nudge<R: Rng + ?Sized>(v: u8, max: u8, rng: &mut R) -> u8 {
        if rng.random_bool(0.5) {
            rng.random_range(0..max)
        } else if rng.random_bool(0.5) {
            v.saturating_sub(1)
        } else {
            (v + 1).min(max - 1)
        }
    }
    match rng.random_range(0..7) {
        0 => {
            rule.kind = *[KindMatch::Contact, KindMatch::Lost, KindMatch::Any]
                .choose(rng)
                .expect("nonempty");
        }
        1 => {
            rule.range.0 = nudge(rule.range.0, R_BUCKETS, rng);
            if rule.range.0 > rule.range.1 {
                rule.range = (rule.range.1, rule.range.0);
            }
        }
        2 => {
            rule.range.1 = nudge(rule.range.1, R_BUCKETS, rng);
            if rule.range.0 > rule.range.1 {
                rule.range = (rule.range.1, rule.range.0);
            }
        }
        3 => rule.bearing.0 = nudge(rule.bearing.0, B_BUCKETS, rng),
        4 => rule.bearing.1 = nudge(rule.bearing.1, B_BUCKETS, rng),
        5 => {
            let flipped = rule.closing.0 ^ (1 << rng.random_range(0..3));
            if flipped != 0 {
                rule.closing = ClosingSet(flipped);
            }
        }
        _ => rule.action = mutate_action(rule.action, limits, rng),
    }
}

fn mutate_action<R: Rng + ?Sized>(
    act: crate::world::Action,
    limits: ActuatorLimits,
    rng: &mut R,
) -> crate::world::Action {
    if rng.random_bool(0.2) {
        return random_action(limits, rng);
    }
    let mut out = act;
    if rng.random_bool(0.5) {
        let step = rng.random_range(-0.25..=0.25) * limits.max_turn;
        out.turn = (act.turn + step).clamp(-limits.max_turn, limits.max_turn);
    } else {
        let step = rng.random_range(-0.25..=0.25) * limits.max_speed;
        out.speed = (act.speed + step).clamp(0.0, limits.max_speed);
    }
    out
}

/// Each rule and the default action mutate independently with probability
/// `mutation_rate`; a mutation perturbs a single field.
fn mutate<R: Rng + ?Sized>(s: &mut Strategy, params: &GaParams, limits: ActuatorLimits, rng: &mut R) {
    if params.mutation_rate <= 0.0 {
        return;
    }
    for rule in &mut s.rules {
        if rng.random_bool(params.mutation_rate) {
            mutate_rule(rule, limits, rng);
        }
    }
    if rng.random_bool(params.mutation_rate) {
        s.default_action = mutate_action(s.default_action, limits, rng);
    }
}

/// Produces the next generation. Pending individuals are evaluated first and
/// offspring are evaluated before returning, so the result is fully scored.
pub fn evolve_generation<R: Rng + ?Sized>(
    pop: &Population,
    params: &GaParams,
    model: &SimulationModel,
    cfg: &EpisodeConfig,
    rng: &mut R,
) -> Result<Population> {
    let limits = model.env_estimate.limits();
    let mut current = pop.clone();
    evaluate_pending(&mut current, model, cfg)?;

    let order = ranking(&current);
    let mut next: Vec<Individual> = order
        .iter()
        .take(params.elitism)
        .map(|&i| current.individuals[i].clone())
        .collect();

    while next.len() < params.pop_size {
        let a = tournament(&current, params.tournament_k, rng);
        let mut child = if rng.random_bool(params.crossover_rate) {
            let b = tournament(&current, params.tournament_k, rng);
            crossover(a, b, params, limits, rng)
        } else {
            a.clone()
        };
        mutate(&mut child, params, limits, rng);
        next.push(Individual {
            strategy: child,
            fitness: None,
        });
    }

    let mut out = Population {
        individuals: next,
        generation: current.generation + 1,
    };
    evaluate_pending(&mut out, model, cfg)?;
    Ok(out)
}

/// Best-so-far answer.
#[derive(Debug, Clone, PartialEq)]
pub struct Best {
    pub strategy: Strategy,
    pub fitness: f64,
    /// True when no individual has been evaluated yet.
    pub provisional: bool,
}

/// Highest-fitness evaluated individual, ties to the lowest index. With no
/// evaluated individual, individual 0 is returned as provisional with fitness 0.
pub fn best_strategy(pop: &Population) -> Best {
    let mut best: Option<(usize, f64)> = None;
    for (i, ind) in pop.individuals.iter().enumerate() {
        if let Some(f) = ind.fitness {
            if best.map_or(true, |(_, bf)| f > bf) {
                best = Some((i, f));
            }
        }
    }
    match best {
        Some((i, f)) => Best {
            strategy: pop.individuals[i].strategy.clone(),
            fitness: f,
            provisional: false,
        },
        None => Best {
            strategy: pop.individuals[0].strategy.clone(),
            fitness: 0.0,
            provisional: true,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Action;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};

    fn env() -> EnvironmentParams {
        EnvironmentParams {
            target_cruise_speed: 0.8,
            target_flee_speed: 3.0,
            evasion_threshold: 4.0,
            sensor_range: 20.0,
            tracker_max_speed: 2.0,
            tracker_max_turn: 0.5,
            target_heading_jitter: 0.3,
        }
    }

    fn small_params() -> GaParams {
        GaParams {
            pop_size: 12,
            eval_trials: 6,
            elitism: 1,
            tournament_k: 2,
            ..GaParams::default()
        }
    }

    fn cfg() -> EpisodeConfig {
        EpisodeConfig {
            ticks: 30,
            success_window_frac: 0.1,
        }
    }

    fn model(seed: u64, trials: usize) -> SimulationModel {
        SimulationModel::new(env(), trials, &mut rng::from_seed(seed))
    }

    fn evaluated(fits: &[Option<f64>]) -> Population {
        let mut r = rng::from_seed(0);
        Population {
            individuals: fits
                .iter()
                .map(|&fitness| Individual {
                    strategy: Strategy::random(env().limits(), 2, &mut r),
                    fitness,
                })
                .collect(),
            generation: 0,
        }
    }

    #[test]
    fn empty_batch_is_a_config_error() {
        let mut m = model(1, 3);
        m.eval_seed_batch.clear();
        let s = Strategy::random(env().limits(), 2, &mut rng::from_seed(2));
        assert!(matches!(evaluate(&s, &m, &cfg()), Err(Error::Config { .. })));
    }

    #[test]
    fn evaluation_is_repeatable() {
        let m = model(5, 10);
        let s = Strategy::random(env().limits(), 4, &mut rng::from_seed(9));
        assert_eq!(evaluate(&s, &m, &cfg()).unwrap(), evaluate(&s, &m, &cfg()).unwrap());
    }

    #[test]
    fn unseeded_population_is_full_and_unevaluated() {
        let p = init_population(&small_params(), env().limits(), &[], &mut rng::from_seed(1));
        assert_eq!(p.individuals.len(), 12);
        assert_eq!(p.generation, 0);
        assert!(p.individuals.iter().all(|i| i.fitness.is_none()));
        for ind in &p.individuals {
            let n = ind.strategy.rules.len();
            assert!((2..=10).contains(&n));
        }
    }

    #[test]
    fn seeds_take_the_first_slots() {
        let s = Strategy::random(env().limits(), 3, &mut rng::from_seed(4));
        let p = init_population(&small_params(), env().limits(), &[s.clone()], &mut rng::from_seed(1));
        assert_eq!(p.individuals[0].strategy, s);
        assert_eq!(p.individuals.len(), 12);
    }

    #[test]
    fn seed_overflow_truncates() {
        let mut r = rng::from_seed(4);
        let seeds: Vec<Strategy> = (0..20).map(|_| Strategy::random(env().limits(), 3, &mut r)).collect();
        let p = init_population(&small_params(), env().limits(), &seeds, &mut rng::from_seed(1));
        assert_eq!(p.individuals.len(), 12);
        for (ind, s) in p.individuals.iter().zip(&seeds) {
            assert_eq!(&ind.strategy, s);
        }
    }

    #[test]
    fn best_of_single_individual() {
        let p = evaluated(&[Some(0.3)]);
        let b = best_strategy(&p);
        assert_eq!(b.fitness, 0.3);
        assert_eq!(b.strategy, p.individuals[0].strategy);
        assert!(!b.provisional);
    }

    #[test]
    fn best_ties_go_to_lowest_index() {
        let p = evaluated(&[Some(0.5), Some(0.5)]);
        assert_eq!(best_strategy(&p).strategy, p.individuals[0].strategy);
        let p = evaluated(&[None, Some(0.2), Some(0.7), Some(0.7)]);
        assert_eq!(best_strategy(&p).strategy, p.individuals[2].strategy);
    }

    #[test]
    fn unevaluated_population_gives_provisional_answer() {
        let p = evaluated(&[None, None]);
        let b = best_strategy(&p);
        assert!(b.provisional);
        assert_eq!(b.fitness, 0.0);
        assert_eq!(b.strategy, p.individuals[0].strategy);
    }

    #[test]
    fn no_op_operators_preserve_identical_population() {
        let s = Strategy::random(env().limits(), 3, &mut rng::from_seed(8));
        let params = GaParams {
            crossover_rate: 0.0,
            mutation_rate: 0.0,
            ..small_params()
        };
        let seeds = vec![s.clone(); params.pop_size];
        let p = init_population(&params, env().limits(), &seeds, &mut rng::from_seed(1));
        let m = model(3, 4);
        let next = evolve_generation(&p, &params, &m, &cfg(), &mut rng::from_seed(2)).unwrap();
        assert!(next.individuals.iter().all(|i| i.strategy == s));
        assert_eq!(next.generation, 1);
    }

    #[test]
    fn best_fitness_is_monotone_over_generations() {
        let params = small_params();
        let m = model(21, params.eval_trials);
        let mut r = rng::from_seed(22);
        let mut p = init_population(&params, env().limits(), &[], &mut r);
        let mut last = best_strategy(&p).fitness;
        for _ in 0..50 {
            p = evolve_generation(&p, &params, &m, &cfg(), &mut r).unwrap();
            let f = best_strategy(&p).fitness;
            assert!(f >= last, "{f} < {last}");
            last = f;
        }
    }

    #[test]
    fn default_action_reaches_offspring() {
        let mut s = Strategy::random(env().limits(), 2, &mut rng::from_seed(8));
        s.default_action = Action::new(0.1, 0.2);
        let c = crossover(&s, &s, &small_params(), env().limits(), &mut rng::from_seed(3));
        assert_eq!(c.default_action, s.default_action);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn evolution_preserves_invariants(seed in any::<u64>(), xo in 0.0..=1.0f64, mu in 0.0..=1.0f64) {
            let params = GaParams { crossover_rate: xo, mutation_rate: mu, ..small_params() };
            let m = model(seed, 3);
            let mut r = rng::from_seed(seed);
            let p = init_population(&params, env().limits(), &[], &mut r);
            let next = evolve_generation(&p, &params, &m, &cfg(), &mut r).unwrap();
            prop_assert_eq!(next.individuals.len(), params.pop_size);
            for ind in &next.individuals {
                prop_assert!(ind.strategy.validate(env().limits()).is_ok());
                let n = ind.strategy.rules.len();
                prop_assert!(n >= params.rule_count_min && n <= params.rule_count_max);
                let f = ind.fitness.expect("evaluated");
                prop_assert!((0.0..=1.0).contains(&f));
            }
        }
    }
}
