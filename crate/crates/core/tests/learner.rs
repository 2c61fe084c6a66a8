mod common;

use alsim::anytime::{apply_adjustment, AdjustmentMode};
use alsim::cases::{Case, CaseBase, CaseWeights};
use alsim::learner::{best_strategy, evolve_generation, init_population, GaParams, SimulationModel};
use alsim::monitor::{ChangeCause, EnvChangedMsg};
use alsim::rng;
use alsim::world::EpisodeConfig;
use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

fn params(pop: usize, elitism: usize) -> GaParams {
    GaParams {
        pop_size: pop,
        eval_trials: 4,
        elitism,
        ..GaParams::default()
    }
}

const CFG: EpisodeConfig = EpisodeConfig {
    ticks: 30,
    success_window_frac: 0.1,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn population_size_is_invariant(seed in 0u64..u64::MAX, pop in 2usize..16, gens in 0usize..4,
                                    restart in proptest::bool::ANY, n_seeds in 0usize..20) {
        let e = common::env(0.8);
        let p = params(pop, 1.min(pop));
        let mut r = rng::from_seed(seed);
        let model = SimulationModel::new(e, p.eval_trials, &mut r);
        let mut population = init_population(&p, e.limits(), &[], &mut r);
        for _ in 0..gens {
            population = evolve_generation(&population, &p, &model, &CFG, &mut r).unwrap();
            prop_assert_eq!(population.individuals.len(), pop);
        }
        let mut base = CaseBase::new(4, 0.05, 0.25, CaseWeights::default());
        let stored: Vec<_> = (0..n_seeds).map(|i| (population.individuals[i % pop].strategy.clone(), 0.5)).collect();
        base.store(Case { env_key: common::env(1.6), seed_strategies: stored, stored_at_epoch: 0 });
        let msg = EnvChangedMsg { new_estimate: common::env(1.6), cause: ChangeCause::ParameterDelta };
        let mode = if restart { AdjustmentMode::Restart } else { AdjustmentMode::Reseed };
        let adj = apply_adjustment(&model, &msg, mode, Some(&mut base), &p, &mut r).unwrap();
        prop_assert_eq!(adj.population.individuals.len(), pop);
        prop_assert_eq!(adj.population.generation, 0);
        prop_assert!(adj.population.individuals.iter().all(|i| i.fitness.is_none()));
        prop_assert_eq!(adj.model.epoch, model.epoch + 1);
        if !restart {
            let expected = n_seeds.min(pop);
            for (k, ind) in adj.population.individuals.iter().take(expected).enumerate() {
                prop_assert_eq!(&ind.strategy, &population.individuals[k % pop].strategy);
            }
        }
    }

    #[test]
    fn best_fitness_never_drops(seed in 0u64..u64::MAX) {
        let e = common::env(0.8);
        let p = params(10, 1);
        let mut r = rng::from_seed(seed);
        let model = SimulationModel::new(e, p.eval_trials, &mut r);
        let mut population = init_population(&p, e.limits(), &[], &mut r);
        let mut last = f64::NEG_INFINITY;
        for _ in 0..10 {
            population = evolve_generation(&population, &p, &model, &CFG, &mut r).unwrap();
            let f = best_strategy(&population).fitness;
            prop_assert!(f >= last);
            last = f;
        }
    }
}
