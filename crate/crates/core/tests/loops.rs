mod common;

use alsim::anytime::{run_anytime, run_baseline, RunLog};
use alsim::cases::run_case_based_with;
use alsim::anytime::new_case_base;
use alsim::punctuated::{run_punctuated, FleetConfig};
use common::small_config;

fn strip(log: &RunLog) -> Vec<(u64, usize, bool, f64, u64, u64)> {
    log.records
        .iter()
        .map(|r| (r.episode, r.phase_index, r.success, r.published_fitness, r.model_epoch, r.strategy_version))
        .collect()
}

#[test]
fn matched_stationary_phase_never_fires_and_matches_baseline() {
    let cfg = small_config(&[(0.8, 40)], &[3]);
    let any = run_anytime(&cfg, 3).unwrap();
    let base = run_baseline(&cfg, 3).unwrap();
    assert!(any.records.iter().all(|r| !r.trigger_fired));
    assert!(base.records.iter().all(|r| r.monitor_estimate.is_none()));
    assert_eq!(strip(&any), strip(&base));
}

#[test]
fn monitor_estimate_converges_to_true_speed() {
    let cfg = small_config(&[(0.8, 10)], &[1]);
    let log = run_anytime(&cfg, 1).unwrap();
    for r in &log.records {
        let est = r.monitor_estimate.expect("cruising ticks observed");
        assert!((est - 0.8).abs() < 1e-9, "{est}");
    }
}

#[test]
fn speed_step_triggers_one_adjustment() {
    let cfg = small_config(&[(0.8, 15), (1.6, 15)], &[7]);
    let log = run_anytime(&cfg, 7).unwrap();
    let fired: Vec<u64> = log.records.iter().filter(|r| r.trigger_fired).map(|r| r.episode).collect();
    assert_eq!(fired.len(), 1, "{fired:?}");
    assert!(fired[0] >= 15 && fired[0] <= 15 + 4);
    let after = &log.records[fired[0] as usize];
    assert_eq!(after.model_epoch, 1);
}

#[test]
fn single_agent_every_episode_equals_anytime() {
    let mut cfg = small_config(&[(0.8, 12), (1.6, 12)], &[5]);
    let fleet = FleetConfig {
        n_agents: 1,
        observation_period: 1,
        agent_schedules: vec![],
    };
    cfg.fleet = Some(fleet.clone());
    let any = run_anytime(&cfg, 5).unwrap();
    let run = run_punctuated(&cfg, &fleet, 5).unwrap();
    assert_eq!(run.agent_logs.len(), 1);
    assert_eq!(run.agent_logs[0], any);
    assert_eq!(run.max_staleness(), 0);
}

#[test]
fn first_visit_to_new_environment_is_a_restart() {
    let cfg = small_config(&[(0.8, 12), (1.6, 12)], &[9]);
    let any = run_anytime(&cfg, 9).unwrap();
    let (cb, base) = run_case_based_with(&cfg, 9, new_case_base(&cfg)).unwrap();
    assert_eq!(strip(&any), strip(&cb));
    let hits: Vec<Option<bool>> = cb.records.iter().filter(|r| r.trigger_fired).map(|r| r.case_hit).collect();
    assert_eq!(hits, vec![Some(false)]);
    assert_eq!(base.len(), 1);
    assert!(cb.records.iter().all(|r| r.case_base_size.is_some()));
}

#[test]
fn return_to_known_environment_hits() {
    let cfg = small_config(&[(0.8, 10), (1.6, 10), (0.8, 10)], &[2]);
    let (log, base) = run_case_based_with(&cfg, 2, new_case_base(&cfg)).unwrap();
    let hits: Vec<Option<bool>> = log.records.iter().filter(|r| r.trigger_fired).map(|r| r.case_hit).collect();
    assert_eq!(hits, vec![Some(false), Some(true)]);
    assert_eq!(base.len(), 2);
}

#[test]
fn runs_are_deterministic() {
    let cfg = small_config(&[(0.8, 8), (1.6, 8)], &[4]);
    assert_eq!(run_anytime(&cfg, 4).unwrap(), run_anytime(&cfg, 4).unwrap());
    assert_ne!(strip(&run_anytime(&cfg, 4).unwrap()), strip(&run_anytime(&cfg, 5).unwrap()));
}

#[test]
fn fleet_only_switches_strategies_at_observations() {
    let mut cfg = small_config(&[(0.8, 15), (1.6, 15)], &[6]);
    let fleet = FleetConfig {
        n_agents: 3,
        observation_period: 5,
        agent_schedules: vec![],
    };
    cfg.fleet = Some(fleet.clone());
    let run = run_punctuated(&cfg, &fleet, 6).unwrap();
    for log in &run.agent_logs {
        for w in log.records.windows(2) {
            if w[1].strategy_version != w[0].strategy_version {
                assert_eq!(w[1].episode % 5, 0, "switch at {}", w[1].episode);
            }
        }
    }
    assert!(run.max_staleness() < 5);
}
