#![allow(dead_code)]

use std::f64::consts::PI;

use alsim::strategy::{KindMatch, Strategy};
use alsim::world::EnvironmentParams;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn env(cruise: f64) -> EnvironmentParams {
    EnvironmentParams {
        target_cruise_speed: cruise,
        target_flee_speed: 3.0,
        evasion_threshold: 8.0,
        sensor_range: 20.0,
        tracker_max_speed: 2.4,
        tracker_max_turn: 0.6,
        target_heading_jitter: 0.2,
    }
}

fn wrap(a: f64) -> f64 {
    let t = 2.0 * PI;
    let mut r = a - t * ((a + PI) / t).floor();
    if r >= PI {
        r -= t;
    }
    if r < -PI {
        r += t;
    }
    r
}

/// (x, y, heading)
type Pose = (f64, f64, f64);

fn advance(p: Pose, turn: f64, speed: f64, max_turn: f64, max_speed: f64) -> Pose {
    let h = wrap(p.2 + turn.max(-max_turn).min(max_turn));
    let v = speed.max(0.0).min(max_speed);
    (p.0 + v * h.cos(), p.1 + v * h.sin(), h)
}

fn dist(a: Pose, b: Pose) -> f64 {
    (b.0 - a.0).hypot(b.1 - a.1)
}

/// Action chosen by the first matching rule, written against the raw
/// geometry rather than the library's observation type.
fn choose(s: &Strategy, lost: bool, rb: u8, bb: u8, cb: u8) -> (f64, f64) {
    for r in &s.rules {
        let ok = if lost {
            r.kind != KindMatch::Contact
        } else {
            let bearing_ok = if r.bearing.0 <= r.bearing.1 {
                (r.bearing.0..=r.bearing.1).contains(&bb)
            } else {
                bb >= r.bearing.0 || bb <= r.bearing.1
            };
            r.kind != KindMatch::Lost
                && (r.range.0..=r.range.1).contains(&rb)
                && bearing_ok
                && (r.closing.0 >> cb) & 1 == 1
        };
        if ok {
            return (r.action.turn, r.action.speed);
        }
    }
    (s.default_action.turn, s.default_action.speed)
}

pub struct OracleOutcome {
    pub success: bool,
    pub evasions: u32,
    pub contact_ticks: u32,
    pub final_range: f64,
}

/// Straight tick-by-tick simulation with the same random draws in the same
/// order: two uniform angles for the start, one normal draw per tick.
pub fn oracle_episode<R: Rng>(s: &Strategy, e: &EnvironmentParams, ticks: u32, frac: f64, rng: &mut R) -> OracleOutcome {
    let bearing0: f64 = rng.random_range(-PI..PI);
    let heading0: f64 = rng.random_range(-PI..PI);
    let r0 = e.sensor_range / 2.0;
    let mut tracker: Pose = (0.0, 0.0, 0.0);
    let mut target: Pose = (r0 * bearing0.cos(), r0 * bearing0.sin(), heading0);
    let window = ((ticks as f64 * frac).ceil() as u32).clamp(1, ticks);
    let mut prev: Option<f64> = None;
    let mut evasions = 0;
    let mut contact = 0;
    let mut kept = true;
    for t in 0..ticks {
        let d = dist(tracker, target);
        let (lost, rb, bb, cb) = if d > e.sensor_range {
            (true, 0, 0, 1)
        } else {
            let rb = ((d / e.sensor_range * 8.0).floor() as i64).clamp(0, 7) as u8;
            let rel = wrap((target.1 - tracker.1).atan2(target.0 - tracker.0) - tracker.2);
            let bb = (((rel + PI) / (2.0 * PI) * 8.0).floor() as i64).clamp(0, 7) as u8;
            let cb = match prev {
                Some(p) if (d - p).abs() >= 1e-6 => {
                    if d < p {
                        2
                    } else {
                        0
                    }
                }
                _ => 1,
            };
            (false, rb, bb, cb)
        };
        if !lost {
            contact += 1;
        }
        prev = Some(d);
        let (turn, speed) = choose(s, lost, rb, bb, cb);
        tracker = advance(tracker, turn, speed, e.tracker_max_turn, e.tracker_max_speed);

        let z: f64 = rng.sample(StandardNormal);
        let d = dist(tracker, target);
        let (tt, ts) = if d < e.evasion_threshold {
            evasions += 1;
            let away = if d > 0.0 {
                (target.1 - tracker.1).atan2(target.0 - tracker.0)
            } else {
                target.2
            };
            (wrap(away - target.2), e.target_flee_speed)
        } else {
            (z * e.target_heading_jitter, e.target_cruise_speed)
        };
        target = advance(target, tt, ts, PI, e.target_flee_speed);
        if t >= ticks - window && dist(tracker, target) > e.sensor_range {
            kept = false;
        }
    }
    OracleOutcome {
        success: kept && evasions == 0,
        evasions,
        contact_ticks: contact,
        final_range: dist(tracker, target),
    }
}

pub fn default_config() -> alsim::config::ExperimentConfig {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.json");
    alsim::config::load_config(path).expect("shipped config loads")
}

/// A cheap config over the given (cruise speed, episodes) phases.
pub fn small_config(phases: &[(f64, u32)], seeds: &[u64]) -> alsim::config::ExperimentConfig {
    let mut cfg = default_config();
    let base = cfg.initial_model;
    cfg.schedule = phases
        .iter()
        .map(|&(c, n)| alsim::config::ScheduleEntry {
            episodes: n,
            env: EnvironmentParams {
                target_cruise_speed: c,
                ..base
            },
        })
        .collect();
    cfg.initial_model = cfg.schedule[0].env;
    cfg.episode.ticks = 40;
    cfg.ga.pop_size = 12;
    cfg.ga.eval_trials = 6;
    cfg.generations_per_episode = 1;
    cfg.seeds = seeds.to_vec();
    cfg
}
