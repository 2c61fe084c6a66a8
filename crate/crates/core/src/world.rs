//! Discrete-time 2D cat-and-mouse world.
//!
//! A tracker follows a target that cruises with a jittering heading and
//! bolts away at flee speed as soon as the tracker comes closer than the
//! evasion threshold. The world is unbounded.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strategy::Strategy;

/// Number of range buckets in an observation.
pub const R_BUCKETS: u8 = 8;
/// Number of bearing buckets in an observation.
pub const B_BUCKETS: u8 = 8;
/// Range changes smaller than this are reported as steady.
pub const CLOSE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        self.sub(o).norm()
    }
}

/// Wraps an angle into `[-PI, PI)`.
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = a - two_pi * ((a + PI) / two_pi).floor();
    if r >= PI {
        r -= two_pi;
    }
    if r < -PI {
        r += two_pi;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub pos: Vec2,
    pub heading: f64,
    pub speed: f64,
}

impl AgentState {
    pub fn is_finite(&self) -> bool {
        self.pos.is_finite() && self.heading.is_finite() && self.speed.is_finite()
    }
}

/// Motor command: heading change and speed for this tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub turn: f64,
    pub speed: f64,
}

impl Action {
    pub const fn new(turn: f64, speed: f64) -> Self {
        Action { turn, speed }
    }

    pub fn is_finite(&self) -> bool {
        self.turn.is_finite() && self.speed.is_finite()
    }

    pub fn within(&self, limits: ActuatorLimits) -> bool {
        self.is_finite()
            && self.turn.abs() <= limits.max_turn
            && self.speed >= 0.0
            && self.speed <= limits.max_speed
    }
}

/// Tracker actuator limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorLimits {
    pub max_turn: f64,
    pub max_speed: f64,
}

/// The environment, either the true one or the learner's model of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentParams {
    pub target_cruise_speed: f64,
    pub target_flee_speed: f64,
    pub evasion_threshold: f64,
    pub sensor_range: f64,
    pub tracker_max_speed: f64,
    pub tracker_max_turn: f64,
    pub target_heading_jitter: f64,
}

impl EnvironmentParams {
    /// Checks every invariant, naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("target_cruise_speed", self.target_cruise_speed),
            ("target_flee_speed", self.target_flee_speed),
            ("evasion_threshold", self.evasion_threshold),
            ("sensor_range", self.sensor_range),
            ("tracker_max_speed", self.tracker_max_speed),
            ("tracker_max_turn", self.tracker_max_turn),
            ("target_heading_jitter", self.target_heading_jitter),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        if self.target_cruise_speed < 0.0 {
            return Err(Error::config("target_cruise_speed", "must be >= 0"));
        }
        if self.target_flee_speed <= self.target_cruise_speed {
            return Err(Error::config(
                "target_flee_speed",
                "must exceed target_cruise_speed",
            ));
        }
        if self.evasion_threshold <= 0.0 {
            return Err(Error::config("evasion_threshold", "must be > 0"));
        }
        if self.sensor_range <= self.evasion_threshold {
            return Err(Error::config("sensor_range", "must exceed evasion_threshold"));
        }
        if self.tracker_max_speed < 0.0 {
            return Err(Error::config("tracker_max_speed", "must be >= 0"));
        }
        if !(self.tracker_max_turn > 0.0 && self.tracker_max_turn <= PI) {
            return Err(Error::config("tracker_max_turn", "must lie in (0, pi]"));
        }
        if self.target_heading_jitter < 0.0 {
            return Err(Error::config("target_heading_jitter", "must be >= 0"));
        }
        Ok(())
    }

    pub fn limits(&self) -> ActuatorLimits {
        ActuatorLimits {
            max_turn: self.tracker_max_turn,
            max_speed: self.tracker_max_speed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContactKind {
    Contact,
    Lost,
}

/// Closing-rate bucket values.
pub const OPENING: u8 = 0;
pub const STEADY: u8 = 1;
pub const CLOSING: u8 = 2;

/// What the tracker's sensors report at the start of a tick. Bucket fields
/// are meaningful only for `Contact`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub kind: ContactKind,
    pub range_bucket: u8,
    pub bearing_bucket: u8,
    pub closing_bucket: u8,
}

impl Observation {
    pub const LOST: Observation = Observation {
        kind: ContactKind::Lost,
        range_bucket: 0,
        bearing_bucket: 0,
        closing_bucket: STEADY,
    };

    pub fn contact(range_bucket: u8, bearing_bucket: u8, closing_bucket: u8) -> Self {
        Observation {
            kind: ContactKind::Contact,
            range_bucket,
            bearing_bucket,
            closing_bucket,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub tracker: AgentState,
    pub target: AgentState,
    /// Range at the previous observation, if any.
    pub prev_range: Option<f64>,
}

impl WorldState {
    pub fn range(&self) -> f64 {
        self.tracker.pos.distance(self.target.pos)
    }

    pub fn is_finite(&self) -> bool {
        self.tracker.is_finite()
            && self.target.is_finite()
            && self.prev_range.map_or(true, f64::is_finite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    pub ticks: u32,
    /// Fraction of the final ticks during which the target must stay in sensor range.
    #[serde(default = "default_success_window")]
    pub success_window_frac: f64,
}

fn default_success_window() -> f64 {
    0.1
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            ticks: 60,
            success_window_frac: default_success_window(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ticks < 1 {
            return Err(Error::config("ticks", "must be >= 1"));
        }
        if !(self.success_window_frac > 0.0 && self.success_window_frac <= 1.0) {
            return Err(Error::config("success_window_frac", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Number of final ticks checked for contact (at least one).
    pub fn success_window_ticks(&self) -> u32 {
        let w = (self.ticks as f64 * self.success_window_frac).ceil() as u32;
        w.clamp(1, self.ticks)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub success: bool,
    pub contact_ticks: u32,
    pub evasion_triggers: u32,
    pub final_range: f64,
}

/// Positions recorded during an episode for the monitor.
///
/// `target[i]` is the target position before its move at tick `i` (so the
/// vector has `ticks + 1` entries); `tracker[i]` is the tracker position the
/// target reacted to at tick `i`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeTrace {
    pub target: Vec<Vec2>,
    pub tracker: Vec<Vec2>,
}

/// Advances one agent by one tick.
pub fn step_agent(a: AgentState, act: Action, max_turn: f64, max_speed: f64) -> Result<AgentState> {
    if !a.is_finite() || !act.is_finite() || !max_turn.is_finite() || !max_speed.is_finite() {
        return Err(Error::InvalidState("non-finite agent state or action".into()));
    }
    let turn = act.turn.clamp(-max_turn, max_turn);
    let speed = act.speed.clamp(0.0, max_speed.max(0.0));
    let heading = normalize_angle(a.heading + turn);
    let pos = Vec2::new(
        a.pos.x + speed * heading.cos(),
        a.pos.y + speed * heading.sin(),
    );
    Ok(AgentState { pos, heading, speed })
}

/// Target behaviour: flee straight away when the tracker is strictly closer
/// than the evasion threshold, otherwise cruise with a jittered heading.
///
/// Exactly one standard-normal draw is consumed per call.
pub fn target_policy<R: Rng + ?Sized>(world: &WorldState, env: &EnvironmentParams, rng: &mut R) -> Action {
    let noise: f64 = rng.sample(StandardNormal);
    let target = world.target;
    let range = world.range();
    if range < env.evasion_threshold {
        let away = target.pos.sub(world.tracker.pos);
        let desired = if range > 0.0 { away.y.atan2(away.x) } else { target.heading };
        Action::new(normalize_angle(desired - target.heading), env.target_flee_speed)
    } else {
        Action::new(noise * env.target_heading_jitter, env.target_cruise_speed)
    }
}

/// Whether the target flees given this world.
pub fn is_fleeing(world: &WorldState, env: &EnvironmentParams) -> bool {
    world.range() < env.evasion_threshold
}

fn range_bucket(range: f64, sensor_range: f64) -> u8 {
    let b = (range / sensor_range * R_BUCKETS as f64).floor();
    (b.max(0.0) as u8).min(R_BUCKETS - 1)
}

/// Bucket of a bearing already wrapped into `[-PI, PI)`.
pub fn bearing_bucket(bearing: f64) -> u8 {
    let b = ((bearing + PI) / (2.0 * PI) * B_BUCKETS as f64).floor();
    (b.max(0.0) as u8).min(B_BUCKETS - 1)
}

pub fn observe(world: &WorldState, env: &EnvironmentParams) -> Observation {
    let range = world.range();
    if range > env.sensor_range {
        return Observation::LOST;
    }
    let rel = world.target.pos.sub(world.tracker.pos);
    let bearing = normalize_angle(rel.y.atan2(rel.x) - world.tracker.heading);
    let closing = match world.prev_range {
        None => STEADY,
        Some(prev) => {
            let delta = range - prev;
            if delta.abs() < CLOSE_EPS {
                STEADY
            } else if delta < 0.0 {
                CLOSING
            } else {
                OPENING
            }
        }
    };
    Observation::contact(range_bucket(range, env.sensor_range), bearing_bucket(bearing), closing)
}

/// Initial placement: tracker at the origin heading 0, target at half the
/// sensor range on a uniform bearing with a uniform heading.
pub fn initial_world<R: Rng + ?Sized>(env: &EnvironmentParams, rng: &mut R) -> WorldState {
    let bearing = rng.random_range(-PI..PI);
    let heading = rng.random_range(-PI..PI);
    let r = 0.5 * env.sensor_range;
    WorldState {
        tracker: AgentState {
            pos: Vec2::new(0.0, 0.0),
            heading: 0.0,
            speed: 0.0,
        },
        target: AgentState {
            pos: Vec2::new(r * bearing.cos(), r * bearing.sin()),
            heading,
            speed: env.target_cruise_speed,
        },
        prev_range: None,
    }
}

/// Simulates one episode with the given tracker strategy.
pub fn run_episode<R: Rng + ?Sized>(
    strategy: &Strategy,
    env: &EnvironmentParams,
    cfg: &EpisodeConfig,
    rng: &mut R,
) -> Result<EpisodeOutcome> {
    simulate(strategy, env, cfg, rng, None, false)
}

/// Success flag only; stops simulating at the first failure.
pub fn episode_succeeds<R: Rng + ?Sized>(
    strategy: &Strategy,
    env: &EnvironmentParams,
    cfg: &EpisodeConfig,
    rng: &mut R,
) -> Result<bool> {
    simulate(strategy, env, cfg, rng, None, true).map(|o| o.success)
}

/// Like [`run_episode`] but also records the positions the monitor needs.
pub fn run_episode_traced<R: Rng + ?Sized>(
    strategy: &Strategy,
    env: &EnvironmentParams,
    cfg: &EpisodeConfig,
    rng: &mut R,
) -> Result<(EpisodeOutcome, EpisodeTrace)> {
    let mut trace = EpisodeTrace {
        target: Vec::with_capacity(cfg.ticks as usize + 1),
        tracker: Vec::with_capacity(cfg.ticks as usize),
    };
    let outcome = simulate(strategy, env, cfg, rng, Some(&mut trace), false)?;
    Ok((outcome, trace))
}

fn simulate<R: Rng + ?Sized>(
    strategy: &Strategy,
    env: &EnvironmentParams,
    cfg: &EpisodeConfig,
    rng: &mut R,
    mut trace: Option<&mut EpisodeTrace>,
    stop_on_failure: bool,
) -> Result<EpisodeOutcome> {
    if cfg.ticks < 1 {
        return Err(Error::config("ticks", "must be >= 1"));
    }
    strategy.validate(env.limits())?;

    let mut world = initial_world(env, rng);
    let window_start = cfg.ticks - cfg.success_window_ticks();
    let mut contact_ticks = 0;
    let mut evasion_triggers = 0;
    let mut in_range_at_end = true;
    if let Some(t) = trace.as_deref_mut() {
        t.target.push(world.target.pos);
    }

    for tick in 0..cfg.ticks {
        let obs = observe(&world, env);
        if obs.kind == ContactKind::Contact {
            contact_ticks += 1;
        }
        world.prev_range = Some(world.range());

        let act = strategy.decide(&obs);
        world.tracker = step_agent(world.tracker, act, env.tracker_max_turn, env.tracker_max_speed)?;

        if is_fleeing(&world, env) {
            evasion_triggers += 1;
        }
        let target_act = target_policy(&world, env, rng);
        if let Some(t) = trace.as_deref_mut() {
            t.tracker.push(world.tracker.pos);
        }
        world.target = step_agent(world.target, target_act, PI, env.target_flee_speed)?;
        if let Some(t) = trace.as_deref_mut() {
            t.target.push(world.target.pos);
        }

        if tick >= window_start && world.range() > env.sensor_range {
            in_range_at_end = false;
        }
        if stop_on_failure && (evasion_triggers > 0 || !in_range_at_end) {
            break;
        }
    }

    Ok(EpisodeOutcome {
        success: in_range_at_end && evasion_triggers == 0,
        contact_ticks,
        evasion_triggers,
        final_range: world.range(),
    })
}
