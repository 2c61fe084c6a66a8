//! Condition-action rule sets: the unit the learner evolves and the tracker executes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{Action, ActuatorLimits, ContactKind, Observation, B_BUCKETS, R_BUCKETS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KindMatch {
    Contact,
    Lost,
    Any,
}

/// Subset of {opening, steady, closing} as a bitmask indexed by closing bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClosingSet(pub u8);

impl ClosingSet {
    pub const ALL: ClosingSet = ClosingSet(0b111);

    pub fn contains(self, closing_bucket: u8) -> bool {
        closing_bucket < 3 && self.0 & (1 << closing_bucket) != 0
    }

    pub fn is_valid(self) -> bool {
        self.0 != 0 && self.0 & !0b111 == 0
    }
}

/// One condition-action rule.
///
/// Contact observations must fall inside the range interval, the bearing
/// interval and the closing set. The bearing interval wraps when
/// `bearing.0 > bearing.1`. Lost observations carry no buckets, so `Lost`
/// and `Any` rules match them unconditionally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub kind: KindMatch,
    pub range: (u8, u8),
    pub bearing: (u8, u8),
    pub closing: ClosingSet,
    pub action: Action,
}

impl Rule {
    pub fn matches(&self, obs: &Observation) -> bool {
        match (self.kind, obs.kind) {
            (KindMatch::Contact, ContactKind::Lost) => false,
            (KindMatch::Lost, ContactKind::Contact) => false,
            (KindMatch::Lost | KindMatch::Any, ContactKind::Lost) => true,
            (KindMatch::Contact | KindMatch::Any, ContactKind::Contact) => {
                let (rlo, rhi) = self.range;
                let (blo, bhi) = self.bearing;
                let in_range = rlo <= obs.range_bucket && obs.range_bucket <= rhi;
                let in_bearing = if blo <= bhi {
                    blo <= obs.bearing_bucket && obs.bearing_bucket <= bhi
                } else {
                    obs.bearing_bucket >= blo || obs.bearing_bucket <= bhi
                };
                in_range && in_bearing && self.closing.contains(obs.closing_bucket)
            }
        }
    }

    pub fn validate(&self, limits: ActuatorLimits) -> Result<()> {
        if self.range.0 > self.range.1 || self.range.1 >= R_BUCKETS {
            return Err(Error::Strategy(format!("bad range interval {:?}", self.range)));
        }
        if self.bearing.0 >= B_BUCKETS || self.bearing.1 >= B_BUCKETS {
            return Err(Error::Strategy(format!("bad bearing interval {:?}", self.bearing)));
        }
        if !self.closing.is_valid() {
            return Err(Error::Strategy("closing set must be a nonempty subset".into()));
        }
        if !self.action.within(limits) {
            return Err(Error::Strategy(format!("action {:?} outside actuator limits", self.action)));
        }
        Ok(())
    }

    pub fn random<R: Rng + ?Sized>(limits: ActuatorLimits, rng: &mut R) -> Rule {
        let kind = match rng.random_range(0..4) {
            0 => KindMatch::Any,
            1 => KindMatch::Lost,
            _ => KindMatch::Contact,
        };
        let a = rng.random_range(0..R_BUCKETS);
        let b = rng.random_range(0..R_BUCKETS);
        Rule {
            kind,
            range: (a.min(b), a.max(b)),
            bearing: (rng.random_range(0..B_BUCKETS), rng.random_range(0..B_BUCKETS)),
            closing: ClosingSet(rng.random_range(1..8)),
            action: random_action(limits, rng),
        }
    }
}

pub fn random_action<R: Rng + ?Sized>(limits: ActuatorLimits, rng: &mut R) -> Action {
    Action::new(
        rng.random_range(-limits.max_turn..=limits.max_turn),
        rng.random_range(0.0..=limits.max_speed),
    )
}

/// An ordered rule list plus the action taken when no rule matches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub rules: Vec<Rule>,
    pub default_action: Action,
}

impl Strategy {
    /// First matching rule wins; falls back to the default action.
    pub fn decide(&self, obs: &Observation) -> Action {
        self.rules
            .iter()
            .find(|r| r.matches(obs))
            .map_or(self.default_action, |r| r.action)
    }

    pub fn validate(&self, limits: ActuatorLimits) -> Result<()> {
        if self.rules.is_empty() {
            return Err(Error::Strategy("strategy needs at least one rule".into()));
        }
        for rule in &self.rules {
            rule.validate(limits)?;
        }
        if !self.default_action.within(limits) {
            return Err(Error::Strategy("default action outside actuator limits".into()));
        }
        Ok(())
    }

    pub fn random<R: Rng + ?Sized>(limits: ActuatorLimits, rule_count: usize, rng: &mut R) -> Strategy {
        Strategy {
            rules: (0..rule_count).map(|_| Rule::random(limits, rng)).collect(),
            default_action: random_action(limits, rng),
        }
    }
}

/// Free function form of [`Strategy::decide`].
pub fn decide(strategy: &Strategy, obs: &Observation) -> Action {
    strategy.decide(obs)
}
