//! Tabular Q-learning over the sampling-interval MDP.
//!
//! The agent state is the tuple (quality flag, current interval, working-hour
//! flag), giving 16 states. Actions only move one rung along the interval
//! ladder. Boundary moves are masked out of the valid set instead of being
//! clamped, so the table holds exactly 40 entries.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed sampling intervals. Each rung doubles the previous one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum SamplingInterval {
    S30,
    S60,
    S120,
    S240,
}

impl SamplingInterval {
    pub const LADDER: [SamplingInterval; 4] = [Self::S30, Self::S60, Self::S120, Self::S240];

    /// Shortest interval; every other interval is a multiple of it.
    pub const BASE_SECONDS: u32 = 30;

    pub fn seconds(self) -> u32 {
        Self::BASE_SECONDS * self.base_multiplier()
    }

    /// How many times fewer transmissions than sampling every 30 s.
    pub fn base_multiplier(self) -> u32 {
        1 << self.rung()
    }

    fn rung(self) -> usize {
        match self {
            Self::S30 => 0,
            Self::S60 => 1,
            Self::S120 => 2,
            Self::S240 => 3,
        }
    }

    pub fn from_seconds(seconds: u32) -> Result<Self> {
        Self::LADDER
            .into_iter()
            .find(|i| i.seconds() == seconds)
            .ok_or(Error::InvalidInterval(seconds))
    }

    pub fn longer(self) -> Option<Self> {
        Self::LADDER.get(self.rung() + 1).copied()
    }

    pub fn shorter(self) -> Option<Self> {
        self.rung().checked_sub(1).map(|r| Self::LADDER[r])
    }
}

impl TryFrom<u32> for SamplingInterval {
    type Error = Error;

    fn try_from(seconds: u32) -> Result<Self> {
        Self::from_seconds(seconds)
    }
}

impl From<SamplingInterval> for u32 {
    fn from(i: SamplingInterval) -> u32 {
        i.seconds()
    }
}

impl fmt::Display for SamplingInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.seconds())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    Increase,
    Keep,
    Reduce,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Increase, Action::Keep, Action::Reduce];

    /// Greedy tie-break order, most preferred first.
    pub const PRIORITY: [Action; 3] = [Action::Keep, Action::Reduce, Action::Increase];

    fn priority_rank(self) -> usize {
        match self {
            Action::Keep => 0,
            Action::Reduce => 1,
            Action::Increase => 2,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::Increase => "increase",
            Action::Keep => "keep",
            Action::Reduce => "reduce",
        };
        f.write_str(s)
    }
}

/// Actions available at `interval`, listed in priority order.
pub fn valid_actions(interval: SamplingInterval) -> Vec<Action> {
    Action::PRIORITY
        .into_iter()
        .filter(|a| match a {
            Action::Increase => interval.longer().is_some(),
            Action::Reduce => interval.shorter().is_some(),
            Action::Keep => true,
        })
        .collect()
}

pub fn apply_action(interval: SamplingInterval, action: Action) -> Result<SamplingInterval> {
    let next = match action {
        Action::Keep => Some(interval),
        Action::Increase => interval.longer(),
        Action::Reduce => interval.shorter(),
    };
    next.ok_or(Error::InvalidAction { interval, action })
}

/// Maximum tolerated absolute difference between consecutive measurements, in °C.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct QualityThreshold(f64);

impl QualityThreshold {
    pub const DEFAULT_CELSIUS: f64 = 0.02;

    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau > 0.0 {
            Ok(Self(tau))
        } else {
            Err(Error::InvalidThreshold(tau))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_met(self, delta: f64) -> bool {
        delta <= self.0
    }
}

impl Default for QualityThreshold {
    fn default() -> Self {
        Self(Self::DEFAULT_CELSIUS)
    }
}

impl TryFrom<f64> for QualityThreshold {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QualityThreshold> for f64 {
    fn from(t: QualityThreshold) -> f64 {
        t.0
    }
}

/// Reward for a measurement pair taken `interval` apart that differed by `delta`.
///
/// The base reward is the transmission saving relative to 30 s. It is scaled
/// by 1.5 when the change stayed under half the threshold and negated when
/// the threshold was exceeded.
pub fn compute_reward(interval: SamplingInterval, delta: f64, tau: QualityThreshold) -> f64 {
    let base = f64::from(interval.base_multiplier());
    let tau = tau.value();
    if delta < tau / 2.0 {
        1.5 * base
    } else if delta <= tau {
        base
    } else {
        -base
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentState {
    pub quality: bool,
    pub interval: SamplingInterval,
    pub working_hour: bool,
}

impl AgentState {
    pub fn new(quality: bool, interval: SamplingInterval, working_hour: bool) -> Self {
        Self {
            quality,
            interval,
            working_hour,
        }
    }

    /// All 16 states in a fixed order.
    pub fn all() -> impl Iterator<Item = AgentState> {
        [false, true].into_iter().flat_map(|quality| {
            SamplingInterval::LADDER.into_iter().flat_map(move |interval| {
                [false, true]
                    .into_iter()
                    .map(move |working_hour| AgentState::new(quality, interval, working_hour))
            })
        })
    }

    fn index(self) -> usize {
        (usize::from(self.quality) * 4 + self.interval.rung()) * 2 + usize::from(self.working_hour)
    }

    fn key(self) -> String {
        format!(
            "q={},s={},w={}",
            u8::from(self.quality),
            self.interval.seconds(),
            u8::from(self.working_hour)
        )
    }
}

impl fmt::Display for AgentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub q_init: f64,
}

impl LearningParams {
    pub const DEFAULT_EPSILON: f64 = 0.1;

    pub fn new(alpha: f64, gamma: f64, epsilon: f64) -> Result<Self> {
        let params = Self {
            alpha,
            gamma,
            epsilon,
            q_init: 0.0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_q_init(mut self, q_init: f64) -> Result<Self> {
        if !q_init.is_finite() {
            return Err(Error::InvalidParameter {
                name: "q_init",
                value: q_init,
            });
        }
        self.q_init = q_init;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("epsilon", self.epsilon),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        if !self.q_init.is_finite() {
            return Err(Error::InvalidParameter {
                name: "q_init",
                value: self.q_init,
            });
        }
        Ok(())
    }
}

/// Action values for the 40 valid (state, action) pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    // Indexed by state index, then `Action as usize`; invalid pairs stay `None`.
    values: [[Option<f64>; 3]; 16],
}

fn action_slot(action: Action) -> usize {
    match action {
        Action::Increase => 0,
        Action::Keep => 1,
        Action::Reduce => 2,
    }
}

impl QTable {
    pub fn new(q_init: f64) -> Self {
        let mut values = [[None; 3]; 16];
        for state in AgentState::all() {
            for action in valid_actions(state.interval) {
                values[state.index()][action_slot(action)] = Some(q_init);
            }
        }
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.iter().flatten().filter(|v| v.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, state: AgentState, action: Action) -> Option<f64> {
        self.values[state.index()][action_slot(action)]
    }

    pub fn set(&mut self, state: AgentState, action: Action, value: f64) -> Result<()> {
        let slot = self.values[state.index()][action_slot(action)]
            .as_mut()
            .ok_or(Error::InvalidAction {
                interval: state.interval,
                action,
            })?;
        *slot = value;
        Ok(())
    }

    /// Largest value over the valid actions of `state`.
    pub fn max_value(&self, state: AgentState) -> f64 {
        self.values[state.index()]
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Best valid action, ties broken by [`Action::PRIORITY`].
    pub fn greedy(&self, state: AgentState) -> Action {
        let mut best = Action::Keep;
        let mut best_value = f64::NEG_INFINITY;
        for action in valid_actions(state.interval) {
            let v = self.get(state, action).unwrap_or(f64::NEG_INFINITY);
            if v > best_value {
                best = action;
                best_value = v;
            }
        }
        best
    }

    pub fn iter(&self) -> impl Iterator<Item = (AgentState, Action, f64)> + '_ {
        AgentState::all().flat_map(move |s| {
            Action::ALL
                .into_iter()
                .filter_map(move |a| self.get(s, a).map(|v| (s, a, v)))
        })
    }

    /// Nested `state -> action -> value` view used for JSON snapshots.
    pub fn snapshot(&self) -> BTreeMap<String, BTreeMap<String, f64>> {
        let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for (s, a, v) in self.iter() {
            out.entry(s.key()).or_default().insert(a.to_string(), v);
        }
        out
    }
}

impl Serialize for QTable {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.snapshot().serialize(serializer)
    }
}

/// One step of the Q-learning rule:
/// `Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))`, with the max
/// taken over the actions valid in `next`.
pub fn q_update(
    table: &mut QTable,
    state: AgentState,
    action: Action,
    reward: f64,
    next: AgentState,
    params: &LearningParams,
) -> Result<f64> {
    let current = table.get(state, action).ok_or(Error::InvalidAction {
        interval: state.interval,
        action,
    })?;
    let target = reward + params.gamma * table.max_value(next);
    let updated = current + params.alpha * (target - current);
    table.set(state, action, updated)?;
    Ok(updated)
}

/// Epsilon-greedy choice over the valid actions of `state`.
///
/// Always consumes exactly two draws from `rng` so the random stream does not
/// depend on the table contents.
pub fn select_action<R: Rng + ?Sized>(
    table: &QTable,
    state: AgentState,
    params: &LearningParams,
    rng: &mut R,
) -> Action {
    let roll: f64 = rng.random();
    let actions = valid_actions(state.interval);
    let pick = rng.random_range(0..actions.len());
    if roll < params.epsilon {
        actions[pick]
    } else {
        table.greedy(state)
    }
}

/// Per-pair selection counters, used by the calibration policy.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VisitCounts {
    counts: [[u64; 3]; 16],
}

impl VisitCounts {
    pub fn record(&mut self, state: AgentState, action: Action) {
        self.counts[state.index()][action_slot(action)] += 1;
    }

    pub fn get(&self, state: AgentState, action: Action) -> u64 {
        self.counts[state.index()][action_slot(action)]
    }

    /// The valid action tried the fewest times in `state`, ties by priority.
    pub fn least_tried(&self, state: AgentState) -> Action {
        valid_actions(state.interval)
            .into_iter()
            .min_by_key(|a| (self.get(state, *a), a.priority_rank()))
            .unwrap_or(Action::Keep)
    }
}
