//! Closed-loop replay of a signal under a sampling policy.
//!
//! At each measurement the engine observes the signal, forms the agent state,
//! credits the reward for the interval that just elapsed to the previous
//! decision, asks the policy for the next action and schedules the next
//! measurement. One transmission is charged per measurement plus one per
//! interval change (the command sent to the node).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rl::{
    apply_action, compute_reward, q_update, select_action, Action, AgentState, LearningParams,
    QTable, QualityThreshold, SamplingInterval, VisitCounts,
};
use crate::signal::{SignalSource, GRID_STEP};
use crate::trace::context_of_epoch;

/// Length of the forced-exploration phase on real traces (12 h).
pub const DEFAULT_CALIBRATION_SECONDS: i64 = 43_200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub tau: QualityThreshold,
    pub params: LearningParams,
    /// Seconds from the start during which actions are chosen least-tried-first.
    pub calibration_duration: i64,
    /// Seconds simulated from the signal start; `None` runs the whole signal.
    pub span: Option<i64>,
    pub seed: u64,
    /// Seconds from the start before which decisions are not scored.
    pub score_after: i64,
    pub initial_interval: SamplingInterval,
    /// When false the table is used as given and never updated.
    pub learning: bool,
}

impl SimConfig {
    pub fn new(params: LearningParams, seed: u64) -> Self {
        Self {
            tau: QualityThreshold::default(),
            params,
            calibration_duration: DEFAULT_CALIBRATION_SECONDS,
            span: None,
            seed,
            score_after: DEFAULT_CALIBRATION_SECONDS,
            initial_interval: SamplingInterval::S30,
            learning: true,
        }
    }

    /// Sets the calibration length and moves the scoring start with it.
    pub fn with_calibration(mut self, seconds: i64) -> Self {
        self.calibration_duration = seconds;
        self.score_after = seconds;
        self
    }

    pub fn with_span(mut self, seconds: i64) -> Self {
        self.span = Some(seconds);
        self
    }

    pub fn with_tau(mut self, tau: QualityThreshold) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self, signal: &SignalSource) -> Result<(i64, i64)> {
        self.params.validate()?;
        let span = self.span.unwrap_or_else(|| signal.span());
        if span <= 0 {
            return Err(Error::Config(format!("span must be positive, got {span} s")));
        }
        if self.calibration_duration < 0 || self.calibration_duration > span {
            return Err(Error::Config(format!(
                "calibration of {} s does not fit in a {} s span",
                self.calibration_duration, span
            )));
        }
        if self.score_after < 0 || self.score_after >= span {
            return Err(Error::Config(format!(
                "score_after of {} s leaves nothing to score in a {} s span",
                self.score_after, span
            )));
        }
        let end = signal.start + span;
        if signal.end() < end {
            return Err(Error::SignalTooShort {
                signal_end: signal.end(),
                needed: end,
            });
        }
        Ok((signal.start, end))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionLogEntry {
    pub time: i64,
    pub observation: f64,
    /// Absent for the first measurement only.
    pub delta: Option<f64>,
    pub state: AgentState,
    pub reward: Option<f64>,
    pub action: Action,
    pub interval_before: SamplingInterval,
    pub interval_after: SamplingInterval,
    pub tx_measurement: u32,
    pub tx_command: u32,
}

impl DecisionLogEntry {
    pub fn transmissions(&self) -> u64 {
        u64::from(self.tx_measurement + self.tx_command)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub log: Vec<DecisionLogEntry>,
    pub q_table: Option<QTable>,
    pub start: i64,
    pub end: i64,
    /// Epoch seconds from which decisions are scored.
    pub score_start: i64,
    pub tau: QualityThreshold,
    pub total_tx: u64,
    pub max_tx: u64,
}

impl RunResult {
    fn new(
        log: Vec<DecisionLogEntry>,
        q_table: Option<QTable>,
        start: i64,
        end: i64,
        score_start: i64,
        tau: QualityThreshold,
    ) -> Self {
        let total_tx = log.iter().map(DecisionLogEntry::transmissions).sum();
        let max_tx = grid_points_between(start, end);
        Self {
            log,
            q_table,
            start,
            end,
            score_start,
            tau,
            total_tx,
            max_tx,
        }
    }

    pub fn scored(&self) -> &[DecisionLogEntry] {
        let first = self.log.partition_point(|e| e.time < self.score_start);
        &self.log[first..]
    }

    /// Transmissions charged inside the scored window.
    pub fn scored_tx(&self) -> u64 {
        self.scored().iter().map(DecisionLogEntry::transmissions).sum()
    }

    /// Measurements a fixed 30 s schedule would send inside the scored window.
    pub fn scored_max_tx(&self) -> u64 {
        grid_points_between(self.score_start, self.end)
    }

    pub fn interval_changes(&self) -> u64 {
        self.log.iter().map(|e| u64::from(e.tx_command)).sum()
    }

    pub fn actions(&self) -> Vec<Action> {
        self.log.iter().map(|e| e.action).collect()
    }
}

/// 30 s grid points in `[from, to)`, with `from` on the grid.
fn grid_points_between(from: i64, to: i64) -> u64 {
    if to <= from {
        0
    } else {
        ((to - from + GRID_STEP - 1) / GRID_STEP) as u64
    }
}

/// Chooses the next action and learns from credited rewards.
pub trait Policy {
    fn decide(&mut self, time: i64, state: AgentState) -> Result<Action>;

    /// Credits `reward` to `(state, action)`, which led to `next`.
    fn observe(
        &mut self,
        _state: AgentState,
        _action: Action,
        _reward: f64,
        _next: AgentState,
    ) -> Result<()> {
        Ok(())
    }

    fn table(&self) -> Option<&QTable> {
        None
    }
}

/// Epsilon-greedy Q-learning agent with a least-tried-first calibration phase.
#[derive(Clone, Debug)]
pub struct QAgent {
    table: QTable,
    visits: VisitCounts,
    params: LearningParams,
    rng: ChaCha8Rng,
    calibration_end: i64,
    learning: bool,
}

impl QAgent {
    pub fn new(params: LearningParams, seed: u64, calibration_end: i64) -> Self {
        Self::with_table(QTable::new(params.q_init), params, seed, calibration_end)
    }

    pub fn with_table(table: QTable, params: LearningParams, seed: u64, calibration_end: i64) -> Self {
        Self {
            table,
            visits: VisitCounts::default(),
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            calibration_end,
            learning: true,
        }
    }

    pub fn frozen(mut self) -> Self {
        self.learning = false;
        self
    }

    pub fn into_table(self) -> QTable {
        self.table
    }
}

impl Policy for QAgent {
    fn decide(&mut self, time: i64, state: AgentState) -> Result<Action> {
        let action = if time < self.calibration_end {
            self.visits.least_tried(state)
        } else {
            select_action(&self.table, state, &self.params, &mut self.rng)
        };
        self.visits.record(state, action);
        Ok(action)
    }

    fn observe(
        &mut self,
        state: AgentState,
        action: Action,
        reward: f64,
        next: AgentState,
    ) -> Result<()> {
        if self.learning {
            q_update(&mut self.table, state, action, reward, next, &self.params)?;
        }
        Ok(())
    }

    fn table(&self) -> Option<&QTable> {
        Some(&self.table)
    }
}

/// Never changes the interval.
#[derive(Clone, Copy, Debug, Default)]
pub struct FixedPolicy;

impl Policy for FixedPolicy {
    fn decide(&mut self, _time: i64, _state: AgentState) -> Result<Action> {
        Ok(Action::Keep)
    }
}

/// Plays back a recorded action sequence.
#[derive(Clone, Debug)]
pub struct ReplayPolicy {
    actions: Vec<Action>,
    next: usize,
}

impl ReplayPolicy {
    pub fn new(actions: Vec<Action>) -> Self {
        Self { actions, next: 0 }
    }
}

impl Policy for ReplayPolicy {
    fn decide(&mut self, time: i64, _state: AgentState) -> Result<Action> {
        let action = self.actions.get(self.next).copied().ok_or_else(|| {
            Error::Config(format!("replay ran out of actions at t = {time}"))
        })?;
        self.next += 1;
        Ok(action)
    }
}

/// Runs `policy` over `[signal.start, signal.start + span)`.
pub fn run_with_policy<P: Policy>(
    signal: &SignalSource,
    config: &SimConfig,
    policy: &mut P,
) -> Result<Vec<DecisionLogEntry>> {
    let (start, end) = config.validate(signal)?;
    let tau = config.tau;
    let mut log: Vec<DecisionLogEntry> = Vec::with_capacity(((end - start) / GRID_STEP) as usize);
    let mut interval = config.initial_interval;
    let mut t = start;
    while t < end {
        let observation = signal.value_at(t)?;
        let previous = log.last();
        let delta = previous.map(|p| (observation - p.observation).abs());
        let quality = delta.is_none_or(|d| tau.is_met(d));
        let working_hour = context_of_epoch(t).is_working_hour;
        let state = AgentState::new(quality, interval, working_hour);
        let reward = delta.map(|d| compute_reward(interval, d, tau));

        if let (Some(prev), Some(r)) = (previous, reward) {
            policy.observe(prev.state, prev.action, r, state)?;
        }

        let action = policy.decide(t, state)?;
        let next = apply_action(interval, action)?;
        log.push(DecisionLogEntry {
            time: t,
            observation,
            delta,
            state,
            reward,
            action,
            interval_before: interval,
            interval_after: next,
            tx_measurement: 1,
            tx_command: u32::from(next != interval),
        });
        interval = next;
        t += i64::from(interval.seconds());
    }
    Ok(log)
}

fn finish(
    log: Vec<DecisionLogEntry>,
    table: Option<QTable>,
    signal: &SignalSource,
    config: &SimConfig,
) -> RunResult {
    let start = signal.start;
    let end = start + config.span.unwrap_or_else(|| signal.span());
    RunResult::new(log, table, start, end, start + config.score_after, config.tau)
}

/// Learning run from a fresh table.
pub fn run_simulation(signal: &SignalSource, config: &SimConfig) -> Result<RunResult> {
    run_simulation_from(signal, config, QTable::new(config.params.q_init))
}

/// Learning (or frozen, when `config.learning` is false) run from a given table.
pub fn run_simulation_from(
    signal: &SignalSource,
    config: &SimConfig,
    table: QTable,
) -> Result<RunResult> {
    let mut agent = QAgent::with_table(
        table,
        config.params,
        config.seed,
        signal.start + config.calibration_duration,
    );
    if !config.learning {
        agent = agent.frozen();
    }
    let log = run_with_policy(signal, config, &mut agent)?;
    Ok(finish(log, Some(agent.into_table()), signal, config))
}

/// Baseline that samples the whole signal at a fixed interval.
pub fn run_fixed_interval(
    signal: &SignalSource,
    interval: SamplingInterval,
    tau: QualityThreshold,
) -> Result<RunResult> {
    let params = LearningParams::new(0.0, 0.0, 0.0)?;
    let mut config = SimConfig::new(params, 0).with_calibration(0).with_tau(tau);
    config.initial_interval = interval;
    run_fixed_interval_with(signal, interval, &config)
}

/// Fixed-interval baseline over the span and scoring window of `config`.
pub fn run_fixed_interval_with(
    signal: &SignalSource,
    interval: SamplingInterval,
    config: &SimConfig,
) -> Result<RunResult> {
    let mut config = config.clone();
    config.initial_interval = interval;
    let log = run_with_policy(signal, &config, &mut FixedPolicy)?;
    Ok(finish(log, None, signal, &config))
}

/// Open-loop replay of a recorded action sequence.
pub fn replay_actions(
    signal: &SignalSource,
    config: &SimConfig,
    actions: &[Action],
) -> Result<RunResult> {
    let mut policy = ReplayPolicy::new(actions.to_vec());
    let log = run_with_policy(signal, config, &mut policy)?;
    Ok(finish(log, None, signal, config))
}
